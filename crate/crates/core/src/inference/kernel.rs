//! Dense parameter layouts and per-session E-steps.

use std::collections::HashMap;
use std::ops::Range;

use super::pbm_posteriors;
use crate::error::{Error, Result};
use crate::intent::IntentLabel;
use crate::log_store::Session;
use crate::models::{
    BaseParams, CascadeParams, ClickModel, DbnParams, ModelKind, PbmParams, RelevanceTable, UbmParams, PROB_EPS,
};

/// Expected successes and trials of one Bernoulli parameter.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Suff {
    pub succ: f64,
    pub trials: f64,
}

impl Suff {
    #[inline]
    fn add(&mut self, succ: f64, trials: f64) {
        self.succ += succ;
        self.trials += trials;
    }
}

pub(crate) struct CompiledSession {
    pub pairs: Vec<u32>,
    pub clicks: Vec<bool>,
    pub intent: IntentLabel,
}

impl CompiledSession {
    fn num_clicks(&self) -> usize {
        self.clicks.iter().filter(|&&c| c).count()
    }
}

/// Sessions with `(query, doc)` pairs interned to dense indices.
pub(crate) struct Dataset {
    pub pairs: Vec<(String, String)>,
    pub sessions: Vec<CompiledSession>,
}

impl Dataset {
    pub fn compile(sessions: &[Session], max_positions: usize) -> Result<Self> {
        let mut index: HashMap<(&str, &str), u32> = HashMap::new();
        let mut pairs = Vec::new();
        let mut compiled = Vec::with_capacity(sessions.len());
        for s in sessions {
            s.validate()?;
            if s.len() > max_positions {
                return Err(Error::Range {
                    position: s.len(),
                    max: max_positions,
                });
            }
            let ids = s
                .docs
                .iter()
                .map(|d| {
                    *index.entry((s.query_id.as_str(), d.as_str())).or_insert_with(|| {
                        pairs.push((s.query_id.clone(), d.clone()));
                        (pairs.len() - 1) as u32
                    })
                })
                .collect();
            compiled.push(CompiledSession {
                pairs: ids,
                clicks: s.clicks.clone(),
                intent: s.intent,
            });
        }
        Ok(Dataset {
            pairs,
            sessions: compiled,
        })
    }
}

/// Where each parameter lives in the flat vector of one table.
///
/// The examination block comes first: PBM `γ_i`, UBM `β_{l,i}`, DBN
/// continuation `γ`; cascade has none. Relevance follows, then DBN
/// satisfaction.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub kind: ModelKind,
    pub max_positions: usize,
    pub n_pairs: usize,
}

impl Layout {
    pub fn n_exam(&self) -> usize {
        let n = self.max_positions;
        match self.kind {
            ModelKind::Pbm => n,
            ModelKind::Cascade => 0,
            ModelKind::Ubm => n * (n + 1) / 2,
            ModelKind::Dbn => 1,
        }
    }

    pub fn exam(&self) -> Range<usize> {
        0..self.n_exam()
    }

    pub fn rel(&self) -> Range<usize> {
        let start = self.n_exam();
        start..start + self.n_pairs
    }

    pub fn sat(&self) -> Range<usize> {
        let start = self.rel().end;
        match self.kind {
            ModelKind::Dbn => start..start + self.n_pairs,
            _ => start..start,
        }
    }

    pub fn len(&self) -> usize {
        self.sat().end
    }

    /// Flat index of `β_{l,i}` for 0-based position `pos` (`i = pos + 1`).
    #[inline]
    fn ubm_cell(pos: usize, prev: usize) -> usize {
        pos * (pos + 1) / 2 + prev
    }

    pub fn initial(&self) -> Vec<f64> {
        let mut theta = vec![0.5; self.len()];
        if self.kind == ModelKind::Dbn {
            theta[0] = 0.9;
        }
        theta
    }

    /// Dense parameters from string-keyed tables (unseen pairs at their defaults).
    pub fn load(&self, params: &BaseParams, pairs: &[(String, String)]) -> Result<Vec<f64>> {
        if params.kind() != self.kind {
            return Err(Error::KindMismatch {
                expected: self.kind.to_string(),
                got: params.kind().to_string(),
            });
        }
        let mut theta = self.initial();
        let exam = self.exam();
        match params {
            BaseParams::Pbm(p) => {
                for (i, &g) in p.exam.iter().take(self.max_positions).enumerate() {
                    theta[exam.start + i] = g;
                }
            }
            BaseParams::Ubm(p) => {
                for (i, row) in p.beta.iter().take(self.max_positions).enumerate() {
                    for (l, &b) in row.iter().enumerate() {
                        theta[Self::ubm_cell(i, l)] = b;
                    }
                }
            }
            BaseParams::Dbn(p) => theta[exam.start] = p.gamma_cont,
            BaseParams::Cascade(_) => {}
        }
        let rel = self.rel().start;
        let sat = self.sat().start;
        for (k, (q, d)) in pairs.iter().enumerate() {
            theta[rel + k] = params.relevance_table().get(q, d);
            if let BaseParams::Dbn(p) = params {
                theta[sat + k] = p.sat.get(q, d);
            }
        }
        Ok(theta)
    }

    /// String-keyed parameters; only pairs flagged in `seen` enter the tables.
    pub fn materialize(&self, theta: &[f64], pairs: &[(String, String)], seen: &[bool]) -> BaseParams {
        let mut rel = RelevanceTable::new();
        let mut sat = RelevanceTable::new();
        let r0 = self.rel().start;
        let s0 = self.sat().start;
        for (k, (q, d)) in pairs.iter().enumerate() {
            if !seen[k] {
                continue;
            }
            rel.set(q.clone(), d.clone(), theta[r0 + k]);
            if self.kind == ModelKind::Dbn {
                sat.set(q.clone(), d.clone(), theta[s0 + k]);
            }
        }
        let n = self.max_positions;
        match self.kind {
            ModelKind::Pbm => BaseParams::Pbm(PbmParams {
                exam: theta[self.exam()].to_vec(),
                rel,
            }),
            ModelKind::Cascade => BaseParams::Cascade(CascadeParams { max_positions: n, rel }),
            ModelKind::Ubm => BaseParams::Ubm(UbmParams {
                beta: (0..n)
                    .map(|i| (0..=i).map(|l| theta[Self::ubm_cell(i, l)]).collect())
                    .collect(),
                rel,
            }),
            ModelKind::Dbn => BaseParams::Dbn(DbnParams {
                max_positions: n,
                rel,
                sat,
                gamma_cont: theta[0],
            }),
        }
    }

    /// Whether the session can be explained by the model at all.
    pub fn admits(&self, s: &CompiledSession) -> bool {
        self.kind != ModelKind::Cascade || s.num_clicks() <= 1
    }

    /// Adds the session's expected sufficient statistics to `stats` and
    /// returns its log-likelihood under `theta`.
    pub fn accumulate(&self, theta: &[f64], s: &CompiledSession, stats: &mut [Suff]) -> f64 {
        let p = match self.kind {
            ModelKind::Pbm => self.pbm(theta, s, stats),
            ModelKind::Cascade => self.cascade(theta, s, stats),
            ModelKind::Ubm => self.ubm(theta, s, stats),
            ModelKind::Dbn => self.dbn(theta, s, stats),
        };
        p.max(PROB_EPS).ln()
    }

    fn pbm(&self, theta: &[f64], s: &CompiledSession, stats: &mut [Suff]) -> f64 {
        let rel = self.rel().start;
        let mut p = 1.0;
        for (i, (&pair, &clicked)) in s.pairs.iter().zip(&s.clicks).enumerate() {
            let k = rel + pair as usize;
            let (g, r) = (theta[i], theta[k]);
            let (pe, pr) = pbm_posteriors(g, r, clicked);
            p *= if clicked { g * r } else { 1.0 - g * r };
            stats[i].add(pe, 1.0);
            stats[k].add(pr, 1.0);
        }
        p
    }

    fn ubm(&self, theta: &[f64], s: &CompiledSession, stats: &mut [Suff]) -> f64 {
        let rel = self.rel().start;
        let mut p = 1.0;
        let mut prev = 0;
        for (i, (&pair, &clicked)) in s.pairs.iter().zip(&s.clicks).enumerate() {
            let cell = Self::ubm_cell(i, prev);
            let k = rel + pair as usize;
            let (b, r) = (theta[cell], theta[k]);
            let (pe, pr) = pbm_posteriors(b, r, clicked);
            p *= if clicked { b * r } else { 1.0 - b * r };
            stats[cell].add(pe, 1.0);
            stats[k].add(pr, 1.0);
            if clicked {
                prev = i + 1;
            }
        }
        p
    }

    fn cascade(&self, theta: &[f64], s: &CompiledSession, stats: &mut [Suff]) -> f64 {
        let rel = self.rel().start;
        let mut p = 1.0;
        for (&pair, &clicked) in s.pairs.iter().zip(&s.clicks) {
            let k = rel + pair as usize;
            let r = theta[k];
            if clicked {
                stats[k].add(1.0, 1.0);
                return p * r;
            }
            stats[k].add(0.0, 1.0);
            p *= 1.0 - r;
        }
        p
    }

    /// Forward-backward over the binary examination chain.
    fn dbn(&self, theta: &[f64], s: &CompiledSession, stats: &mut [Suff]) -> f64 {
        let n = s.pairs.len();
        if n == 0 {
            return 1.0;
        }
        let gamma = theta[0];
        let rel = self.rel().start;
        let sat = self.sat().start;
        let r: Vec<f64> = s.pairs.iter().map(|&k| theta[rel + k as usize]).collect();
        let sv: Vec<f64> = s.pairs.iter().map(|&k| theta[sat + k as usize]).collect();
        let c = &s.clicks;
        // emission given examined / not examined, and P(E_{i+1} = 1 | E_i = 1, C_i)
        let em1: Vec<f64> = (0..n).map(|i| if c[i] { r[i] } else { 1.0 - r[i] }).collect();
        let em0: Vec<f64> = (0..n).map(|i| if c[i] { 0.0 } else { 1.0 }).collect();
        let cont: Vec<f64> = (0..n)
            .map(|i| if c[i] { (1.0 - sv[i]) * gamma } else { gamma })
            .collect();

        let mut f1 = vec![0.0; n];
        let mut f0 = vec![0.0; n];
        f1[0] = 1.0;
        for i in 0..n - 1 {
            f1[i + 1] = f1[i] * em1[i] * cont[i];
            f0[i + 1] = f0[i] * em0[i] + f1[i] * em1[i] * (1.0 - cont[i]);
        }
        let mut b1 = vec![1.0; n + 1];
        let mut b0 = vec![1.0; n + 1];
        for i in (0..n).rev() {
            b0[i] = em0[i] * b0[i + 1];
            b1[i] = em1[i] * (cont[i] * b1[i + 1] + (1.0 - cont[i]) * b0[i + 1]);
        }
        let z = b1[0];
        if z <= f64::MIN_POSITIVE {
            return z;
        }

        for i in 0..n {
            let k = s.pairs[i] as usize;
            let exam = f1[i] * b1[i] / z;
            stats[rel + k].add(f64::from(u8::from(c[i])), exam);
            if i + 1 < n {
                let mut moving = exam;
                if c[i] {
                    let satisfied = f1[i] * r[i] * sv[i] * b0[i + 1] / z;
                    stats[sat + k].add(satisfied, 1.0);
                    moving -= satisfied;
                }
                stats[0].add(f1[i + 1] * b1[i + 1] / z, moving);
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ClickModel, ModelParams};

    fn sessions() -> Vec<Session> {
        let raw: [(&str, &[bool], IntentLabel); 5] = [
            ("a", &[true, false, true, false], IntentLabel::Navigational),
            ("a", &[false, false, false, false], IntentLabel::Informational),
            ("b", &[false, true, false], IntentLabel::Unknown),
            ("b", &[true, false, false], IntentLabel::Navigational),
            ("a", &[false, false, false, true], IntentLabel::Transactional),
        ];
        raw.iter()
            .enumerate()
            .map(|(i, (q, c, intent))| Session {
                session_id: format!("s{i}"),
                query_id: q.to_string(),
                intent: *intent,
                docs: (0..c.len()).map(|j| format!("{q}{}", (j + i) % 4)).collect(),
                clicks: c.to_vec(),
            })
            .collect()
    }

    #[test]
    fn kernel_likelihood_matches_model() {
        let data = sessions();
        let ds = Dataset::compile(&data, 5).unwrap();
        for kind in ModelKind::ALL {
            let layout = Layout {
                kind,
                max_positions: 5,
                n_pairs: ds.pairs.len(),
            };
            let theta: Vec<f64> = (0..layout.len()).map(|k| 0.15 + 0.7 * ((k * 37 % 11) as f64 / 10.0)).collect();
            let params = ModelParams::Base(layout.materialize(&theta, &ds.pairs, &vec![true; ds.pairs.len()]));
            let mut stats = vec![Suff::default(); layout.len()];
            for (raw, cs) in data.iter().zip(&ds.sessions) {
                if !layout.admits(cs) {
                    continue;
                }
                let ll = layout.accumulate(&theta, cs, &mut stats);
                let want = params
                    .for_intent(raw.intent)
                    .session_prob(&raw.query_id, &raw.docs, &raw.clicks)
                    .unwrap()
                    .ln();
                assert!((ll - want).abs() < 1e-12, "{kind}");
            }
            for st in &stats {
                assert!(st.succ >= -1e-12 && st.succ <= st.trials + 1e-12, "{kind}: {st:?}");
            }
        }
    }

    #[test]
    fn load_inverts_materialize() {
        let data = sessions();
        let ds = Dataset::compile(&data, 5).unwrap();
        for kind in ModelKind::ALL {
            let layout = Layout {
                kind,
                max_positions: 5,
                n_pairs: ds.pairs.len(),
            };
            let theta: Vec<f64> = (0..layout.len()).map(|k| (k % 9) as f64 / 10.0 + 0.05).collect();
            let params = layout.materialize(&theta, &ds.pairs, &vec![true; ds.pairs.len()]);
            assert_eq!(layout.load(&params, &ds.pairs).unwrap(), theta);
        }
    }

    #[test]
    fn too_long_sessions_rejected() {
        assert!(matches!(Dataset::compile(&sessions(), 3), Err(Error::Range { .. })));
    }
}
