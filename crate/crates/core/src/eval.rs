//! Click perplexity, perplexity improvement and NDCG.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::intent::IntentLabel;
use crate::log_store::{format_session, Judgments, Session};
use crate::models::{clamp_prob, ModelParams, RelevanceTable};

pub const DEFAULT_K_LIST: [usize; 5] = [1, 3, 5, 7, 10];

/// `2^(-mean log2-likelihood)` of the clicks at one position.
pub fn position_perplexity(predictions: &[f64], clicks: &[bool]) -> Result<f64> {
    if predictions.len() != clicks.len() {
        return Err(Error::Shape {
            expected: predictions.len(),
            got: clicks.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::UndefinedInput("perplexity of an empty session set".into()));
    }
    let total: f64 = predictions
        .iter()
        .zip(clicks)
        .map(|(&q, &c)| {
            let q = clamp_prob(q);
            if c {
                q.log2()
            } else {
                (1.0 - q).log2()
            }
        })
        .sum();
    Ok((-total / predictions.len() as f64).exp2())
}

/// Percentage improvement of perplexity `p1` over the baseline `p2`.
pub fn perplexity_improvement(p1: f64, p2: f64) -> Result<f64> {
    if p2.is_nan() || p2 <= 1.0 {
        return Err(Error::DegenerateBaseline(p2));
    }
    Ok((p2 - p1) / (p2 - 1.0) * 100.0)
}

fn dcg(grades: &[u8], k: usize) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| (2f64.powi(g as i32) - 1.0) / (i as f64 + 2.0).log2())
        .sum()
}

/// NDCG@K of a served grade sequence. `None` when every grade is 0.
pub fn ndcg_at_k(ranked: &[u8], ideal: &[u8], k: usize) -> Result<Option<f64>> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let mut a = ranked.to_vec();
    let mut b = ideal.to_vec();
    a.sort_unstable_by(|x, y| y.cmp(x));
    b.sort_unstable_by(|x, y| y.cmp(x));
    if a != b {
        return Err(Error::Judgment("ranked and ideal grades are different multisets".into()));
    }
    if a.iter().all(|&g| g == 0) {
        return Ok(None);
    }
    Ok(Some(dcg(ranked, k) / dcg(&a, k)))
}

/// Orders `docs` by descending score, then ascending id.
pub fn rank_by_scores(scores: &RelevanceTable, query: &str, docs: &[String]) -> Result<Vec<String>> {
    if docs.is_empty() {
        return Err(Error::UndefinedInput(format!("no candidate documents for query `{query}`")));
    }
    let mut ranked: Vec<(f64, &String)> = docs.iter().map(|d| (scores.get(query, d), d)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(ranked.into_iter().map(|(_, d)| d.clone()).collect())
}

/// Orders `docs` by the estimated relevance of the table for `intent`.
pub fn rank_by_relevance(params: &ModelParams, query: &str, intent: IntentLabel, docs: &[String]) -> Result<Vec<String>> {
    rank_by_scores(params.for_intent(intent).relevance_table(), query, docs)
}

/// Click-through rate of every shown (query, document) pair.
pub fn ctr_table(sessions: &[Session]) -> RelevanceTable {
    let mut counts: BTreeMap<(&str, &str), (usize, usize)> = BTreeMap::new();
    for s in sessions {
        for (d, &c) in s.docs.iter().zip(&s.clicks) {
            let e = counts.entry((&s.query_id, d)).or_default();
            e.0 += c as usize;
            e.1 += 1;
        }
    }
    let mut table = RelevanceTable::new();
    for ((q, d), (clicks, shown)) in counts {
        table.set(q, d, clicks as f64 / shown as f64);
    }
    table
}

/// Order-independent SHA-256 of a session set.
pub fn session_digest(sessions: &[Session]) -> String {
    let mut lines: Vec<String> = sessions.par_iter().map(format_session).collect();
    lines.par_sort_unstable();
    let mut hasher = Sha256::new();
    for line in &lines {
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Average NDCG@K over judged queries, ranking each query's judged documents
/// with `scores_for(intent)`. A query seen under several intents scores the
/// session-weighted mean of its per-intent rankings.
pub fn mean_ndcg<'a, F>(
    sessions: &[Session],
    judgments: &Judgments,
    k_list: &[usize],
    scores_for: F,
) -> Result<NdcgSummary>
where
    F: Fn(IntentLabel) -> &'a RelevanceTable,
{
    let mut per_query: BTreeMap<&str, BTreeMap<IntentLabel, usize>> = BTreeMap::new();
    for s in sessions {
        *per_query.entry(&s.query_id).or_default().entry(s.intent).or_default() += 1;
    }
    let mut sums = vec![0.0; k_list.len()];
    let mut judged = 0;
    let mut undefined = 0;
    for (query, intents) in &per_query {
        let Some(grades) = judgments.for_query(query) else { continue };
        let docs: Vec<String> = grades.keys().cloned().collect();
        let ideal: Vec<u8> = grades.values().copied().collect();
        let total: usize = intents.values().sum();
        let mut values = vec![0.0; k_list.len()];
        let mut defined = true;
        for (&intent, &n) in intents {
            let ranked = rank_by_scores(scores_for(intent), query, &docs)?;
            let served: Vec<u8> = ranked.iter().map(|d| grades[d]).collect();
            for (v, &k) in values.iter_mut().zip(k_list) {
                match ndcg_at_k(&served, &ideal, k)? {
                    Some(x) => *v += x * n as f64 / total as f64,
                    None => defined = false,
                }
            }
        }
        if defined {
            judged += 1;
            sums.iter_mut().zip(&values).for_each(|(s, v)| *s += v);
        } else {
            undefined += 1;
        }
    }
    let ndcg = k_list
        .iter()
        .zip(&sums)
        .map(|(&k, &s)| (k, if judged > 0 { s / judged as f64 } else { f64::NAN }))
        .collect();
    Ok(NdcgSummary {
        ndcg,
        judged_queries: judged,
        undefined_queries: undefined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdcgSummary {
    pub ndcg: BTreeMap<usize, f64>,
    pub judged_queries: usize,
    /// Queries whose judged documents all have grade 0.
    pub undefined_queries: usize,
}

impl NdcgSummary {
    pub fn average(&self) -> f64 {
        self.ndcg.values().sum::<f64>() / self.ndcg.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    /// Perplexity at positions 1..N.
    pub position_perplexity: Vec<f64>,
    /// Sessions contributing to each position.
    pub position_sessions: Vec<usize>,
    pub overall_perplexity: f64,
    pub k_list: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ndcg: Option<NdcgSummary>,
    pub num_sessions: usize,
    pub num_queries: usize,
    pub session_digest: String,
}

/// Perplexity of `params` on `sessions`, plus NDCG when judgments are given.
pub fn evaluate(
    label: &str,
    params: &ModelParams,
    sessions: &[Session],
    judgments: Option<&Judgments>,
    k_list: &[usize],
) -> Result<EvalReport> {
    if sessions.is_empty() {
        return Err(Error::UndefinedInput("no sessions to evaluate".into()));
    }
    if k_list.contains(&0) {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let predictions: Vec<Vec<f64>> = sessions
        .par_iter()
        .map(|s| params.click_probs(s))
        .collect::<Result<_>>()?;
    let depth = sessions.iter().map(Session::len).max().unwrap_or(0);
    let mut position_perplexity = Vec::with_capacity(depth);
    let mut position_sessions = Vec::with_capacity(depth);
    for j in 0..depth {
        let (q, c): (Vec<f64>, Vec<bool>) = sessions
            .iter()
            .zip(&predictions)
            .filter(|(s, _)| s.len() > j)
            .map(|(s, p)| (p[j], s.clicks[j]))
            .unzip();
        position_sessions.push(q.len());
        position_perplexity.push(position_perplexity_or_skip(&q, &c)?);
    }
    let defined: Vec<f64> = position_perplexity.iter().copied().filter(|p| p.is_finite()).collect();
    let overall_perplexity = defined.iter().sum::<f64>() / defined.len() as f64;
    let ndcg = judgments
        .map(|j| mean_ndcg(sessions, j, k_list, |t| params.for_intent(t).relevance_table()))
        .transpose()?;
    let num_queries = sessions
        .iter()
        .map(|s| s.query_id.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    Ok(EvalReport {
        label: label.to_string(),
        position_perplexity,
        position_sessions,
        overall_perplexity,
        k_list: k_list.to_vec(),
        ndcg,
        num_sessions: sessions.len(),
        num_queries,
        session_digest: session_digest(sessions),
    })
}

fn position_perplexity_or_skip(q: &[f64], c: &[bool]) -> Result<f64> {
    if q.is_empty() {
        return Ok(f64::NAN);
    }
    position_perplexity(q, c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: EvalReport,
    pub treatment: EvalReport,
    /// Improvement of the treatment over the baseline at each position, in percent.
    pub position_improvement: Vec<f64>,
    pub overall_improvement: f64,
    /// Treatment minus baseline NDCG per K.
    pub ndcg_delta: BTreeMap<usize, f64>,
}

/// Side-by-side comparison of two reports on the same sessions.
pub fn compare_models(baseline: &EvalReport, treatment: &EvalReport) -> Result<Comparison> {
    if baseline.session_digest != treatment.session_digest {
        return Err(Error::Comparability("reports were computed on different session sets".into()));
    }
    if baseline.k_list != treatment.k_list {
        return Err(Error::Comparability("reports use different K lists".into()));
    }
    let position_improvement = baseline
        .position_perplexity
        .iter()
        .zip(&treatment.position_perplexity)
        .map(|(&p2, &p1)| perplexity_improvement(p1, p2))
        .collect::<Result<_>>()?;
    let overall_improvement = perplexity_improvement(treatment.overall_perplexity, baseline.overall_perplexity)?;
    let ndcg_delta = match (&baseline.ndcg, &treatment.ndcg) {
        (Some(b), Some(t)) => b.ndcg.iter().map(|(&k, &v)| (k, t.ndcg[&k] - v)).collect(),
        (None, None) => BTreeMap::new(),
        _ => return Err(Error::Comparability("only one report has NDCG".into())),
    };
    Ok(Comparison {
        baseline: baseline.clone(),
        treatment: treatment.clone(),
        position_improvement,
        overall_improvement,
        ndcg_delta,
    })
}

impl Comparison {
    /// Aligned text: one row per model, columns @1..@N, Overall and Impr.
    pub fn to_table(&self) -> String {
        let n = self.baseline.position_perplexity.len();
        let width = self
            .baseline
            .label
            .len()
            .max(self.treatment.label.len())
            .max("Impr.".len());
        let mut out = format!("{:<width$}", "Model");
        for j in 1..=n {
            let _ = write!(out, " {:>7}", format!("@{j}"));
        }
        let _ = writeln!(out, " {:>7} {:>7}", "Overall", "Impr.");
        for (report, impr) in [(&self.baseline, None), (&self.treatment, Some(self.overall_improvement))] {
            let _ = write!(out, "{:<width$}", report.label);
            for p in &report.position_perplexity {
                let _ = write!(out, " {p:>7.3}");
            }
            let _ = write!(out, " {:>7.3}", report.overall_perplexity);
            match impr {
                Some(i) => {
                    let _ = writeln!(out, " {:>6.1}%", i);
                }
                None => {
                    let _ = writeln!(out, " {:>7}", "-");
                }
            }
        }
        let _ = write!(out, "{:<width$}", "Impr.");
        for i in &self.position_improvement {
            let _ = write!(out, " {:>6.1}%", i);
        }
        let _ = writeln!(out, " {:>6.1}%", self.overall_improvement);
        if !self.ndcg_delta.is_empty() {
            let (b, t) = (self.baseline.ndcg.as_ref().unwrap(), self.treatment.ndcg.as_ref().unwrap());
            let _ = writeln!(out);
            let _ = writeln!(out, "{:<8} {:>9} {:>9} {:>9}", "NDCG", "baseline", "treatment", "delta");
            for (k, d) in &self.ndcg_delta {
                let _ = writeln!(out, "{:<8} {:>9.4} {:>9.4} {:>+9.4}", format!("@{k}"), b.ndcg[k], t.ndcg[k], d);
            }
        }
        out
    }
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("{} ({} sessions, {} queries)\n", self.label, self.num_sessions, self.num_queries);
        for (j, (p, n)) in self.position_perplexity.iter().zip(&self.position_sessions).enumerate() {
            let _ = writeln!(out, "  @{:<3} {p:.4}  ({n} sessions)", j + 1);
        }
        let _ = writeln!(out, "  overall {:.4}", self.overall_perplexity);
        if let Some(ndcg) = &self.ndcg {
            for (k, v) in &ndcg.ndcg {
                let _ = writeln!(out, "  NDCG@{k} {v:.4}");
            }
            let _ = writeln!(
                out,
                "  judged queries {} (excluded all-zero: {})",
                ndcg.judged_queries, ndcg.undefined_queries
            );
        }
        out
    }
}

/// Per-(query, position) predicted click probability averaged over sessions.
pub fn mean_click_probs(params: &ModelParams, sessions: &[Session]) -> Result<HashMap<(String, usize), f64>> {
    let mut sums: HashMap<(String, usize), (f64, usize)> = HashMap::new();
    for s in sessions {
        for (j, p) in params.click_probs(s)?.into_iter().enumerate() {
            let e = sums.entry((s.query_id.clone(), j)).or_default();
            e.0 += p;
            e.1 += 1;
        }
    }
    Ok(sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log_store::RelevanceJudgment;
    use crate::models::{BaseParams, IntentAwareParams, PbmParams};
    use proptest::prelude::*;

    #[test]
    fn perplexity_examples() {
        assert_eq!(position_perplexity(&[0.5; 7], &[true, false, true, true, false, false, true]).unwrap(), 2.0);
        assert_eq!(position_perplexity(&[0.25], &[true]).unwrap(), 4.0);
        let eps = 1e-9;
        let p = position_perplexity(&[1.0 - eps, eps, eps], &[true, false, false]).unwrap();
        assert!((p - 1.0).abs() < 1e-6);
        assert!(matches!(position_perplexity(&[], &[]), Err(Error::UndefinedInput(_))));
    }

    #[test]
    fn improvement_examples() {
        assert!((perplexity_improvement(1.255, 1.268).unwrap() - 4.85).abs() < 0.01);
        assert!((perplexity_improvement(1.089, 1.107).unwrap() - 16.8).abs() < 0.05);
        assert_eq!(perplexity_improvement(1.3, 1.3).unwrap(), 0.0);
        assert!(matches!(perplexity_improvement(1.0, 1.0), Err(Error::DegenerateBaseline(_))));
    }

    /// Brute-force DCG over every ordering of the grades.
    fn brute_ideal(grades: &[u8], k: usize) -> f64 {
        fn perms(v: &[u8]) -> Vec<Vec<u8>> {
            if v.len() <= 1 {
                return vec![v.to_vec()];
            }
            let mut out = Vec::new();
            for i in 0..v.len() {
                let mut rest = v.to_vec();
                let x = rest.remove(i);
                for mut p in perms(&rest) {
                    p.insert(0, x);
                    out.push(p);
                }
            }
            out
        }
        perms(grades).iter().map(|p| dcg(p, k)).fold(0.0, f64::max)
    }

    #[test]
    fn ndcg_examples() {
        let v = ndcg_at_k(&[0, 1], &[1, 0], 2).unwrap().unwrap();
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-12);
        assert!((v - 0.6309).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&[3, 2, 2, 0], &[3, 2, 2, 0], 3).unwrap(), Some(1.0));
        assert_eq!(ndcg_at_k(&[0, 0], &[0, 0], 1).unwrap(), None);
        assert!(matches!(ndcg_at_k(&[1, 2], &[1, 1], 2), Err(Error::Judgment(_))));
    }

    proptest! {
        #[test]
        fn ndcg_matches_brute_force(grades in prop::collection::vec(0u8..=4, 1..6), k in 1usize..7) {
            let mut ideal = grades.clone();
            ideal.sort_unstable_by(|a, b| b.cmp(a));
            match ndcg_at_k(&grades, &ideal, k).unwrap() {
                None => prop_assert!(grades.iter().all(|&g| g == 0)),
                Some(v) => {
                    let expected = dcg(&grades, k) / brute_ideal(&grades, k);
                    prop_assert!((v - expected).abs() < 1e-12);
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
                }
            }
        }

        #[test]
        fn ndcg_is_log_base_invariant(grades in prop::collection::vec(0u8..=4, 1..8), k in 1usize..9, base in 1.5f64..20.0) {
            let ideal = { let mut g = grades.clone(); g.sort_unstable_by(|a, b| b.cmp(a)); g };
            let dcg_base = |g: &[u8]| -> f64 {
                g.iter().take(k).enumerate().map(|(i, &x)| (2f64.powi(x as i32) - 1.0) / (i as f64 + 2.0).log(base)).sum()
            };
            if let Some(v) = ndcg_at_k(&grades, &ideal, k).unwrap() {
                prop_assert!((v - dcg_base(&grades) / dcg_base(&ideal)).abs() < 1e-12);
            }
        }

        #[test]
        fn perplexity_at_least_one(qs in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..50)) {
            let (q, c): (Vec<f64>, Vec<bool>) = qs.into_iter().unzip();
            prop_assert!(position_perplexity(&q, &c).unwrap() >= 1.0);
        }

        #[test]
        fn improvement_sign(p1 in 1.0f64..3.0, p2 in 1.001f64..3.0) {
            let i = perplexity_improvement(p1, p2).unwrap();
            prop_assert_eq!(i > 0.0, p1 < p2);
            prop_assert_eq!(i < 0.0, p1 > p2);
        }
    }

    #[test]
    fn ndcg_ignores_ties_beyond_k() {
        let a = ndcg_at_k(&[4, 2, 1, 1, 0], &[4, 2, 1, 1, 0], 2).unwrap();
        let b = ndcg_at_k(&[4, 2, 0, 1, 1], &[4, 2, 1, 1, 0], 2).unwrap();
        assert_eq!(a, b);
    }

    fn docs(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ranking_examples() {
        let mut t = RelevanceTable::new();
        t.set("q", "a", 0.9);
        t.set("q", "b", 0.1);
        t.set("q", "c", 0.5);
        assert_eq!(rank_by_scores(&t, "q", &docs(&["a", "b", "c"])).unwrap(), docs(&["a", "c", "b"]));
        let flat = RelevanceTable::new();
        assert_eq!(rank_by_scores(&flat, "q", &docs(&["c", "a", "b"])).unwrap(), docs(&["a", "b", "c"]));
        assert!(matches!(rank_by_scores(&t, "q", &[]), Err(Error::UndefinedInput(_))));
    }

    #[test]
    fn intents_rank_independently() {
        let mut inf = PbmParams::uniform(2, 1.0);
        inf.rel.set("q", "a", 0.9);
        inf.rel.set("q", "b", 0.2);
        let mut nav = inf.clone();
        nav.rel.set("q", "b", 0.95);
        let mut ia = IntentAwareParams::replicated(BaseParams::Pbm(inf));
        ia.navigational = BaseParams::Pbm(nav);
        let params = ModelParams::IntentAware(Box::new(ia));
        let d = docs(&["a", "b"]);
        assert_eq!(rank_by_relevance(&params, "q", IntentLabel::Informational, &d).unwrap(), docs(&["a", "b"]));
        assert_eq!(rank_by_relevance(&params, "q", IntentLabel::Navigational, &d).unwrap(), docs(&["b", "a"]));
    }

    fn fixture() -> (ModelParams, Vec<Session>, Judgments) {
        let mut p = PbmParams::uniform(3, 0.5);
        let mut j = Judgments::new();
        for (d, g) in [("a", 3u8), ("b", 1), ("c", 0)] {
            p.rel.set("q", d, 1.0);
            j.insert(RelevanceJudgment {
                query_id: "q".into(),
                doc_id: d.into(),
                grade: g,
            })
            .unwrap();
        }
        for d in ["x", "y", "z"] {
            p.rel.set("zero", d, 1.0);
            j.insert(RelevanceJudgment {
                query_id: "zero".into(),
                doc_id: d.into(),
                grade: 0,
            })
            .unwrap();
        }
        let sessions: Vec<Session> = (0..10)
            .map(|i| Session {
                session_id: format!("s{i}"),
                query_id: if i % 2 == 0 { "q".into() } else { "zero".into() },
                intent: IntentLabel::Unknown,
                docs: if i % 2 == 0 { docs(&["c", "b", "a"]) } else { docs(&["x", "y"]) },
                clicks: if i % 2 == 0 { vec![i % 4 == 0, false, true] } else { vec![false, true] },
            })
            .collect();
        (ModelParams::Base(BaseParams::Pbm(p)), sessions, j)
    }

    #[test]
    fn coin_flip_model_scores_two_everywhere() {
        let (params, sessions, judgments) = fixture();
        let report = evaluate("pbm", &params, &sessions, Some(&judgments), &DEFAULT_K_LIST).unwrap();
        assert_eq!(report.position_perplexity, vec![2.0, 2.0, 2.0]);
        assert_eq!(report.position_sessions, vec![10, 10, 5]);
        assert_eq!(report.overall_perplexity, 2.0);
        let ndcg = report.ndcg.unwrap();
        assert_eq!(ndcg.judged_queries, 1);
        assert_eq!(ndcg.undefined_queries, 1);
        for v in ndcg.ndcg.values() {
            assert_eq!(*v, 1.0);
        }
    }

    #[test]
    fn comparison_of_identical_reports() {
        let (params, sessions, judgments) = fixture();
        let report = evaluate("pbm", &params, &sessions, Some(&judgments), &[1, 3]).unwrap();
        let cmp = compare_models(&report, &report).unwrap();
        assert!(cmp.position_improvement.iter().all(|&i| i == 0.0));
        assert_eq!(cmp.overall_improvement, 0.0);
        assert!(cmp.ndcg_delta.values().all(|&d| d == 0.0));
        let table = cmp.to_table();
        assert!(table.contains("Overall") && table.contains("@3"));
    }

    #[test]
    fn comparison_detects_different_session_sets() {
        let (params, sessions, _) = fixture();
        let a = evaluate("a", &params, &sessions, None, &[1]).unwrap();
        let b = evaluate("b", &params, &sessions[1..], None, &[1]).unwrap();
        assert!(matches!(compare_models(&a, &b), Err(Error::Comparability(_))));
        let mut reversed = sessions.clone();
        reversed.reverse();
        let c = evaluate("c", &params, &reversed, None, &[1]).unwrap();
        assert!(compare_models(&a, &c).is_ok());
    }

    #[test]
    fn better_treatment_improves_every_cell() {
        let (_, sessions, _) = fixture();
        let mut good = PbmParams::uniform(3, 1.0);
        for s in &sessions {
            for (d, &c) in s.docs.iter().zip(&s.clicks) {
                good.rel.set(s.query_id.clone(), d.clone(), if c { 0.9 } else { 0.1 });
            }
        }
        let coin = PbmParams {
            exam: vec![0.5; 3],
            rel: {
                let mut t = RelevanceTable::new();
                for s in &sessions {
                    for d in &s.docs {
                        t.set(s.query_id.clone(), d.clone(), 1.0);
                    }
                }
                t
            },
        };
        let base = evaluate("base", &ModelParams::Base(BaseParams::Pbm(coin)), &sessions, None, &[1]).unwrap();
        let treat = evaluate("treat", &ModelParams::Base(BaseParams::Pbm(good)), &sessions, None, &[1]).unwrap();
        let cmp = compare_models(&base, &treat).unwrap();
        assert!(cmp.position_improvement.iter().all(|&i| i > 0.0), "{:?}", cmp.position_improvement);
        assert!(cmp.overall_improvement > 0.0);
    }

    #[test]
    fn ctr_counts_impressions() {
        let (_, sessions, _) = fixture();
        let t = ctr_table(&sessions);
        assert_eq!(t.get("q", "a"), 1.0);
        assert_eq!(t.get("q", "c"), 0.6);
        assert_eq!(t.get("zero", "y"), 1.0);
    }
}
