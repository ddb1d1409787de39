use serde::{Deserialize, Serialize};

use super::{check_probability, check_session_shape, ClickModel, ModelKind, RelevanceTable};
use crate::error::Result;

/// Dynamic Bayesian network model.
///
/// The first result is always examined. An examined result is clicked with
/// probability `r`; a click satisfies the user with probability `s`, which
/// ends the session. An unsatisfied user moves to the next result with
/// probability `gamma_cont`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbnParams {
    pub max_positions: usize,
    pub rel: RelevanceTable,
    pub sat: RelevanceTable,
    pub gamma_cont: f64,
}

impl DbnParams {
    pub fn new(max_positions: usize, gamma_cont: f64) -> Self {
        DbnParams {
            max_positions,
            rel: RelevanceTable::new(),
            sat: RelevanceTable::new(),
            gamma_cont,
        }
    }

    pub fn satisfaction(&self, query: &str, doc: &str) -> f64 {
        self.sat.get(query, doc)
    }
}

/// Probability of a click vector by forward recursion over the examination
/// state. `rel[i]`, `sat[i]` are the parameters of the document at position `i`.
pub(crate) fn forward(rel: &[f64], sat: &[f64], gamma: f64, clicks: &[bool]) -> f64 {
    let (mut exam, mut skip) = (1.0, 0.0); // P(prefix, E_i = 1), P(prefix, E_i = 0)
    for i in 0..clicks.len() {
        let (r, s) = (rel[i], sat[i]);
        if clicks[i] {
            exam *= r;
            let cont = (1.0 - s) * gamma;
            (exam, skip) = (exam * cont, exam * (1.0 - cont));
        } else {
            let e = exam * (1.0 - r);
            (exam, skip) = (e * gamma, skip + e * (1.0 - gamma));
        }
    }
    exam + skip
}

impl ClickModel for DbnParams {
    fn kind(&self) -> ModelKind {
        ModelKind::Dbn
    }

    fn max_positions(&self) -> usize {
        self.max_positions
    }

    fn relevance(&self, query: &str, doc: &str) -> f64 {
        self.rel.get(query, doc)
    }

    fn session_prob(&self, query: &str, docs: &[String], clicks: &[bool]) -> Result<f64> {
        check_session_shape(docs, Some(clicks), self.max_positions)?;
        let rel: Vec<f64> = docs.iter().map(|d| self.rel.get(query, d)).collect();
        let sat: Vec<f64> = docs.iter().map(|d| self.sat.get(query, d)).collect();
        Ok(forward(&rel, &sat, self.gamma_cont, clicks))
    }

    fn click_probs(&self, query: &str, docs: &[String]) -> Result<Vec<f64>> {
        check_session_shape(docs, None, self.max_positions)?;
        let mut exam = 1.0;
        Ok(docs
            .iter()
            .map(|doc| {
                let r = self.rel.get(query, doc);
                let p = exam * r;
                exam *= self.gamma_cont * (1.0 - r * self.sat.get(query, doc));
                p
            })
            .collect())
    }

    fn validate(&self) -> Result<()> {
        check_probability(self.gamma_cont, "gamma_cont")?;
        self.rel.validate("rel")?;
        self.sat.validate("sat")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_util::{all_click_vectors, docs};

    /// Brute-force the generative process over every hidden trajectory.
    fn oracle(rel: &[f64], sat: &[f64], gamma: f64, clicks: &[bool]) -> f64 {
        fn walk(i: usize, examined: bool, rel: &[f64], sat: &[f64], g: f64, c: &[bool]) -> f64 {
            if i == c.len() {
                return 1.0;
            }
            if !examined {
                return if c[i] { 0.0 } else { walk(i + 1, false, rel, sat, g, c) };
            }
            if c[i] {
                rel[i]
                    * (sat[i] * walk(i + 1, false, rel, sat, g, c)
                        + (1.0 - sat[i])
                            * (g * walk(i + 1, true, rel, sat, g, c)
                                + (1.0 - g) * walk(i + 1, false, rel, sat, g, c)))
            } else {
                (1.0 - rel[i])
                    * (g * walk(i + 1, true, rel, sat, g, c) + (1.0 - g) * walk(i + 1, false, rel, sat, g, c))
            }
        }
        walk(0, true, rel, sat, gamma, clicks)
    }

    #[test]
    fn forward_matches_enumeration() {
        let rel = [0.3, 0.75, 0.5];
        let sat = [0.6, 0.2, 0.9];
        let gamma = 0.85;
        let mut total = 0.0;
        for c in all_click_vectors(3) {
            let f = forward(&rel, &sat, gamma, &c);
            assert!((f - oracle(&rel, &sat, gamma, &c)).abs() < 1e-15);
            total += f;
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn certain_click_then_satisfaction() {
        let mut p = DbnParams::new(3, 0.5);
        p.rel.set("q", "d0", 1.0);
        p.sat.set("q", "d0", 1.0);
        assert_eq!(p.session_prob("q", &docs(3), &[true, false, false]).unwrap(), 1.0);
    }

    #[test]
    fn no_continuation_blocks_lower_clicks() {
        let p = DbnParams::new(4, 0.0);
        for c in all_click_vectors(4).filter(|c| c[1..].iter().any(|&x| x)) {
            assert_eq!(p.session_prob("q", &docs(4), &c).unwrap(), 0.0);
        }
    }
}
