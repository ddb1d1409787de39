use serde::{Deserialize, Serialize};

use super::{check_probability, check_session_shape, ClickModel, ModelKind, RelevanceTable};
use crate::error::{Error, Result};

/// User browsing model.
///
/// Examination of position `i` depends on `i` and on the previous clicked
/// position `l` (0 when nothing above was clicked): `P(E_i = 1) = β_{l,i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UbmParams {
    /// `beta[i - 1][l]` for 1-based position `i` and `0 <= l < i`.
    pub beta: Vec<Vec<f64>>,
    pub rel: RelevanceTable,
}

impl UbmParams {
    pub fn uniform(max_positions: usize, value: f64) -> Self {
        UbmParams {
            beta: (1..=max_positions).map(|i| vec![value; i]).collect(),
            rel: RelevanceTable::new(),
        }
    }

    pub fn beta(&self, prev_click: usize, position: usize) -> Result<f64> {
        if position == 0 || position > self.beta.len() {
            return Err(Error::Range {
                position,
                max: self.beta.len(),
            });
        }
        if prev_click >= position {
            return Err(Error::Ordering {
                prev: prev_click,
                position,
            });
        }
        Ok(self.beta[position - 1][prev_click])
    }

    /// Click probability at `position` given the last click above it.
    pub fn click_prob(&self, query: &str, doc: &str, position: usize, prev_click: usize) -> Result<f64> {
        Ok(self.beta(prev_click, position)? * self.rel.get(query, doc))
    }
}

impl ClickModel for UbmParams {
    fn kind(&self) -> ModelKind {
        ModelKind::Ubm
    }

    fn max_positions(&self) -> usize {
        self.beta.len()
    }

    fn relevance(&self, query: &str, doc: &str) -> f64 {
        self.rel.get(query, doc)
    }

    fn session_prob(&self, query: &str, docs: &[String], clicks: &[bool]) -> Result<f64> {
        check_session_shape(docs, Some(clicks), self.beta.len())?;
        let mut p = 1.0;
        let mut prev = 0;
        for (i, (doc, &clicked)) in docs.iter().zip(clicks).enumerate() {
            let q = self.beta[i][prev] * self.rel.get(query, doc);
            if clicked {
                p *= q;
                prev = i + 1;
            } else {
                p *= 1.0 - q;
            }
        }
        Ok(p)
    }

    fn click_probs(&self, query: &str, docs: &[String]) -> Result<Vec<f64>> {
        check_session_shape(docs, None, self.beta.len())?;
        // last[l] = P(previous click at l) before the current position
        let mut last = vec![0.0; docs.len() + 1];
        last[0] = 1.0;
        let mut out = Vec::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            let r = self.rel.get(query, doc);
            let mut click = 0.0;
            for (l, mass) in last.iter_mut().enumerate().take(i + 1) {
                let q = *mass * self.beta[i][l] * r;
                click += q;
                *mass -= q;
            }
            last[i + 1] = click;
            out.push(click);
        }
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        for (i, row) in self.beta.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::UndefinedInput(format!(
                    "beta row for position {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    i + 1
                )));
            }
            for (l, &b) in row.iter().enumerate() {
                check_probability(b, &format!("beta[{l}, {}]", i + 1))?;
            }
        }
        self.rel.validate("rel")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_util::{all_click_vectors, docs};

    fn params() -> UbmParams {
        let mut p = UbmParams::uniform(5, 0.0);
        for (i, row) in p.beta.iter_mut().enumerate() {
            for (l, b) in row.iter_mut().enumerate() {
                *b = 0.9 - 0.1 * i as f64 + 0.05 * l as f64;
            }
        }
        p.rel.set("q", "d", 0.6);
        p
    }

    #[test]
    fn uses_transition_cell() {
        let p = params();
        assert_eq!(p.click_prob("q", "d", 1, 0).unwrap(), p.beta[0][0] * 0.6);
        assert_eq!(p.click_prob("q", "d", 4, 2).unwrap(), p.beta[3][2] * 0.6);
        assert!(matches!(
            p.click_prob("q", "d", 3, 3),
            Err(Error::Ordering { prev: 3, position: 3 })
        ));
        assert!(p.click_prob("q", "d", 6, 0).is_err());
    }

    #[test]
    fn irrelevant_documents_never_clicked() {
        let mut p = params();
        for d in docs(4) {
            p.rel.set("q", d, 0.0);
        }
        let zeros = vec![false; 4];
        assert_eq!(p.session_prob("q", &docs(4), &zeros).unwrap(), 1.0);
        for c in all_click_vectors(4).filter(|c| c.iter().any(|&x| x)) {
            assert_eq!(p.session_prob("q", &docs(4), &c).unwrap(), 0.0);
        }
    }
}
