use serde::{Deserialize, Serialize};

use super::{check_probability, check_session_shape, ClickModel, ModelKind, RelevanceTable};
use crate::error::{Error, Result};

/// Position-based model: `P(C_i = 1) = γ_i · r(q, d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbmParams {
    /// Examination probability per position; index 0 is position 1.
    pub exam: Vec<f64>,
    pub rel: RelevanceTable,
}

impl PbmParams {
    pub fn uniform(max_positions: usize, gamma: f64) -> Self {
        PbmParams {
            exam: vec![gamma; max_positions],
            rel: RelevanceTable::new(),
        }
    }

    /// Click probability of `doc` shown at 1-based `position`.
    pub fn click_prob(&self, query: &str, doc: &str, position: usize) -> Result<f64> {
        if position == 0 || position > self.exam.len() {
            return Err(Error::Range {
                position,
                max: self.exam.len(),
            });
        }
        Ok(self.exam[position - 1] * self.rel.get(query, doc))
    }
}

impl ClickModel for PbmParams {
    fn kind(&self) -> ModelKind {
        ModelKind::Pbm
    }

    fn max_positions(&self) -> usize {
        self.exam.len()
    }

    fn relevance(&self, query: &str, doc: &str) -> f64 {
        self.rel.get(query, doc)
    }

    fn session_prob(&self, query: &str, docs: &[String], clicks: &[bool]) -> Result<f64> {
        check_session_shape(docs, Some(clicks), self.exam.len())?;
        let mut p = 1.0;
        for (i, (doc, &clicked)) in docs.iter().zip(clicks).enumerate() {
            let q = self.exam[i] * self.rel.get(query, doc);
            p *= if clicked { q } else { 1.0 - q };
        }
        Ok(p)
    }

    fn click_probs(&self, query: &str, docs: &[String]) -> Result<Vec<f64>> {
        check_session_shape(docs, None, self.exam.len())?;
        Ok(docs
            .iter()
            .zip(&self.exam)
            .map(|(doc, gamma)| gamma * self.rel.get(query, doc))
            .collect())
    }

    fn validate(&self) -> Result<()> {
        for (i, &g) in self.exam.iter().enumerate() {
            check_probability(g, &format!("exam[{}]", i + 1))?;
        }
        self.rel.validate("rel")
    }
}
