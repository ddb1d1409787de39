use serde::{Deserialize, Serialize};

use super::{check_session_shape, ClickModel, ModelKind, RelevanceTable};
use crate::error::{Error, Result};

/// Cascade model: results are read top-down until the first click.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    pub max_positions: usize,
    pub rel: RelevanceTable,
}

impl CascadeParams {
    pub fn new(max_positions: usize) -> Self {
        CascadeParams {
            max_positions,
            rel: RelevanceTable::new(),
        }
    }
}

impl ClickModel for CascadeParams {
    fn kind(&self) -> ModelKind {
        ModelKind::Cascade
    }

    fn max_positions(&self) -> usize {
        self.max_positions
    }

    fn relevance(&self, query: &str, doc: &str) -> f64 {
        self.rel.get(query, doc)
    }

    /// Fails with a structure error on multi-click sessions, which the
    /// cascade cannot produce.
    fn session_prob(&self, query: &str, docs: &[String], clicks: &[bool]) -> Result<f64> {
        check_session_shape(docs, Some(clicks), self.max_positions)?;
        let n_clicks = clicks.iter().filter(|&&c| c).count();
        if n_clicks > 1 {
            return Err(Error::Structure(format!(
                "cascade sessions have at most one click, found {n_clicks}"
            )));
        }
        let mut p = 1.0;
        for (doc, &clicked) in docs.iter().zip(clicks) {
            let r = self.rel.get(query, doc);
            if clicked {
                return Ok(p * r);
            }
            p *= 1.0 - r;
        }
        Ok(p)
    }

    fn click_probs(&self, query: &str, docs: &[String]) -> Result<Vec<f64>> {
        check_session_shape(docs, None, self.max_positions)?;
        let mut reach = 1.0;
        Ok(docs
            .iter()
            .map(|doc| {
                let r = self.rel.get(query, doc);
                let p = reach * r;
                reach *= 1.0 - r;
                p
            })
            .collect())
    }

    fn validate(&self) -> Result<()> {
        self.rel.validate("rel")
    }
}
