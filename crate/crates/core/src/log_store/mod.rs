//! Raw log ingestion and the toolkit's canonical on-disk formats.
//!
//! AOL-style query logs are parsed line by line into [`LogEvent`]s, grouped
//! into per-query impressions by [`sessionize`], and persisted as line-delimited
//! JSON [`Session`] records. Editorial judgments live in a three-column TSV.

mod aol;
mod io;
mod sessionize;

pub use aol::{normalize_query, parse_aol_line, read_aol_file, AolRead};
pub use io::{
    format_session, parse_session, read_judgments, read_sessions, write_judgments,
    write_sessions, Judgments,
};
pub use sessionize::{placeholder_doc_id, sessionize, SessionizeConfig, Sessionized};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::IntentLabel;

/// Default number of result positions tracked per session.
pub const DEFAULT_MAX_POSITIONS: usize = 10;

/// One line of a raw query log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEvent {
    pub user_id: String,
    pub query: String,
    /// Seconds since the Unix epoch.
    pub query_time: i64,
    pub click: Option<Click>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Click {
    /// 1-based result position.
    pub item_rank: usize,
    pub url: String,
}

/// A single query impression: the ranked documents and which were clicked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "io::SessionRecord", into = "io::SessionRecord")]
pub struct Session {
    pub session_id: String,
    pub query_id: String,
    pub intent: IntentLabel,
    pub docs: Vec<String>,
    pub clicks: Vec<bool>,
}

impl Session {
    /// Builds a session, checking the length and uniqueness invariants.
    pub fn new(
        session_id: impl Into<String>,
        query_id: impl Into<String>,
        intent: IntentLabel,
        docs: Vec<String>,
        clicks: Vec<bool>,
    ) -> Result<Self> {
        let session = Session {
            session_id: session_id.into(),
            query_id: query_id.into(),
            intent,
            docs,
            clicks,
        };
        session.validate()?;
        Ok(session)
    }

    pub fn validate(&self) -> Result<()> {
        if self.docs.len() != self.clicks.len() {
            return Err(Error::UndefinedInput(format!(
                "session {}: {} docs but {} click flags",
                self.session_id,
                self.docs.len(),
                self.clicks.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(self.docs.len());
        for doc in &self.docs {
            if !seen.insert(doc.as_str()) {
                return Err(Error::UndefinedInput(format!(
                    "session {}: duplicate document `{doc}`",
                    self.session_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn num_clicks(&self) -> usize {
        self.clicks.iter().filter(|&&c| c).count()
    }

    /// 1-based positions of the clicked documents.
    pub fn clicked_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.clicks
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| i + 1)
    }
}

/// Editorial relevance grade for a (query, document) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelevanceJudgment {
    pub query_id: String,
    pub doc_id: String,
    /// Grade in `0..=4`.
    pub grade: u8,
}

pub const MAX_GRADE: u8 = 4;
