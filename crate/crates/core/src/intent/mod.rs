//! Query intent: features from click-through data and query text, and a
//! linear classifier over the informational / navigational / transactional
//! taxonomy.

mod classifier;
mod features;

pub use classifier::{
    argmax_label, classify, evaluate_classifier, f1_score, train_classifier, ClassMetrics,
    ClassificationReport, ClassifierModel, TrainConfig,
};
pub use features::{
    click_ratio, clicked_url_counts, extract_features, n_clicks_satisfied, n_results_satisfied,
    query_length, rule_label_transactional, url_match_ratio, CueLexicon, FeatureConfig,
    FeatureVector, DENSE_FEATURES,
};

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Search intent of a query impression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IntentLabel {
    #[serde(rename = "inf")]
    Informational,
    #[serde(rename = "nav")]
    Navigational,
    #[serde(rename = "tra")]
    Transactional,
    #[serde(rename = "unk")]
    Unknown,
}

impl IntentLabel {
    /// The three classifiable intents, in tie-break order.
    pub const CLASSES: [IntentLabel; 3] = [
        IntentLabel::Informational,
        IntentLabel::Navigational,
        IntentLabel::Transactional,
    ];

    /// Index into per-intent tables; `None` for `Unknown`.
    pub fn slot(self) -> Option<usize> {
        match self {
            IntentLabel::Informational => Some(0),
            IntentLabel::Navigational => Some(1),
            IntentLabel::Transactional => Some(2),
            IntentLabel::Unknown => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            IntentLabel::Informational => "inf",
            IntentLabel::Navigational => "nav",
            IntentLabel::Transactional => "tra",
            IntentLabel::Unknown => "unk",
        }
    }
}

impl fmt::Display for IntentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for IntentLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" => Ok(IntentLabel::Informational),
            "nav" => Ok(IntentLabel::Navigational),
            "tra" => Ok(IntentLabel::Transactional),
            "unk" => Ok(IntentLabel::Unknown),
            other => Err(Error::UndefinedInput(format!("unknown intent label `{other}`"))),
        }
    }
}

/// Reads a `query_id<TAB>label` file.
pub fn read_intent_labels(path: &Path) -> Result<BTreeMap<String, IntentLabel>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = BTreeMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((query, label)) = line.split_once('\t') else {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: "expected query_id<TAB>label".into(),
            });
        };
        let label: IntentLabel = label.parse().map_err(|e: Error| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if labels.insert(query.to_string(), label).is_some() {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("duplicate label for query `{query}`"),
            });
        }
    }
    Ok(labels)
}

pub fn write_intent_labels(path: &Path, labels: &BTreeMap<String, IntentLabel>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (query, label) in labels {
        writeln!(w, "{query}\t{label}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_codes_roundtrip() {
        for label in IntentLabel::CLASSES.into_iter().chain([IntentLabel::Unknown]) {
            assert_eq!(label.code().parse::<IntentLabel>().unwrap(), label);
        }
        assert!("web".parse::<IntentLabel>().is_err());
    }

    #[test]
    fn label_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.tsv");
        std::fs::write(&path, "github\tnav\namazon forest\tinf\n").unwrap();
        let labels = read_intent_labels(&path).unwrap();
        assert_eq!(labels["github"], IntentLabel::Navigational);
        let out = dir.path().join("out.tsv");
        write_intent_labels(&out, &labels).unwrap();
        assert_eq!(read_intent_labels(&out).unwrap(), labels);
    }
}
