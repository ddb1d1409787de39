use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RelevanceJudgment, Session, MAX_GRADE};
use crate::error::{Error, Result};
use crate::intent::IntentLabel;

/// Wire shape of a session line: clicks are written as 0/1 integers.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct SessionRecord {
    session_id: String,
    query_id: String,
    intent: IntentLabel,
    docs: Vec<String>,
    clicks: Vec<u8>,
}

impl TryFrom<SessionRecord> for Session {
    type Error = String;

    fn try_from(rec: SessionRecord) -> std::result::Result<Self, String> {
        let clicks = rec
            .clicks
            .iter()
            .map(|&c| match c {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(format!("click value {other} is not 0 or 1")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let session = Session {
            session_id: rec.session_id,
            query_id: rec.query_id,
            intent: rec.intent,
            docs: rec.docs,
            clicks,
        };
        session.validate().map_err(|e| e.to_string())?;
        Ok(session)
    }
}

impl From<Session> for SessionRecord {
    fn from(s: Session) -> Self {
        SessionRecord {
            session_id: s.session_id,
            query_id: s.query_id,
            intent: s.intent,
            docs: s.docs,
            clicks: s.clicks.into_iter().map(u8::from).collect(),
        }
    }
}

pub fn format_session(session: &Session) -> String {
    serde_json::to_string(session).expect("session serialization is infallible")
}

pub fn parse_session(line: &str, line_no: usize) -> Result<Session> {
    serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        reason: e.to_string(),
    })
}

pub fn write_sessions(path: &Path, sessions: &[Session]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in sessions {
        writeln!(w, "{}", format_session(s)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_sessions(path: &Path) -> Result<Vec<Session>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut sessions = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        sessions.push(parse_session(&line, idx + 1)?);
    }
    Ok(sessions)
}

/// Editorial grades keyed by query, then document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Judgments {
    grades: BTreeMap<String, BTreeMap<String, u8>>,
}

impl Judgments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, judgment: RelevanceJudgment) -> Result<()> {
        if judgment.grade > MAX_GRADE {
            return Err(Error::Judgment(format!(
                "grade {} for ({}, {}) exceeds {MAX_GRADE}",
                judgment.grade, judgment.query_id, judgment.doc_id
            )));
        }
        let docs = self.grades.entry(judgment.query_id.clone()).or_default();
        if docs.insert(judgment.doc_id.clone(), judgment.grade).is_some() {
            return Err(Error::Judgment(format!(
                "duplicate judgment for ({}, {})",
                judgment.query_id, judgment.doc_id
            )));
        }
        Ok(())
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u8> {
        self.grades.get(query_id)?.get(doc_id).copied()
    }

    pub fn for_query(&self, query_id: &str) -> Option<&BTreeMap<String, u8>> {
        self.grades.get(query_id)
    }

    pub fn queries(&self) -> impl Iterator<Item = (&String, &BTreeMap<String, u8>)> {
        self.grades.iter()
    }

    pub fn len(&self) -> usize {
        self.grades.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = RelevanceJudgment> + '_ {
        self.grades.iter().flat_map(|(q, docs)| {
            docs.iter().map(move |(d, &g)| RelevanceJudgment {
                query_id: q.clone(),
                doc_id: d.clone(),
                grade: g,
            })
        })
    }
}

pub fn read_judgments(path: &Path) -> Result<Judgments> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut judgments = Judgments::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let grade = fields[2].trim().parse::<u8>().map_err(|_| Error::MalformedField {
            line: line_no,
            field: "grade",
            reason: format!("`{}` is not an integer in 0..=4", fields[2]),
        })?;
        judgments
            .insert(RelevanceJudgment {
                query_id: fields[0].to_string(),
                doc_id: fields[1].to_string(),
                grade,
            })
            .map_err(|e| Error::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
    }
    Ok(judgments)
}

pub fn write_judgments(path: &Path, judgments: &Judgments) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for j in judgments.iter() {
        writeln!(w, "{}\t{}\t{}", j.query_id, j.doc_id, j.grade).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
