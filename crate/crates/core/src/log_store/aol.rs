use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::NaiveDateTime;

use super::{Click, LogEvent};
use crate::error::{Error, Result};

const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";
const FIELD_COUNT: usize = 5;

/// Lowercases a query and strips ASCII punctuation.
///
/// A dot survives only between two alphanumeric characters, so URL-like
/// queries such as `www.google.com` keep their shape. Whitespace runs collapse
/// to a single space.
pub fn normalize_query(raw: &str) -> String {
    let chars: Vec<char> = raw.chars().collect();
    let mut cleaned = String::with_capacity(raw.len());
    for (i, &c) in chars.iter().enumerate() {
        if c == '.' {
            let prev = i.checked_sub(1).map(|j| chars[j]);
            let next = chars.get(i + 1).copied();
            if prev.is_some_and(char::is_alphanumeric) && next.is_some_and(char::is_alphanumeric) {
                cleaned.push('.');
            }
        } else if c.is_ascii_punctuation() {
            continue;
        } else {
            cleaned.extend(c.to_lowercase());
        }
    }
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses one tab-separated AOL record.
///
/// Fields are `AnonID, Query, QueryTime, ItemRank, ClickURL`; the last two are
/// empty for a query that was not followed by a click.
pub fn parse_aol_line(line: &str, line_no: usize) -> Result<LogEvent> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != FIELD_COUNT {
        return Err(Error::MalformedRecord {
            line: line_no,
            reason: format!("expected {FIELD_COUNT} tab-separated fields, found {}", fields.len()),
        });
    }

    let user_id = fields[0].trim();
    if user_id.is_empty() {
        return Err(Error::MalformedField {
            line: line_no,
            field: "AnonID",
            reason: "empty".into(),
        });
    }

    let query = normalize_query(fields[1]);
    if query.is_empty() {
        return Err(Error::MalformedField {
            line: line_no,
            field: "Query",
            reason: "empty after normalization".into(),
        });
    }

    let query_time = NaiveDateTime::parse_from_str(fields[2].trim(), TIME_FORMAT)
        .map_err(|e| Error::MalformedField {
            line: line_no,
            field: "QueryTime",
            reason: e.to_string(),
        })?
        .and_utc()
        .timestamp();

    let rank = fields[3].trim();
    let url = fields[4].trim();
    let click = match (rank.is_empty(), url.is_empty()) {
        (true, true) => None,
        (false, false) => {
            let item_rank: usize = rank.parse().map_err(|_| Error::MalformedField {
                line: line_no,
                field: "ItemRank",
                reason: format!("`{rank}` is not a positive integer"),
            })?;
            if item_rank == 0 {
                return Err(Error::MalformedField {
                    line: line_no,
                    field: "ItemRank",
                    reason: "ranks are 1-based".into(),
                });
            }
            Some(Click {
                item_rank,
                url: url.to_string(),
            })
        }
        _ => {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: "ItemRank and ClickURL must both be present or both empty".into(),
            })
        }
    };

    Ok(LogEvent {
        user_id: user_id.to_string(),
        query,
        query_time,
        click,
    })
}

#[derive(Debug, Default)]
pub struct AolRead {
    pub events: Vec<LogEvent>,
    /// Lines skipped because they failed to parse (only when skipping is enabled).
    pub malformed: usize,
}

/// Reads an AOL log file. A header line whose first field is `AnonID` is skipped.
pub fn read_aol_file(path: &Path, skip_malformed: bool) -> Result<AolRead> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = AolRead::default();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if idx == 0 && line.split('\t').next() == Some("AnonID") {
            continue;
        }
        match parse_aol_line(&line, line_no) {
            Ok(event) => out.events.push(event),
            Err(err) if skip_malformed => {
                log::warn!("{}: {err}", path.display());
                out.malformed += 1;
            }
            Err(err) => return Err(err),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn click_event() {
        let ev = parse_aol_line("u1\tmapquest\t2006-03-01 07:17:12\t1\thttp://www.mapquest.com", 1)
            .unwrap();
        assert_eq!(ev.user_id, "u1");
        assert_eq!(ev.query, "mapquest");
        let click = ev.click.unwrap();
        assert_eq!(click.item_rank, 1);
        assert_eq!(click.url, "http://www.mapquest.com");
    }

    #[test]
    fn query_only_event() {
        let ev = parse_aol_line("u1\tmapquest\t2006-03-01 07:17:12\t\t", 1).unwrap();
        assert!(ev.click.is_none());
        assert_eq!(ev.query_time, 1141197432);
    }

    #[test]
    fn wrong_field_count() {
        let err = parse_aol_line("u1\tmapquest\t2006-03-01 07:17:12\t1", 7).unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { line: 7, .. }));
    }

    #[test]
    fn bad_fields() {
        assert!(matches!(
            parse_aol_line("u1\tq\tyesterday\t\t", 2),
            Err(Error::MalformedField { field: "QueryTime", line: 2, .. })
        ));
        assert!(matches!(
            parse_aol_line("u1\tq\t2006-03-01 07:17:12\tone\twww.a.com", 3),
            Err(Error::MalformedField { field: "ItemRank", .. })
        ));
        assert!(matches!(
            parse_aol_line("u1\tq\t2006-03-01 07:17:12\t2\t", 3),
            Err(Error::MalformedRecord { .. })
        ));
        assert!(matches!(
            parse_aol_line("u1\t?!\t2006-03-01 07:17:12\t\t", 3),
            Err(Error::MalformedField { field: "Query", .. })
        ));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_query("Fulton, NY"), "fulton ny");
        assert_eq!(normalize_query("www.Google.com"), "www.google.com");
        assert_eq!(normalize_query("end of sentence."), "end of sentence");
        assert_eq!(normalize_query("  O'Reilly   books "), "oreilly books");
    }
}
