use std::collections::BTreeMap;

use super::{LogEvent, Session, DEFAULT_MAX_POSITIONS};
use crate::intent::IntentLabel;

#[derive(Debug, Clone, Copy)]
pub struct SessionizeConfig {
    /// Maximum gap in seconds between consecutive events of one session.
    pub gap_timeout: i64,
    pub max_positions: usize,
}

impl Default for SessionizeConfig {
    fn default() -> Self {
        SessionizeConfig {
            gap_timeout: 30 * 60,
            max_positions: DEFAULT_MAX_POSITIONS,
        }
    }
}

#[derive(Debug, Default)]
pub struct Sessionized {
    pub sessions: Vec<Session>,
    pub total_clicks: usize,
    pub retained_clicks: usize,
    /// Click events whose rank exceeded `max_positions`.
    pub dropped_clicks: usize,
}

/// Synthetic id for an unclicked position. Query logs only record clicked
/// URLs, so whatever was shown at an unclicked rank is unknown.
pub fn placeholder_doc_id(query_id: &str, position: usize) -> String {
    format!("q{query_id}:pos{position}")
}

/// Groups log events into per-query sessions.
///
/// Consecutive events from the same user with the same normalized query form
/// one session as long as no two neighbours are more than `gap_timeout` apart.
/// Events are stably sorted by `(user_id, query_time)` first.
pub fn sessionize(events: &[LogEvent], config: &SessionizeConfig) -> Sessionized {
    let mut order: Vec<&LogEvent> = events.iter().collect();
    order.sort_by(|a, b| {
        a.user_id
            .cmp(&b.user_id)
            .then(a.query_time.cmp(&b.query_time))
    });

    let mut out = Sessionized::default();
    let mut group: Vec<&LogEvent> = Vec::new();
    for event in order {
        let split = match group.last() {
            None => false,
            Some(prev) => {
                prev.user_id != event.user_id
                    || prev.query != event.query
                    || event.query_time - prev.query_time > config.gap_timeout
            }
        };
        if split {
            flush(&mut group, config, &mut out);
        }
        group.push(event);
    }
    flush(&mut group, config, &mut out);
    out
}

fn flush(group: &mut Vec<&LogEvent>, config: &SessionizeConfig, out: &mut Sessionized) {
    let Some(first) = group.first() else {
        return;
    };
    let query_id = first.query.clone();

    // rank -> url, first click at a rank wins
    let mut clicked: BTreeMap<usize, &str> = BTreeMap::new();
    for event in group.iter() {
        let Some(click) = &event.click else {
            continue;
        };
        out.total_clicks += 1;
        if click.item_rank > config.max_positions {
            out.dropped_clicks += 1;
            log::warn!(
                "dropping click at rank {} for query `{}` (max_positions = {})",
                click.item_rank,
                query_id,
                config.max_positions
            );
            continue;
        }
        out.retained_clicks += 1;
        clicked.entry(click.item_rank).or_insert(click.url.as_str());
    }

    let depth = clicked.keys().next_back().copied().unwrap_or(0);
    let mut docs = Vec::with_capacity(depth);
    let mut clicks = Vec::with_capacity(depth);
    for position in 1..=depth {
        match clicked.get(&position) {
            Some(url) => {
                let mut id = url.to_string();
                if docs.contains(&id) {
                    id = format!("{url}#{position}");
                }
                docs.push(id);
                clicks.push(true);
            }
            None => {
                docs.push(placeholder_doc_id(&query_id, position));
                clicks.push(false);
            }
        }
    }

    out.sessions.push(Session {
        session_id: format!("s{}", out.sessions.len()),
        query_id,
        intent: IntentLabel::Unknown,
        docs,
        clicks,
    });
    group.clear();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log_store::Click;

    fn event(user: &str, query: &str, t: i64, click: Option<(usize, &str)>) -> LogEvent {
        LogEvent {
            user_id: user.into(),
            query: query.into(),
            query_time: t,
            click: click.map(|(item_rank, url)| Click {
                item_rank,
                url: url.into(),
            }),
        }
    }

    #[test]
    fn same_query_within_timeout() {
        let events = vec![
            event("u1", "maps", 0, None),
            event("u1", "maps", 300, Some((2, "www.maps.com"))),
        ];
        let out = sessionize(&events, &SessionizeConfig::default());
        assert_eq!(out.sessions.len(), 1);
        let s = &out.sessions[0];
        assert_eq!(s.clicks, vec![false, true]);
        assert_eq!(s.docs, vec!["qmaps:pos1".to_string(), "www.maps.com".to_string()]);
    }

    #[test]
    fn query_change_splits() {
        let events = vec![event("u1", "maps", 0, None), event("u1", "weather", 10, None)];
        assert_eq!(sessionize(&events, &SessionizeConfig::default()).sessions.len(), 2);
    }

    #[test]
    fn timeout_splits() {
        let events = vec![
            event("u1", "maps", 0, Some((1, "a.com"))),
            event("u1", "maps", 45 * 60, Some((1, "a.com"))),
        ];
        assert_eq!(sessionize(&events, &SessionizeConfig::default()).sessions.len(), 2);
    }

    #[test]
    fn deep_clicks_dropped_and_counted() {
        let events = vec![
            event("u1", "maps", 0, Some((12, "deep.com"))),
            event("u1", "maps", 1, Some((3, "c.com"))),
            event("u2", "maps", 1, Some((3, "c.com"))),
        ];
        let out = sessionize(&events, &SessionizeConfig::default());
        assert_eq!(out.total_clicks, 3);
        assert_eq!(out.dropped_clicks, 1);
        assert_eq!(out.retained_clicks + out.dropped_clicks, out.total_clicks);
        assert_eq!(out.sessions[0].len(), 3);
    }

    #[test]
    fn repeated_url_kept_unique() {
        let events = vec![
            event("u1", "maps", 0, Some((1, "a.com"))),
            event("u1", "maps", 5, Some((2, "a.com"))),
        ];
        let out = sessionize(&events, &SessionizeConfig::default());
        out.sessions[0].validate().unwrap();
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let events = vec![
            event("u2", "b", 0, None),
            event("u1", "a", 100, None),
            event("u1", "a", 50, Some((1, "x.com"))),
        ];
        let a = sessionize(&events, &SessionizeConfig::default());
        let b = sessionize(&events, &SessionizeConfig::default());
        assert_eq!(a.sessions, b.sessions);
        assert_eq!(a.sessions.len(), 2);
        assert_eq!(a.sessions[0].query_id, "a");
    }
}
