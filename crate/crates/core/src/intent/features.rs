use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::log_store::Session;

/// Number of leading non-hashed entries in [`FeatureVector::to_dense`].
pub const DENSE_FEATURES: usize = 7;

const DEFAULT_CUES: &[&str] = &[
    // the five cue categories
    "file", "files", "video", "videos", "music", "picture", "pictures", "travel",
    // close relatives and file-type tokens
    "song", "songs", "photo", "photos", "image", "images", "flight", "flights", "ticket",
    "tickets", "hotel", "hotels", "download", "downloads", "pdf", "doc", "mp3", "mp4", "avi",
    "wav", "jpg", "jpeg", "png", "gif", "zip", "exe", "torrent",
];

/// Tokens that mark a query as transactional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CueLexicon {
    tokens: BTreeSet<String>,
}

impl Default for CueLexicon {
    fn default() -> Self {
        CueLexicon {
            tokens: DEFAULT_CUES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl CueLexicon {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CueLexicon {
            tokens: tokens.into_iter().map(|t| t.into().to_lowercase()).collect(),
        }
    }

    /// One token per line; blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Self {
        Self::from_tokens(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Ratio of the longest query substring found in `url` to the url length.
///
/// Comparison is case-insensitive and character based.
pub fn url_match_ratio(query: &str, url: &str) -> Result<f64> {
    if url.is_empty() {
        return Err(Error::UndefinedInput("url_match_ratio on an empty url".into()));
    }
    let q: Vec<char> = query.chars().flat_map(char::to_lowercase).collect();
    let u: Vec<char> = url.chars().flat_map(char::to_lowercase).collect();

    // longest common substring, rolling row
    let mut prev = vec![0usize; u.len() + 1];
    let mut cur = vec![0usize; u.len() + 1];
    let mut best = 0;
    for &qc in &q {
        for (j, &uc) in u.iter().enumerate() {
            cur[j + 1] = if qc == uc { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(best as f64 / u.len() as f64)
}

/// Share of a query's clicks that went to each url.
pub fn click_ratio(click_counts: &BTreeMap<String, u64>) -> Result<BTreeMap<String, f64>> {
    let total: u64 = click_counts.values().sum();
    if total == 0 {
        return Err(Error::NoClicks);
    }
    Ok(click_counts
        .iter()
        .map(|(url, &n)| (url.clone(), n as f64 / total as f64))
        .collect())
}

fn check_query_sessions<S: Borrow<Session>>(sessions: &[S], n: usize) -> Result<()> {
    let Some(first) = sessions.first() else {
        return Err(Error::UndefinedInput("no sessions for query".into()));
    };
    if n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    let query = &first.borrow().query_id;
    if let Some(other) = sessions.iter().find(|s| &(*s).borrow().query_id != query) {
        return Err(Error::UndefinedInput(format!(
            "sessions mix queries `{query}` and `{}`",
            other.borrow().query_id
        )));
    }
    Ok(())
}

/// nCS: fraction of the query's sessions with strictly fewer than `n` clicks.
pub fn n_clicks_satisfied<S: Borrow<Session>>(sessions: &[S], n: usize) -> Result<f64> {
    check_query_sessions(sessions, n)?;
    let hits = sessions
        .iter()
        .filter(|&s| s.borrow().num_clicks() < n)
        .count();
    Ok(hits as f64 / sessions.len() as f64)
}

/// nRS: fraction of the query's sessions whose clicks all fall in the top `n`.
/// Sessions without clicks count as satisfied.
pub fn n_results_satisfied<S: Borrow<Session>>(sessions: &[S], n: usize) -> Result<f64> {
    check_query_sessions(sessions, n)?;
    let hits = sessions
        .iter()
        .filter(|&s| s.borrow().clicked_positions().all(|p| p <= n))
        .count();
    Ok(hits as f64 / sessions.len() as f64)
}

pub fn rule_label_transactional(query: &str, lexicon: &CueLexicon) -> bool {
    query.split_whitespace().any(|t| lexicon.contains(t))
}

pub fn query_length(query: &str) -> usize {
    query.split_whitespace().count()
}

/// Click counts per clicked document across sessions.
pub fn clicked_url_counts<S: Borrow<Session>>(sessions: &[S]) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for s in sessions {
        let s = s.borrow();
        for (doc, _) in s.docs.iter().zip(&s.clicks).filter(|(_, &c)| c) {
            *counts.entry(doc.clone()).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone)]
pub struct FeatureConfig {
    pub ncs_n: usize,
    pub nrs_n: usize,
    pub hash_dim: usize,
    pub lexicon: CueLexicon,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            ncs_n: 2,
            nrs_n: 3,
            hash_dim: 1024,
            lexicon: CueLexicon::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub urlmr: f64,
    pub max_click_ratio: f64,
    pub ncs: f64,
    pub nrs: f64,
    pub query_length: usize,
    pub transactional_cue: bool,
    /// Set when the query has no recorded clicks; click features are then 0.
    pub missing_clicks: bool,
    /// Hashed term frequencies.
    pub bow: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        DENSE_FEATURES + self.bow.len()
    }

    /// Flat layout: urlmr, max click ratio, nCS, nRS, query length, cue flag,
    /// missing-click flag, then the hashed bag of words.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend([
            self.urlmr,
            self.max_click_ratio,
            self.ncs,
            self.nrs,
            self.query_length as f64,
            f64::from(u8::from(self.transactional_cue)),
            f64::from(u8::from(self.missing_clicks)),
        ]);
        v.extend_from_slice(&self.bow);
        v
    }
}

// 64-bit FNV-1a, stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn hashed_bow(query: &str, dim: usize) -> Vec<f64> {
    let mut bow = vec![0.0; dim];
    if dim == 0 {
        return bow;
    }
    for token in query.split_whitespace() {
        bow[(fnv1a(token.as_bytes()) % dim as u64) as usize] += 1.0;
    }
    bow
}

pub fn extract_features<S: Borrow<Session>>(
    query: &str,
    sessions: &[S],
    clicked_urls: &BTreeMap<String, u64>,
    config: &FeatureConfig,
) -> FeatureVector {
    let mut fv = FeatureVector {
        urlmr: 0.0,
        max_click_ratio: 0.0,
        ncs: 0.0,
        nrs: 0.0,
        query_length: query_length(query),
        transactional_cue: rule_label_transactional(query, &config.lexicon),
        missing_clicks: true,
        bow: hashed_bow(query, config.hash_dim),
    };

    let Ok(ratios) = click_ratio(clicked_urls) else {
        return fv;
    };
    fv.missing_clicks = false;
    fv.max_click_ratio = ratios.values().copied().fold(0.0, f64::max);
    fv.urlmr = clicked_urls
        .iter()
        .filter(|(url, &n)| n > 0 && !url.is_empty())
        .filter_map(|(url, _)| url_match_ratio(query, url).ok())
        .fold(0.0, f64::max);
    fv.ncs = n_clicks_satisfied(sessions, config.ncs_n).unwrap_or(0.0);
    fv.nrs = n_results_satisfied(sessions, config.nrs_n).unwrap_or(0.0);
    fv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::IntentLabel;
    use proptest::prelude::*;

    /// Brute force: try every substring of the query.
    fn urlmr_oracle(query: &str, url: &str) -> f64 {
        let q: Vec<char> = query.to_lowercase().chars().collect();
        let u = url.to_lowercase();
        let mut best = 0;
        for i in 0..q.len() {
            for j in i + 1..=q.len() {
                let sub: String = q[i..j].iter().collect();
                if u.contains(&sub) {
                    best = best.max(j - i);
                }
            }
        }
        best as f64 / u.chars().count() as f64
    }

    fn session(query: &str, clicks: &[bool]) -> Session {
        Session {
            session_id: "s".into(),
            query_id: query.into(),
            intent: IntentLabel::Unknown,
            docs: (0..clicks.len()).map(|i| format!("d{i}")).collect(),
            clicks: clicks.to_vec(),
        }
    }

    fn with_clicks_at(positions: &[usize]) -> Session {
        let n = positions.iter().copied().max().unwrap_or(0).max(5);
        let mut clicks = vec![false; n];
        for &p in positions {
            clicks[p - 1] = true;
        }
        session("q", &clicks)
    }

    #[test]
    fn urlmr_examples() {
        let oracle = urlmr_oracle("fulton ny", "www.fultoncountyny.org");
        assert!((oracle - 6.0 / 22.0).abs() < 1e-15);
        assert_eq!(url_match_ratio("fulton ny", "www.fultoncountyny.org").unwrap(), oracle);
        assert_eq!(url_match_ratio("github", "github.com").unwrap(), 0.6);
        assert_eq!(url_match_ratio("xyz", "abc.com").unwrap(), 0.0);
        assert_eq!(url_match_ratio("GitHub", "github.COM").unwrap(), 0.6);
        assert!(url_match_ratio("q", "").is_err());
    }

    proptest! {
        #[test]
        fn urlmr_matches_brute_force(q in "[a-d .]{0,12}", u in "[a-d.]{1,12}") {
            let got = url_match_ratio(&q, &u).unwrap();
            prop_assert_eq!(got, urlmr_oracle(&q, &u));
            prop_assert!((0.0..=1.0).contains(&got));
        }

        #[test]
        fn satisfied_ratios_monotone(
            counts in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 1..8), 1..10),
            n in 1usize..8,
        ) {
            let sessions: Vec<Session> = counts.iter().map(|c| session("q", c)).collect();
            prop_assert!(n_clicks_satisfied(&sessions, n).unwrap() <= n_clicks_satisfied(&sessions, n + 1).unwrap());
            prop_assert!(n_results_satisfied(&sessions, n).unwrap() <= n_results_satisfied(&sessions, n + 1).unwrap());
        }

        #[test]
        fn click_ratios_sum_to_one(counts in proptest::collection::btree_map("[a-z]{1,6}", 0u64..1000, 1..20)) {
            prop_assume!(counts.values().sum::<u64>() > 0);
            let total: f64 = click_ratio(&counts).unwrap().values().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn click_ratio_examples() {
        let counts = BTreeMap::from([("u1".to_string(), 3), ("u2".to_string(), 7)]);
        let r = click_ratio(&counts).unwrap();
        assert_eq!(r["u1"], 0.3);
        assert_eq!(r["u2"], 0.7);
        let single = BTreeMap::from([("u1".to_string(), 5)]);
        assert_eq!(click_ratio(&single).unwrap()["u1"], 1.0);
        assert!(matches!(click_ratio(&BTreeMap::new()), Err(Error::NoClicks)));
    }

    #[test]
    fn ncs_examples() {
        let s = [
            session("q", &[true, false, false]),
            session("q", &[true, true, true]),
            session("q", &[false, false, false]),
        ];
        assert!((n_clicks_satisfied(&s, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let zero = [session("q", &[false]), session("q", &[false, false])];
        assert_eq!(n_clicks_satisfied(&zero, 1).unwrap(), 1.0);
        let ones = [session("q", &[true]), session("q", &[false, true])];
        assert_eq!(n_clicks_satisfied(&ones, 1).unwrap(), 0.0);
        assert!(n_clicks_satisfied::<Session>(&[], 1).is_err());
        let mixed = [session("a", &[true]), session("b", &[true])];
        assert!(n_clicks_satisfied(&mixed, 1).is_err());
    }

    #[test]
    fn nrs_examples() {
        let s = [with_clicks_at(&[1, 2]), with_clicks_at(&[4]), with_clicks_at(&[1])];
        assert!((n_results_satisfied(&s, 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let top = [with_clicks_at(&[1]), with_clicks_at(&[1])];
        assert_eq!(n_results_satisfied(&top, 1).unwrap(), 1.0);
        assert_eq!(n_results_satisfied(&[with_clicks_at(&[5])], 3).unwrap(), 0.0);
        assert_eq!(n_results_satisfied(&[with_clicks_at(&[])], 3).unwrap(), 1.0);
    }

    #[test]
    fn transactional_rule() {
        let lex = CueLexicon::default();
        assert!(rule_label_transactional("introduction to algorithms pdf", &lex));
        assert!(!rule_label_transactional("amazon forest", &lex));
        assert!(rule_label_transactional("free music streaming", &lex));
    }

    #[test]
    fn lexicon_file_format() {
        let lex = CueLexicon::parse("# cues\nPDF\n\n  torrent \n# done\n");
        assert_eq!(lex.len(), 2);
        assert!(lex.contains("pdf"));
        assert!(lex.contains("torrent"));
    }

    #[test]
    fn features_without_clicks() {
        let cfg = FeatureConfig::default();
        let sessions = [session("sorting algorithms for big data", &[false, false])];
        let fv = extract_features("sorting algorithms for big data", &sessions, &BTreeMap::new(), &cfg);
        assert!(fv.missing_clicks);
        assert_eq!((fv.urlmr, fv.max_click_ratio, fv.ncs, fv.nrs), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(fv.query_length, 5);
        assert_eq!(fv.bow.iter().sum::<f64>(), 5.0);
        assert_eq!(fv.dim(), DENSE_FEATURES + 1024);
    }

    #[test]
    fn features_deterministic() {
        let cfg = FeatureConfig::default();
        let mut sessions = vec![session("github", &[true, false]), session("github", &[false, true])];
        sessions[0].docs[0] = "github.com".into();
        let urls = clicked_url_counts(&sessions);
        let a = extract_features("github", &sessions, &urls, &cfg);
        let b = extract_features("github", &sessions, &urls, &cfg);
        assert_eq!(a, b);
        assert!(!a.missing_clicks);
        assert_eq!(a.urlmr, 0.6);
        assert_eq!(a.max_click_ratio, 0.5);
        assert_eq!(a.to_dense().len(), a.dim());
    }
}
