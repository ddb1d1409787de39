//! Click models under the examination hypothesis: a result is clicked exactly
//! when it is examined and found relevant.
//!
//! Each model owns a relevance table keyed by `(query, doc)` and a
//! model-specific description of examination:
//!
//! | model   | examination                                              |
//! |---------|----------------------------------------------------------|
//! | PBM     | per-position probability `γ_i`                           |
//! | cascade | top-down until the first click                           |
//! | UBM     | `β_{l,i}`, keyed by position and previous click position |
//! | DBN     | top-down, stopping on satisfaction or with prob. `1 - γ` |
//!
//! [`IntentAwareParams`] replicates a full parameter set per search intent.

mod cascade;
mod dbn;
mod pbm;
mod ubm;

pub use cascade::CascadeParams;
pub use dbn::DbnParams;
pub use pbm::PbmParams;
pub use ubm::UbmParams;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::FitReport;
use crate::intent::IntentLabel;
use crate::log_store::Session;

/// Lower/upper clamp applied to model probabilities before taking logs.
pub const PROB_EPS: f64 = 1e-12;

/// Relevance assumed for `(query, doc)` pairs absent from a table.
pub const DEFAULT_RELEVANCE: f64 = 0.5;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pbm,
    Cascade,
    Ubm,
    Dbn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Pbm, ModelKind::Cascade, ModelKind::Ubm, ModelKind::Dbn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Pbm => "pbm",
            ModelKind::Cascade => "cascade",
            ModelKind::Ubm => "ubm",
            ModelKind::Dbn => "dbn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pbm" => Ok(ModelKind::Pbm),
            "cascade" => Ok(ModelKind::Cascade),
            "ubm" => Ok(ModelKind::Ubm),
            "dbn" => Ok(ModelKind::Dbn),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

/// Per-(query, doc) probabilities; missing pairs read as [`DEFAULT_RELEVANCE`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelevanceTable(BTreeMap<String, BTreeMap<String, f64>>);

impl RelevanceTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, query: &str, doc: &str) -> f64 {
        self.try_get(query, doc).unwrap_or(DEFAULT_RELEVANCE)
    }

    pub fn try_get(&self, query: &str, doc: &str) -> Option<f64> {
        self.0.get(query)?.get(doc).copied()
    }

    pub fn set(&mut self, query: impl Into<String>, doc: impl Into<String>, value: f64) {
        self.0.entry(query.into()).or_default().insert(doc.into(), value);
    }

    pub fn len(&self) -> usize {
        self.0.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.0
            .iter()
            .flat_map(|(q, docs)| docs.iter().map(move |(d, &v)| (q.as_str(), d.as_str(), v)))
    }

    pub fn docs_for(&self, query: &str) -> impl Iterator<Item = (&str, f64)> {
        self.0
            .get(query)
            .into_iter()
            .flat_map(|docs| docs.iter().map(|(d, &v)| (d.as_str(), v)))
    }

    fn validate(&self, what: &str) -> Result<()> {
        match self.iter().find(|(_, _, v)| !(0.0..=1.0).contains(v)) {
            Some((q, d, v)) => Err(Error::UndefinedInput(format!(
                "{what}[{q}, {d}] = {v} is not a probability"
            ))),
            None => Ok(()),
        }
    }
}

pub(crate) fn check_probability(value: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::UndefinedInput(format!("{what} = {value} is not a probability")))
    }
}

pub(crate) fn check_session_shape(docs: &[String], clicks: Option<&[bool]>, max: usize) -> Result<()> {
    if docs.len() > max {
        return Err(Error::Range {
            position: docs.len(),
            max,
        });
    }
    if let Some(clicks) = clicks {
        if clicks.len() != docs.len() {
            return Err(Error::Shape {
                expected: docs.len(),
                got: clicks.len(),
            });
        }
    }
    Ok(())
}

/// Common interface of the base click models.
pub trait ClickModel {
    fn kind(&self) -> ModelKind;

    fn max_positions(&self) -> usize;

    /// `P(C = 1 | E = 1)` for a document.
    fn relevance(&self, query: &str, doc: &str) -> f64;

    /// Probability of the whole observed click vector.
    fn session_prob(&self, query: &str, docs: &[String], clicks: &[bool]) -> Result<f64>;

    /// Unconditional `P(C_i = 1)` for each position of a ranking.
    fn click_probs(&self, query: &str, docs: &[String]) -> Result<Vec<f64>>;

    fn validate(&self) -> Result<()>;
}

/// Parameters of one base model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaseParams {
    Pbm(PbmParams),
    Cascade(CascadeParams),
    Ubm(UbmParams),
    Dbn(DbnParams),
}

impl BaseParams {
    fn inner(&self) -> &dyn ClickModel {
        match self {
            BaseParams::Pbm(p) => p,
            BaseParams::Cascade(p) => p,
            BaseParams::Ubm(p) => p,
            BaseParams::Dbn(p) => p,
        }
    }

    /// Fresh parameters at the initialization values used by EM.
    pub fn initial(kind: ModelKind, max_positions: usize) -> Self {
        match kind {
            ModelKind::Pbm => BaseParams::Pbm(PbmParams::uniform(max_positions, 0.5)),
            ModelKind::Cascade => BaseParams::Cascade(CascadeParams::new(max_positions)),
            ModelKind::Ubm => BaseParams::Ubm(UbmParams::uniform(max_positions, 0.5)),
            ModelKind::Dbn => BaseParams::Dbn(DbnParams::new(max_positions, 0.9)),
        }
    }

    pub fn relevance_table(&self) -> &RelevanceTable {
        match self {
            BaseParams::Pbm(p) => &p.rel,
            BaseParams::Cascade(p) => &p.rel,
            BaseParams::Ubm(p) => &p.rel,
            BaseParams::Dbn(p) => &p.rel,
        }
    }

    pub fn relevance_table_mut(&mut self) -> &mut RelevanceTable {
        match self {
            BaseParams::Pbm(p) => &mut p.rel,
            BaseParams::Cascade(p) => &mut p.rel,
            BaseParams::Ubm(p) => &mut p.rel,
            BaseParams::Dbn(p) => &mut p.rel,
        }
    }
}

impl ClickModel for BaseParams {
    fn kind(&self) -> ModelKind {
        self.inner().kind()
    }
    fn max_positions(&self) -> usize {
        self.inner().max_positions()
    }
    fn relevance(&self, query: &str, doc: &str) -> f64 {
        self.inner().relevance(query, doc)
    }
    fn session_prob(&self, query: &str, docs: &[String], clicks: &[bool]) -> Result<f64> {
        self.inner().session_prob(query, docs, clicks)
    }
    fn click_probs(&self, query: &str, docs: &[String]) -> Result<Vec<f64>> {
        self.inner().click_probs(query, docs)
    }
    fn validate(&self) -> Result<()> {
        self.inner().validate()
    }
}

/// One full parameter set per intent, plus a fallback for `Unknown`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentAwareParams {
    pub informational: BaseParams,
    pub navigational: BaseParams,
    pub transactional: BaseParams,
    pub fallback: BaseParams,
}

impl IntentAwareParams {
    /// Every intent (and the fallback) shares a copy of `base`.
    pub fn replicated(base: BaseParams) -> Self {
        IntentAwareParams {
            informational: base.clone(),
            navigational: base.clone(),
            transactional: base.clone(),
            fallback: base,
        }
    }

    pub fn for_intent(&self, intent: IntentLabel) -> &BaseParams {
        match intent {
            IntentLabel::Informational => &self.informational,
            IntentLabel::Navigational => &self.navigational,
            IntentLabel::Transactional => &self.transactional,
            IntentLabel::Unknown => &self.fallback,
        }
    }

    pub fn for_intent_mut(&mut self, intent: IntentLabel) -> &mut BaseParams {
        match intent {
            IntentLabel::Informational => &mut self.informational,
            IntentLabel::Navigational => &mut self.navigational,
            IntentLabel::Transactional => &mut self.transactional,
            IntentLabel::Unknown => &mut self.fallback,
        }
    }

    fn tables(&self) -> [&BaseParams; 4] {
        [&self.informational, &self.navigational, &self.transactional, &self.fallback]
    }

    fn validate(&self) -> Result<()> {
        let kind = self.fallback.kind();
        let max = self.fallback.max_positions();
        for t in self.tables() {
            if t.kind() != kind || t.max_positions() != max {
                return Err(Error::KindMismatch {
                    expected: format!("{kind}/{max}"),
                    got: format!("{}/{}", t.kind(), t.max_positions()),
                });
            }
            t.validate()?;
        }
        Ok(())
    }
}

/// Parameters of a fitted model, intent-aware or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "tables", rename_all = "snake_case")]
pub enum ModelParams {
    Base(BaseParams),
    IntentAware(Box<IntentAwareParams>),
}

impl ModelParams {
    /// The parameter set used for sessions with the given intent.
    pub fn for_intent(&self, intent: IntentLabel) -> &BaseParams {
        match self {
            ModelParams::Base(p) => p,
            ModelParams::IntentAware(ia) => ia.for_intent(intent),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.for_intent(IntentLabel::Unknown).kind()
    }

    pub fn max_positions(&self) -> usize {
        self.for_intent(IntentLabel::Unknown).max_positions()
    }

    pub fn is_intent_aware(&self) -> bool {
        matches!(self, ModelParams::IntentAware(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Base(p) => p.validate(),
            ModelParams::IntentAware(ia) => ia.validate(),
        }
    }

    pub fn session_prob(&self, session: &Session) -> Result<f64> {
        self.for_intent(session.intent)
            .session_prob(&session.query_id, &session.docs, &session.clicks)
    }

    pub fn click_probs(&self, session: &Session) -> Result<Vec<f64>> {
        self.for_intent(session.intent)
            .click_probs(&session.query_id, &session.docs)
    }
}

/// Parameter set for an intent; `Unknown` selects the fallback.
pub fn ia_dispatch(params: &IntentAwareParams, intent: IntentLabel) -> &BaseParams {
    params.for_intent(intent)
}

/// Natural log of the session probability, floored at [`PROB_EPS`].
pub fn session_log_likelihood(kind: ModelKind, params: &ModelParams, session: &Session) -> Result<f64> {
    if params.kind() != kind {
        return Err(Error::KindMismatch {
            expected: kind.to_string(),
            got: params.kind().to_string(),
        });
    }
    Ok(params.session_prob(session)?.max(PROB_EPS).ln())
}

const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk model: parameters plus optional fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub model: ModelKind,
    pub max_positions: usize,
    pub intent_aware: bool,
    pub params: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_report: Option<FitReport>,
}

impl ModelDocument {
    pub fn new(params: ModelParams, fit_report: Option<FitReport>) -> Self {
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            model: params.kind(),
            max_positions: params.max_positions(),
            intent_aware: params.is_intent_aware(),
            params,
            fit_report,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ModelDocument = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.into(),
            source: e,
        })?;
        doc.check()?;
        Ok(doc)
    }

    fn check(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::UndefinedInput(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        self.params.validate()?;
        if self.params.kind() != self.model
            || self.params.max_positions() != self.max_positions
            || self.params.is_intent_aware() != self.intent_aware
        {
            return Err(Error::KindMismatch {
                expected: format!("{}/{}/{}", self.model, self.max_positions, self.intent_aware),
                got: format!(
                    "{}/{}/{}",
                    self.params.kind(),
                    self.params.max_positions(),
                    self.params.is_intent_aware()
                ),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    /// Every binary vector of length `n`, in counting order.
    pub fn all_click_vectors(n: usize) -> impl Iterator<Item = Vec<bool>> {
        (0u32..(1 << n)).map(move |bits| (0..n).map(|i| bits >> i & 1 == 1).collect())
    }

    pub fn docs(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("d{i}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use proptest::prelude::*;

    fn random_params(kind: ModelKind, n: usize, vals: &[f64]) -> BaseParams {
        let mut it = vals.iter().copied().cycle();
        let mut next = move || it.next().unwrap();
        let mut p = BaseParams::initial(kind, n);
        match &mut p {
            BaseParams::Pbm(p) => p.exam.iter_mut().for_each(|g| *g = next()),
            BaseParams::Cascade(_) => {}
            BaseParams::Ubm(p) => p.beta.iter_mut().flatten().for_each(|b| *b = next()),
            BaseParams::Dbn(p) => {
                p.gamma_cont = next();
                for d in docs(n) {
                    p.sat.set("q", d, next());
                }
            }
        }
        for d in docs(n) {
            p.relevance_table_mut().set("q", d, next());
        }
        p
    }

    proptest! {
        #[test]
        fn session_probabilities_normalize(
            vals in proptest::collection::vec(0.0f64..=1.0, 40),
            n in 1usize..=5,
        ) {
            for kind in ModelKind::ALL {
                let p = random_params(kind, 5, &vals);
                let d = docs(n);
                let total: f64 = all_click_vectors(n)
                    .map(|c| p.session_prob("q", &d, &c).unwrap_or(0.0))
                    .sum();
                prop_assert!((total - 1.0).abs() < 1e-9, "{kind}: {total}");
                for prob in p.click_probs("q", &d).unwrap() {
                    prop_assert!((0.0..=1.0).contains(&prob));
                }
            }
        }

        #[test]
        fn marginals_match_enumeration(vals in proptest::collection::vec(0.0f64..=1.0, 40)) {
            for kind in ModelKind::ALL {
                let p = random_params(kind, 4, &vals);
                let d = docs(4);
                let marg = p.click_probs("q", &d).unwrap();
                let mut brute = [0.0; 4];
                for c in all_click_vectors(4) {
                    let pr = p.session_prob("q", &d, &c).unwrap_or(0.0);
                    for i in 0..4 {
                        if c[i] {
                            brute[i] += pr;
                        }
                    }
                }
                for i in 0..4 {
                    prop_assert!((marg[i] - brute[i]).abs() < 1e-12, "{kind} pos {i}");
                }
            }
        }
    }

    #[test]
    fn log_likelihood_sums_to_one() {
        let vals = [0.3, 0.8, 0.55, 0.1, 0.95, 0.42, 0.67];
        for kind in ModelKind::ALL {
            let params = ModelParams::Base(random_params(kind, 4, &vals));
            let total: f64 = all_click_vectors(4)
                .map(|clicks| {
                    let s = Session {
                        session_id: "s".into(),
                        query_id: "q".into(),
                        intent: IntentLabel::Unknown,
                        docs: docs(4),
                        clicks,
                    };
                    session_log_likelihood(kind, &params, &s).map(f64::exp).unwrap_or(0.0)
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-9, "{kind}: {total}");
        }
    }

    #[test]
    fn log_likelihood_fixed_points() {
        let mut pbm = PbmParams::uniform(1, 0.5);
        pbm.rel.set("q", "d0", 0.4);
        let params = ModelParams::Base(BaseParams::Pbm(pbm));
        let s = Session {
            session_id: "s".into(),
            query_id: "q".into(),
            intent: IntentLabel::Unknown,
            docs: docs(1),
            clicks: vec![true],
        };
        let ll = session_log_likelihood(ModelKind::Pbm, &params, &s).unwrap();
        assert!((ll - 0.2f64.ln()).abs() < 1e-12);
        assert!(matches!(
            session_log_likelihood(ModelKind::Dbn, &params, &s),
            Err(Error::KindMismatch { .. })
        ));

        let mut dbn = DbnParams::new(3, 0.7);
        dbn.rel.set("q", "d0", 1.0);
        dbn.sat.set("q", "d0", 1.0);
        let params = ModelParams::Base(BaseParams::Dbn(dbn));
        let s = Session {
            docs: docs(3),
            clicks: vec![true, false, false],
            ..s
        };
        assert_eq!(session_log_likelihood(ModelKind::Dbn, &params, &s).unwrap(), 0.0);
    }

    #[test]
    fn dispatch_and_collapse() {
        let vals = [0.3, 0.8, 0.55, 0.1, 0.95];
        for kind in ModelKind::ALL {
            let base = random_params(kind, 4, &vals);
            let mut ia = IntentAwareParams::replicated(base.clone());
            let mut nav = base.clone();
            nav.relevance_table_mut().set("q", "d0", 0.01);
            ia.navigational = nav.clone();
            assert_eq!(ia_dispatch(&ia, IntentLabel::Navigational), &nav);
            assert_eq!(ia_dispatch(&ia, IntentLabel::Unknown), &base);

            let collapsed = ModelParams::IntentAware(Box::new(IntentAwareParams::replicated(base.clone())));
            let plain = ModelParams::Base(base.clone());
            for intent in IntentLabel::CLASSES.into_iter().chain([IntentLabel::Unknown]) {
                for clicks in all_click_vectors(4) {
                    let s = Session {
                        session_id: "s".into(),
                        query_id: "q".into(),
                        intent,
                        docs: docs(4),
                        clicks,
                    };
                    let a = session_log_likelihood(kind, &collapsed, &s);
                    let b = session_log_likelihood(kind, &plain, &s);
                    match (a, b) {
                        (Ok(a), Ok(b)) => assert_eq!(a.to_bits(), b.to_bits()),
                        (Err(_), Err(_)) => {}
                        other => panic!("{kind}: {other:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn zero_relevance_blocks_clicks() {
        let vals = [0.3, 0.8, 0.55, 0.1, 0.95];
        for kind in ModelKind::ALL {
            let mut p = random_params(kind, 4, &vals);
            p.relevance_table_mut().set("q", "d2", 0.0);
            assert_eq!(p.click_probs("q", &docs(4)).unwrap()[2], 0.0, "{kind}");
        }
    }

    #[test]
    fn model_document_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        for kind in ModelKind::ALL {
            let params = ModelParams::IntentAware(Box::new(IntentAwareParams::replicated(
                random_params(kind, 3, &[0.2, 0.7, 0.4]),
            )));
            let doc = ModelDocument::new(params, None);
            doc.save(&path).unwrap();
            assert_eq!(ModelDocument::load(&path).unwrap(), doc);
        }
    }

    #[test]
    fn invalid_document_rejected() {
        let mut pbm = PbmParams::uniform(2, 0.5);
        pbm.exam[1] = 1.5;
        let doc = ModelDocument::new(ModelParams::Base(BaseParams::Pbm(pbm)), None);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        doc.save(&path).unwrap();
        assert!(ModelDocument::load(&path).is_err());
    }
}
