//! Synthetic click logs drawn from known parameters.
//!
//! Every query gets its own ChaCha stream: stream `2q` for its ground truth
//! and `2q + 1` for its sessions, so generation is deterministic per seed and
//! independent of how queries are scheduled across threads.

use std::collections::BTreeMap;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::IntentLabel;
use crate::log_store::{write_judgments, Judgments, RelevanceJudgment, Session, MAX_GRADE};
use crate::models::{
    BaseParams, CascadeParams, DbnParams, IntentAwareParams, ModelDocument, ModelKind, ModelParams, PbmParams,
    UbmParams,
};

pub const MIN_RELEVANCE: f64 = 0.05;
pub const MAX_RELEVANCE: f64 = 0.95;

/// How the result list of each session is ordered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum RankingPolicy {
    /// Documents in id order in every session.
    Fixed,
    /// A fresh uniform permutation per session.
    Shuffled,
    /// A random production order per query; each adjacent pair is swapped
    /// with probability `swap_prob` in each session, top to bottom.
    Logged { swap_prob: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentAssignment {
    /// Each session draws its intent from the mix.
    PerSession,
    /// Each query draws one intent from the mix, shared by all its sessions.
    PerQuery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: ModelKind,
    pub num_queries: usize,
    pub sessions_per_query: usize,
    /// Results per session; each query has exactly this many documents.
    pub positions: usize,
    /// Proportions of informational, navigational and transactional intent.
    pub intent_mix: [f64; 3],
    pub seed: u64,
    pub ranking: RankingPolicy,
    pub intent_assignment: IntentAssignment,
    /// Give each intent its own examination behaviour.
    pub intent_dependent: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            model: ModelKind::Pbm,
            num_queries: 100,
            sessions_per_query: 100,
            positions: 10,
            intent_mix: [1.0 / 3.0; 3],
            seed: 0,
            ranking: RankingPolicy::Shuffled,
            intent_assignment: IntentAssignment::PerSession,
            intent_dependent: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_queries == 0 || self.sessions_per_query == 0 || self.positions == 0 {
            return Err(Error::Config("query, session and position counts must be at least 1".into()));
        }
        if self.intent_mix.iter().any(|&p| p.is_nan() || p < 0.0) || (self.intent_mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "intent mix must be non-negative and sum to 1, got {:?}",
                self.intent_mix
            )));
        }
        if let RankingPolicy::Logged { swap_prob } = self.ranking {
            if !(0.0..=1.0).contains(&swap_prob) {
                return Err(Error::Config(format!("swap probability {swap_prob} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub params: ModelParams,
    pub judgments: Judgments,
    /// Intent of each query under per-query assignment.
    pub query_intents: BTreeMap<String, IntentLabel>,
}

impl GroundTruth {
    /// Query ids with their documents in id order.
    pub fn queries(&self) -> impl Iterator<Item = (&String, Vec<String>)> {
        self.judgments
            .queries()
            .map(|(q, docs)| (q, docs.keys().cloned().collect()))
    }

    /// Writes `<prefix>.truth.json` and `<prefix>.judgments.tsv`.
    pub fn write_sidecar(&self, prefix: &Path) -> Result<()> {
        let base = prefix.as_os_str().to_owned();
        let mut json = base.clone();
        json.push(".truth.json");
        let mut tsv = base;
        tsv.push(".judgments.tsv");
        ModelDocument::new(self.params.clone(), None).save(Path::new(&json))?;
        write_judgments(Path::new(&tsv), &self.judgments)
    }
}

pub fn query_id(index: usize) -> String {
    format!("q{index:04}")
}

pub fn doc_id(index: usize) -> String {
    format!("d{:02}", index + 1)
}

/// Editorial grade for a true relevance value.
pub fn grade_for(r: f64) -> u8 {
    ((5.0 * r).floor().max(0.0) as u8).min(MAX_GRADE)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Per-step examination decay for each behaviour. `None` is the
/// intent-agnostic default.
fn decay(intent: Option<IntentLabel>) -> f64 {
    match intent {
        None => 0.9,
        Some(IntentLabel::Informational) => 0.6,
        Some(IntentLabel::Navigational) => 0.93,
        Some(IntentLabel::Transactional) => 0.9,
        Some(IntentLabel::Unknown) => 0.9,
    }
}

/// Examination curve of the calibrated preset; values past position 2 are synthetic.
pub fn fig1_exam_curve(intent: IntentLabel, positions: usize) -> Vec<f64> {
    let nav = |i: usize| match i {
        0 => 1.0,
        1 => 0.92 / 0.96,
        _ => 0.92 / 0.96 * 0.85f64.powi(i as i32 - 1),
    };
    (0..positions)
        .map(|i| match intent {
            IntentLabel::Informational => 0.45f64.powi(i as i32),
            IntentLabel::Transactional => nav(i) * 0.98,
            _ => nav(i),
        })
        .collect()
}

fn behaviour(kind: ModelKind, positions: usize, intent: Option<IntentLabel>) -> BaseParams {
    let d = decay(intent);
    match kind {
        ModelKind::Pbm => {
            let exam = match intent {
                Some(t @ (IntentLabel::Informational | IntentLabel::Navigational | IntentLabel::Transactional)) => {
                    fig1_exam_curve(t, positions)
                }
                _ => (0..positions).map(|i| d.powi(i as i32)).collect(),
            };
            BaseParams::Pbm(PbmParams {
                exam,
                ..PbmParams::uniform(positions, 0.0)
            })
        }
        ModelKind::Cascade => BaseParams::Cascade(CascadeParams::new(positions)),
        ModelKind::Ubm => {
            let mut p = UbmParams::uniform(positions, 0.0);
            for (i, row) in p.beta.iter_mut().enumerate() {
                for (l, b) in row.iter_mut().enumerate() {
                    *b = d.powf(i as f64 - l as f64 / 2.0);
                }
            }
            BaseParams::Ubm(p)
        }
        ModelKind::Dbn => BaseParams::Dbn(DbnParams::new(positions, d)),
    }
}

fn set_doc(params: &mut BaseParams, query: &str, doc: &str, r: f64, s: f64) {
    params.relevance_table_mut().set(query, doc, r);
    if let BaseParams::Dbn(p) = params {
        p.sat.set(query, doc, s);
    }
}

fn sample_intent(mix: &[f64; 3], rng: &mut ChaCha8Rng) -> IntentLabel {
    let dist = WeightedIndex::new(mix).expect("validated intent mix");
    IntentLabel::CLASSES[dist.sample(rng)]
}

/// Random ground truth for `config`.
pub fn generate_ground_truth(config: &SimConfig) -> Result<GroundTruth> {
    config.validate()?;
    let n = config.positions;
    let mut tables: Vec<BaseParams> = if config.intent_dependent {
        IntentLabel::CLASSES
            .iter()
            .map(|&t| behaviour(config.model, n, Some(t)))
            .chain([behaviour(config.model, n, None)])
            .collect()
    } else {
        vec![behaviour(config.model, n, None)]
    };
    let mut judgments = Judgments::new();
    let mut query_intents = BTreeMap::new();
    for q in 0..config.num_queries {
        let mut rng = stream(config.seed, 2 * q as u64);
        let query = query_id(q);
        for j in 0..n {
            let doc = doc_id(j);
            let r = rng.gen_range(MIN_RELEVANCE..=MAX_RELEVANCE);
            let s = rng.gen_range(MIN_RELEVANCE..=MAX_RELEVANCE);
            tables.iter_mut().for_each(|t| set_doc(t, &query, &doc, r, s));
            judgments.insert(RelevanceJudgment {
                query_id: query.clone(),
                doc_id: doc,
                grade: grade_for(r),
            })?;
        }
        if config.intent_assignment == IntentAssignment::PerQuery {
            query_intents.insert(query, sample_intent(&config.intent_mix, &mut rng));
        }
    }
    let params = if config.intent_dependent {
        let fallback = tables.pop().expect("four tables");
        let transactional = tables.pop().expect("four tables");
        let navigational = tables.pop().expect("four tables");
        let informational = tables.pop().expect("four tables");
        ModelParams::IntentAware(Box::new(IntentAwareParams {
            informational,
            navigational,
            transactional,
            fallback,
        }))
    } else {
        ModelParams::Base(tables.pop().expect("one table"))
    };
    Ok(GroundTruth {
        params,
        judgments,
        query_intents,
    })
}

/// Draws one click vector from the generative process of `params`.
pub fn sample_clicks<R: Rng>(params: &BaseParams, query: &str, docs: &[String], rng: &mut R) -> Vec<bool> {
    let mut clicks = vec![false; docs.len()];
    match params {
        BaseParams::Pbm(p) => {
            for (i, doc) in docs.iter().enumerate() {
                let examined = rng.gen::<f64>() < p.exam[i];
                let relevant = rng.gen::<f64>() < p.rel.get(query, doc);
                clicks[i] = examined && relevant;
            }
        }
        BaseParams::Cascade(p) => {
            for (i, doc) in docs.iter().enumerate() {
                if rng.gen::<f64>() < p.rel.get(query, doc) {
                    clicks[i] = true;
                    break;
                }
            }
        }
        BaseParams::Ubm(p) => {
            let mut prev = 0;
            for (i, doc) in docs.iter().enumerate() {
                let examined = rng.gen::<f64>() < p.beta[i][prev];
                let relevant = rng.gen::<f64>() < p.rel.get(query, doc);
                if examined && relevant {
                    clicks[i] = true;
                    prev = i + 1;
                }
            }
        }
        BaseParams::Dbn(p) => {
            for (i, doc) in docs.iter().enumerate() {
                if rng.gen::<f64>() < p.rel.get(query, doc) {
                    clicks[i] = true;
                    if rng.gen::<f64>() < p.sat.get(query, doc) {
                        break;
                    }
                }
                if rng.gen::<f64>() >= p.gamma_cont {
                    break;
                }
            }
        }
    }
    clicks
}

fn swap_adjacent<R: Rng>(order: &mut [String], prob: f64, rng: &mut R) {
    let mut i = 0;
    while i + 1 < order.len() {
        if rng.gen::<f64>() < prob {
            order.swap(i, i + 1);
            i += 2;
        } else {
            i += 1;
        }
    }
}

/// Sessions for every query of `truth`, ordered by query id then session index.
pub fn simulate_sessions(truth: &GroundTruth, config: &SimConfig) -> Result<Vec<Session>> {
    config.validate()?;
    if truth.params.kind() != config.model {
        return Err(Error::KindMismatch {
            expected: config.model.to_string(),
            got: truth.params.kind().to_string(),
        });
    }
    let queries: Vec<(String, Vec<String>)> = truth.queries().map(|(q, d)| (q.clone(), d)).collect();
    if let Some((_, docs)) = queries.iter().find(|(_, d)| d.len() > truth.params.max_positions()) {
        return Err(Error::Range {
            position: docs.len(),
            max: truth.params.max_positions(),
        });
    }
    let per_query: Vec<Vec<Session>> = queries
        .par_iter()
        .enumerate()
        .map(|(qi, (query, docs))| {
            let mut rng = stream(config.seed, 2 * qi as u64 + 1);
            let mut base = docs.clone();
            if matches!(config.ranking, RankingPolicy::Logged { .. }) {
                base.shuffle(&mut rng);
            }
            let fixed_intent = truth.query_intents.get(query).copied();
            (0..config.sessions_per_query)
                .map(|k| {
                    let intent = match (config.intent_assignment, fixed_intent) {
                        (IntentAssignment::PerQuery, Some(t)) => t,
                        _ => sample_intent(&config.intent_mix, &mut rng),
                    };
                    let mut shown = base.clone();
                    match config.ranking {
                        RankingPolicy::Fixed => {}
                        RankingPolicy::Shuffled => shown.shuffle(&mut rng),
                        RankingPolicy::Logged { swap_prob } => swap_adjacent(&mut shown, swap_prob, &mut rng),
                    }
                    let clicks = sample_clicks(truth.params.for_intent(intent), query, &shown, &mut rng);
                    Session {
                        session_id: format!("{query}-s{k:05}"),
                        query_id: query.clone(),
                        intent,
                        docs: shown,
                        clicks,
                    }
                })
                .collect()
        })
        .collect();
    Ok(per_query.into_iter().flatten().collect())
}

/// Non-target relevance of the calibrated preset outside the navigational target-at-4 query.
pub const FIG1_BACKGROUND_RELEVANCE: f64 = 0.15;
pub const FIG1_POSITIONS: usize = 8;

/// Intent-aware PBM truth calibrated to reference click rates per intent.
///
/// One query per (intent, target position); the target document sits at the
/// target position of a fixed ranking. Only the click rates quoted in the
/// text are calibrated: informational target at 1 (0.92), navigational
/// targets at 1 and 2 (0.96, 0.92) and the navigational target-at-4 total
/// click mass (0.97). Every other value is a synthetic interpolation.
pub fn fig1_preset() -> (GroundTruth, SimConfig) {
    let n = FIG1_POSITIONS;
    let config = SimConfig {
        model: ModelKind::Pbm,
        num_queries: 3 * n,
        sessions_per_query: 2100,
        positions: n,
        intent_mix: [1.0 / 3.0; 3],
        seed: 1,
        ranking: RankingPolicy::Fixed,
        intent_assignment: IntentAssignment::PerQuery,
        intent_dependent: true,
    };
    let target_rel = |t: IntentLabel| match t {
        IntentLabel::Informational => 0.92,
        _ => 0.96,
    };
    let mut tables: Vec<BaseParams> = IntentLabel::CLASSES
        .iter()
        .map(|&t| {
            BaseParams::Pbm(PbmParams {
                exam: fig1_exam_curve(t, n),
                ..PbmParams::uniform(n, 0.0)
            })
        })
        .collect();
    let mut judgments = Judgments::new();
    let mut query_intents = BTreeMap::new();
    for &intent in &IntentLabel::CLASSES {
        let curve = fig1_exam_curve(intent, n);
        for target in 1..=n {
            let query = fig1_query(intent, target);
            let tr = target_rel(intent);
            let background = if intent == IntentLabel::Navigational && target == 4 {
                let rest: f64 = curve.iter().enumerate().filter(|&(i, _)| i != 3).map(|(_, g)| g).sum();
                (0.97 - curve[3] * tr) / rest
            } else {
                FIG1_BACKGROUND_RELEVANCE
            };
            for j in 0..n {
                let r = if j + 1 == target { tr } else { background };
                tables.iter_mut().for_each(|t| set_doc(t, &query, &doc_id(j), r, 0.0));
                judgments
                    .insert(RelevanceJudgment {
                        query_id: query.clone(),
                        doc_id: doc_id(j),
                        grade: grade_for(r),
                    })
                    .expect("unique fig1 judgments");
            }
            query_intents.insert(query, intent);
        }
    }
    let mut fallback = tables[1].clone();
    if let BaseParams::Pbm(p) = &mut fallback {
        p.exam = (0..n).map(|i| tables.iter().map(|t| exam_at(t, i)).sum::<f64>() / 3.0).collect();
    }
    let transactional = tables.pop().expect("three tables");
    let navigational = tables.pop().expect("three tables");
    let informational = tables.pop().expect("three tables");
    let truth = GroundTruth {
        params: ModelParams::IntentAware(Box::new(IntentAwareParams {
            informational,
            navigational,
            transactional,
            fallback,
        })),
        judgments,
        query_intents,
    };
    (truth, config)
}

fn exam_at(params: &BaseParams, i: usize) -> f64 {
    match params {
        BaseParams::Pbm(p) => p.exam[i],
        _ => unreachable!("fig1 tables are PBM"),
    }
}

/// Query id of the calibrated scenario with the target at 1-based `target`.
pub fn fig1_query(intent: IntentLabel, target: usize) -> String {
    format!("{}-t{target}", intent.code())
}

/// Empirical click rate per position over `sessions`.
pub fn click_rates(sessions: &[&Session], positions: usize) -> Vec<f64> {
    let mut counts = vec![0usize; positions];
    for s in sessions {
        for (i, &c) in s.clicks.iter().enumerate().take(positions) {
            counts[i] += c as usize;
        }
    }
    counts.iter().map(|&c| c as f64 / sessions.len().max(1) as f64).collect()
}
