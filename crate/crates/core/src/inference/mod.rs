//! Parameter estimation by expectation-maximization.
//!
//! Every model parameter is a Bernoulli probability. The E-step collects the
//! expected successes and trials of each parameter from the posterior over the
//! hidden examination (and, for DBN, satisfaction) variables; the M-step sets
//! each parameter to `(successes + α) / (trials + α + β)`. With pseudo-counts
//! this is MAP-EM, so the quantity that is guaranteed not to decrease is the
//! data log-likelihood plus `Σ α ln θ + β ln(1 - θ)`; that is what
//! [`FitReport::log_likelihood`] traces. With zero pseudo-counts it is the
//! plain log-likelihood.
//!
//! Intent-aware fits keep one parameter set per intent, trained only on
//! sessions of that intent, plus a fallback set trained on every session and
//! used for `Unknown`.

mod kernel;

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use kernel::{Dataset, Layout, Suff};

use crate::error::{Error, Result};
use crate::intent::IntentLabel;
use crate::log_store::{Session, DEFAULT_MAX_POSITIONS};
use crate::models::{BaseParams, IntentAwareParams, ModelKind, ModelParams, PROB_EPS};

/// Sessions per E-step work unit. Fixed so the reduction order never depends
/// on the thread count.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Convergence threshold on the largest absolute parameter change.
    pub tol: f64,
    pub max_iters: usize,
    pub prior_alpha: f64,
    pub prior_beta: f64,
    pub seed: u64,
    /// Amplitude of seeded uniform jitter on the initial values; 0 disables it.
    pub init_jitter: f64,
    pub max_positions: usize,
    /// Outer rounds for the alternating procedure.
    pub max_rounds: usize,
    pub verbose: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            tol: 1e-6,
            max_iters: 200,
            prior_alpha: 1.0,
            prior_beta: 1.0,
            seed: 0,
            init_jitter: 0.0,
            max_positions: DEFAULT_MAX_POSITIONS,
            max_rounds: 50,
            verbose: false,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 || self.max_rounds == 0 {
            return Err(Error::Config("max_iters and max_rounds must be at least 1".into()));
        }
        if !(self.prior_alpha >= 0.0 && self.prior_beta >= 0.0) {
            return Err(Error::Config("pseudo-counts must be non-negative".into()));
        }
        if !(0.0..0.5).contains(&self.init_jitter) {
            return Err(Error::Config("init_jitter must lie in [0, 0.5)".into()));
        }
        if self.max_positions == 0 {
            return Err(Error::Config("max_positions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelKind,
    pub intent_aware: bool,
    pub alternating: bool,
    /// EM iterations (E-step plus M-step) performed.
    pub iterations: usize,
    /// Outer rounds of the alternating procedure; 0 for plain EM.
    pub rounds: usize,
    pub final_max_delta: f64,
    /// Penalized log-likelihood before the first iteration and after each one.
    pub log_likelihood: Vec<f64>,
    /// Unpenalized log-likelihood of the returned parameters.
    pub data_log_likelihood: f64,
    pub converged: bool,
    pub num_sessions: usize,
    /// Sessions the model cannot explain (multi-click sessions under cascade).
    pub skipped_sessions: usize,
    pub warnings: Vec<String>,
}

/// Posteriors `(P(E = 1 | C), P(R = 1 | C))` for one PBM observation.
pub fn pbm_posteriors(gamma: f64, r: f64, clicked: bool) -> (f64, f64) {
    if clicked {
        return (1.0, 1.0);
    }
    let denom = (1.0 - gamma * r).max(PROB_EPS);
    (gamma * (1.0 - r) / denom, r * (1.0 - gamma) / denom)
}

/// Which parameter blocks an M-step updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    All,
    /// Relevance and model-specific parameters; examination held fixed.
    Relevance,
    /// Examination parameters only.
    Examination,
}

struct Table {
    sessions: Vec<usize>,
    theta: Vec<f64>,
    seen: Vec<bool>,
    /// Still iterating in the current phase.
    active: bool,
    /// `theta` changed since `ll` and `stats` were computed.
    dirty: bool,
    ll: f64,
    stats: Vec<Suff>,
    delta: f64,
}

/// Configurable EM run. [`em_fit`] and [`alternating_fit`] cover the common cases.
pub struct Fitter<'a> {
    kind: ModelKind,
    config: &'a EmConfig,
    intent_aware: bool,
    alternating: bool,
    initial: Option<&'a ModelParams>,
    freeze_examination: bool,
}

impl<'a> Fitter<'a> {
    pub fn new(kind: ModelKind, config: &'a EmConfig) -> Self {
        Fitter {
            kind,
            config,
            intent_aware: false,
            alternating: false,
            initial: None,
            freeze_examination: false,
        }
    }

    pub fn intent_aware(mut self, yes: bool) -> Self {
        self.intent_aware = yes;
        self
    }

    /// Alternate relevance-only and examination-only phases instead of joint updates.
    pub fn alternating(mut self, yes: bool) -> Self {
        self.alternating = yes;
        self
    }

    /// Start from these parameters instead of the default initialization.
    pub fn initial(mut self, params: &'a ModelParams) -> Self {
        self.initial = Some(params);
        self
    }

    /// Keep the examination block at its initial values.
    pub fn freeze_examination(mut self, yes: bool) -> Self {
        self.freeze_examination = yes;
        self
    }

    pub fn fit(&self, sessions: &[Session]) -> Result<(ModelParams, FitReport)> {
        self.config.validate()?;
        if sessions.is_empty() {
            return Err(Error::UndefinedInput("cannot fit on an empty session set".into()));
        }
        if let Some(init) = self.initial {
            if init.kind() != self.kind {
                return Err(Error::KindMismatch {
                    expected: self.kind.to_string(),
                    got: init.kind().to_string(),
                });
            }
        }
        let data = Dataset::compile(sessions, self.config.max_positions)?;
        let layout = Layout {
            kind: self.kind,
            max_positions: self.config.max_positions,
            n_pairs: data.pairs.len(),
        };

        let mut warnings = Vec::new();
        let admitted: Vec<usize> = (0..data.sessions.len())
            .filter(|&i| layout.admits(&data.sessions[i]))
            .collect();
        let skipped = data.sessions.len() - admitted.len();
        if skipped > 0 {
            warnings.push(format!("{skipped} sessions cannot be generated by {} and were skipped", self.kind));
        }

        // table order: informational, navigational, transactional, fallback
        let slots: Vec<Option<IntentLabel>> = if self.intent_aware {
            IntentLabel::CLASSES.into_iter().map(Some).chain([None]).collect()
        } else {
            vec![None]
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut tables = Vec::with_capacity(slots.len());
        for slot in &slots {
            let members: Vec<usize> = admitted
                .iter()
                .copied()
                .filter(|&i| slot.is_none_or(|t| data.sessions[i].intent == t))
                .collect();
            if members.is_empty() {
                if let Some(t) = slot {
                    warnings.push(format!("no sessions with intent {t}; its table stays at the prior"));
                }
            }
            let mut theta = match self.initial {
                Some(init) => layout.load(init.for_intent(slot.unwrap_or(IntentLabel::Unknown)), &data.pairs)?,
                None => layout.initial(),
            };
            if self.config.init_jitter > 0.0 {
                let j = self.config.init_jitter;
                theta.iter_mut().for_each(|t| *t = (*t + rng.gen_range(-j..j)).clamp(0.01, 0.99));
            }
            let mut seen = vec![false; data.pairs.len()];
            for &i in &members {
                data.sessions[i].pairs.iter().for_each(|&k| seen[k as usize] = true);
            }
            tables.push(Table {
                sessions: members,
                theta,
                seen,
                active: true,
                dirty: true,
                ll: 0.0,
                stats: Vec::new(),
                delta: f64::INFINITY,
            });
        }

        let engine = Engine {
            data: &data,
            layout,
            alpha: self.config.prior_alpha,
            beta: self.config.prior_beta,
        };

        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut rounds = 0;
        let tol = self.config.tol;

        // Each table iterates until its own change drops below tol, so a table
        // follows the same path it would in a fit of its sessions alone.
        let mut run_phase = |tables: &mut Vec<Table>, phase: Phase, trace: &mut Vec<f64>| -> f64 {
            tables.iter_mut().for_each(|t| t.active = true);
            let mut phase_delta: f64 = 0.0;
            for _ in 0..self.config.max_iters {
                let objective = engine.e_step(tables);
                trace.push(objective);
                iterations += 1;
                let delta = engine.m_step(tables, phase, self.freeze_examination, tol);
                phase_delta = phase_delta.max(delta);
                if self.config.verbose {
                    log::info!("iter {iterations} objective {objective:.6} delta {delta:.3e}");
                }
                if tables.iter().all(|t| !t.active) {
                    break;
                }
            }
            phase_delta
        };

        let converged;
        let last_delta;
        if self.alternating {
            let mut phases = vec![Phase::Relevance];
            if !self.freeze_examination && !layout.exam().is_empty() {
                phases.push(Phase::Examination);
            }
            let mut round_delta = f64::INFINITY;
            while rounds < self.config.max_rounds && round_delta >= tol {
                rounds += 1;
                round_delta = 0.0;
                for &phase in &phases {
                    round_delta = round_delta.max(run_phase(&mut tables, phase, &mut trace));
                }
                log::debug!("round {rounds} max delta {round_delta:.3e}");
            }
            converged = round_delta < tol;
            last_delta = round_delta;
        } else {
            run_phase(&mut tables, Phase::All, &mut trace);
            last_delta = tables.iter().map(|t| t.delta).fold(0.0, f64::max);
            converged = tables.iter().all(|t| !t.active);
        }
        trace.push(engine.e_step(&mut tables));
        let data_ll: f64 = tables.iter().map(|t| t.ll).sum();

        if !converged {
            warnings.push(format!(
                "did not converge: max parameter change {last_delta:.3e} after {iterations} iterations"
            ));
        }
        for (slot, table) in slots.iter().zip(&tables) {
            let uncovered: Vec<String> = engine
                .uncovered_exam(&table.stats)
                .map(|i| i.to_string())
                .collect();
            if !uncovered.is_empty() {
                let who = slot.map_or("all".to_string(), |t| t.to_string());
                warnings.push(format!(
                    "examination parameters {} ({who}) saw no sessions and stay at the prior mean",
                    uncovered.join(",")
                ));
            }
        }
        if trace.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("log-likelihood became non-finite".into()));
        }

        let mut base: Vec<BaseParams> = tables
            .iter()
            .map(|t| layout.materialize(&t.theta, &data.pairs, &t.seen))
            .collect();
        let params = if self.intent_aware {
            let fallback = base.pop().expect("fallback table");
            let transactional = base.pop().expect("transactional table");
            let navigational = base.pop().expect("navigational table");
            let informational = base.pop().expect("informational table");
            ModelParams::IntentAware(Box::new(IntentAwareParams {
                informational,
                navigational,
                transactional,
                fallback,
            }))
        } else {
            ModelParams::Base(base.pop().expect("single table"))
        };

        let report = FitReport {
            model: self.kind,
            intent_aware: self.intent_aware,
            alternating: self.alternating,
            iterations,
            rounds,
            final_max_delta: last_delta,
            log_likelihood: trace,
            data_log_likelihood: data_ll,
            converged,
            num_sessions: sessions.len(),
            skipped_sessions: skipped,
            warnings,
        };
        Ok((params, report))
    }
}

struct Engine<'d> {
    data: &'d Dataset,
    layout: Layout,
    alpha: f64,
    beta: f64,
}

impl Engine<'_> {
    /// Refreshes the statistics of changed tables; returns the penalized objective.
    fn e_step(&self, tables: &mut [Table]) -> f64 {
        let mut objective = 0.0;
        for table in tables.iter_mut() {
            if table.dirty {
                (table.ll, table.stats) = self.table_stats(table);
                table.dirty = false;
            }
            objective += table.ll + self.log_prior(&table.theta);
        }
        objective
    }

    fn table_stats(&self, table: &Table) -> (f64, Vec<Suff>) {
        let n = self.layout.len();
        let partials: Vec<(f64, Vec<Suff>)> = table
            .sessions
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut stats = vec![Suff::default(); n];
                let mut ll = 0.0;
                for &i in chunk {
                    ll += self
                        .layout
                        .accumulate(&table.theta, &self.data.sessions[i], &mut stats);
                }
                (ll, stats)
            })
            .collect();
        let mut total = vec![Suff::default(); n];
        let mut ll = 0.0;
        for (part_ll, part) in partials {
            ll += part_ll;
            for (t, p) in total.iter_mut().zip(part) {
                t.succ += p.succ;
                t.trials += p.trials;
            }
        }
        (ll, total)
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        let mut lp = 0.0;
        for &t in theta {
            if self.alpha > 0.0 {
                lp += self.alpha * t.max(PROB_EPS).ln();
            }
            if self.beta > 0.0 {
                lp += self.beta * (1.0 - t).max(PROB_EPS).ln();
            }
        }
        lp
    }

    fn block(&self, phase: Phase, freeze_exam: bool) -> Vec<Range<usize>> {
        let exam = self.layout.exam();
        let rest = exam.end..self.layout.len();
        match phase {
            Phase::All if freeze_exam => vec![rest],
            Phase::All => vec![exam, rest],
            Phase::Relevance => vec![rest],
            Phase::Examination if freeze_exam => vec![],
            Phase::Examination => vec![exam],
        }
    }

    /// Updates active tables; returns the largest change among them.
    fn m_step(&self, tables: &mut [Table], phase: Phase, freeze_exam: bool, tol: f64) -> f64 {
        let ranges = self.block(phase, freeze_exam);
        let mut step_delta: f64 = 0.0;
        for table in tables.iter_mut().filter(|t| t.active) {
            let mut delta: f64 = 0.0;
            for range in &ranges {
                for k in range.clone() {
                    let den = table.stats[k].trials + self.alpha + self.beta;
                    if den <= 0.0 {
                        continue;
                    }
                    let updated = (table.stats[k].succ + self.alpha) / den;
                    delta = delta.max((updated - table.theta[k]).abs());
                    table.theta[k] = updated;
                }
            }
            table.dirty = true;
            table.delta = delta;
            table.active = delta >= tol;
            step_delta = step_delta.max(delta);
        }
        step_delta
    }

    /// 1-based positions (PBM) or flat cells (UBM) without any observations.
    fn uncovered_exam<'s>(&self, stats: &'s [Suff]) -> impl Iterator<Item = usize> + 's {
        let exam = match self.layout.kind {
            ModelKind::Pbm | ModelKind::Ubm => self.layout.exam(),
            _ => 0..0,
        };
        exam.filter(move |&k| stats[k].trials == 0.0).map(|k| k + 1)
    }
}

/// Joint EM over all parameters.
pub fn em_fit(
    kind: ModelKind,
    sessions: &[Session],
    config: &EmConfig,
    intent_aware: bool,
) -> Result<(ModelParams, FitReport)> {
    Fitter::new(kind, config).intent_aware(intent_aware).fit(sessions)
}

/// Intent-aware fit alternating two phases until neither moves: relevance and
/// model-specific parameters with examination fixed, then examination with
/// everything else fixed.
pub fn alternating_fit(kind: ModelKind, sessions: &[Session], config: &EmConfig) -> Result<(ModelParams, FitReport)> {
    Fitter::new(kind, config)
        .intent_aware(true)
        .alternating(true)
        .fit(sessions)
}
