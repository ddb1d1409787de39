//! Command-line pipeline: ingest, simulate, classify, fit, eval, compare.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, ErrorKind, Result};
use crate::eval::{compare_models, evaluate, EvalReport, DEFAULT_K_LIST};
use crate::inference::{EmConfig, Fitter};
use crate::intent::{
    classify, clicked_url_counts, evaluate_classifier, extract_features, read_intent_labels, train_classifier,
    write_intent_labels, ClassifierModel, CueLexicon, FeatureConfig, FeatureVector, IntentLabel, TrainConfig,
};
use crate::log_store::{read_aol_file, read_judgments, read_sessions, sessionize, write_sessions, Session, SessionizeConfig};
use crate::models::{ModelDocument, ModelKind};
use crate::simulator::{
    fig1_preset, generate_ground_truth, simulate_sessions, IntentAssignment, RankingPolicy, SimConfig,
};

#[derive(Debug, Parser)]
#[command(name = "clickbias", version, about = "Click models with position and search-intent bias")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Log per-iteration diagnostics to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse an AOL query log into sessions.
    Ingest(IngestArgs),
    /// Generate synthetic sessions with a ground-truth sidecar.
    Simulate(SimulateArgs),
    /// Label each query's sessions with a predicted search intent.
    Classify(ClassifyArgs),
    /// Fit a click model by EM.
    Fit(FitArgs),
    /// Perplexity and NDCG of a fitted model.
    Eval(EvalArgs),
    /// Compare two evaluation reports position by position.
    Compare(CompareArgs),
}

#[derive(Debug, Args, Serialize)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Seconds of inactivity that end a session.
    #[arg(long, default_value_t = 1800)]
    gap_timeout: i64,
    #[arg(long, default_value_t = crate::log_store::DEFAULT_MAX_POSITIONS)]
    max_positions: usize,
    /// Skip malformed lines instead of failing.
    #[arg(long)]
    skip_malformed: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Ranking {
    Fixed,
    Shuffled,
    Logged,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long, default_value = "pbm")]
    model: ModelKind,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value_t = 100)]
    sessions_per_query: usize,
    #[arg(long, default_value_t = 10)]
    positions: usize,
    /// Informational, navigational and transactional proportions.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])]
    intent_mix: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Ranking::Shuffled)]
    ranking: Ranking,
    /// Adjacent-swap probability of the logged ranking.
    #[arg(long, default_value_t = 0.5)]
    swap_prob: f64,
    /// Draw one intent per query instead of per session.
    #[arg(long)]
    per_query_intent: bool,
    /// Give each intent its own examination behaviour.
    #[arg(long)]
    intent_dependent: bool,
    /// Use the calibrated click-rate preset; other generation flags are ignored.
    #[arg(long)]
    fig1: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ClassifyArgs {
    #[arg(long)]
    sessions: PathBuf,
    /// Trained classifier to apply.
    #[arg(long, conflicts_with = "labels")]
    model: Option<PathBuf>,
    /// Query labels to train on (TSV query<TAB>inf|nav|tra).
    #[arg(long, required_unless_present = "model")]
    labels: Option<PathBuf>,
    /// Where to save a newly trained classifier.
    #[arg(long, requires = "labels")]
    model_out: Option<PathBuf>,
    /// Sessions rewritten with predicted intents.
    #[arg(long)]
    out: PathBuf,
    /// Predicted query labels as TSV.
    #[arg(long)]
    labels_out: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    ncs_n: usize,
    #[arg(long, default_value_t = 3)]
    nrs_n: usize,
    #[arg(long, default_value_t = 1024)]
    hash_dim: usize,
    /// Transactional cue words, one per line.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    sessions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    intent_aware: bool,
    /// Alternate relevance and examination phases (implies --intent-aware).
    #[arg(long)]
    alternating: bool,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 50)]
    max_rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    max_positions: usize,
    #[arg(long, default_value_t = 1.0)]
    prior_alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    prior_beta: f64,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    /// Fitted model document.
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    sessions: PathBuf,
    #[arg(long)]
    judgments: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_K_LIST)]
    k_list: Vec<usize>,
    /// Row label; defaults to the model name.
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct CompareArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    treat: PathBuf,
    /// Structured comparison output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a, A: Serialize> {
    subcommand: &'static str,
    version: &'static str,
    config: &'a A,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seed: Option<u64>,
    duration_secs: f64,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

struct Outcome {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seed: Option<u64>,
}

fn manifest<A: Serialize>(name: &'static str, args: &A, outcome: Outcome, start: Instant) -> Result<()> {
    let Some(anchor) = outcome.outputs.first() else { return Ok(()) };
    let path = with_suffix(anchor, ".manifest.json");
    write_json(
        &path,
        &RunManifest {
            subcommand: name,
            version: env!("CARGO_PKG_VERSION"),
            config: args,
            inputs: outcome.inputs,
            outputs: outcome.outputs,
            seed: outcome.seed,
            duration_secs: start.elapsed().as_secs_f64(),
        },
    )
}

fn ingest(args: &IngestArgs) -> Result<Outcome> {
    let read = read_aol_file(&args.input, args.skip_malformed)?;
    let out = sessionize(
        &read.events,
        &SessionizeConfig {
            gap_timeout: args.gap_timeout,
            max_positions: args.max_positions,
        },
    );
    write_sessions(&args.out, &out.sessions)?;
    println!(
        "{} events ({} malformed skipped) -> {} sessions; clicks kept {} of {} ({} beyond position {})",
        read.events.len(),
        read.malformed,
        out.sessions.len(),
        out.retained_clicks,
        out.total_clicks,
        out.dropped_clicks,
        args.max_positions
    );
    Ok(Outcome {
        inputs: vec![args.input.clone()],
        outputs: vec![args.out.clone()],
        seed: None,
    })
}

fn simulate(args: &SimulateArgs) -> Result<Outcome> {
    if args.intent_mix.len() != 3 {
        return Err(Error::Config(format!(
            "--intent-mix takes three comma-separated proportions, got {}",
            args.intent_mix.len()
        )));
    }
    let (truth, config) = if args.fig1 {
        fig1_preset()
    } else {
        let config = SimConfig {
            model: args.model,
            num_queries: args.queries,
            sessions_per_query: args.sessions_per_query,
            positions: args.positions,
            intent_mix: [args.intent_mix[0], args.intent_mix[1], args.intent_mix[2]],
            seed: args.seed,
            ranking: match args.ranking {
                Ranking::Fixed => RankingPolicy::Fixed,
                Ranking::Shuffled => RankingPolicy::Shuffled,
                Ranking::Logged => RankingPolicy::Logged {
                    swap_prob: args.swap_prob,
                },
            },
            intent_assignment: if args.per_query_intent {
                IntentAssignment::PerQuery
            } else {
                IntentAssignment::PerSession
            },
            intent_dependent: args.intent_dependent,
        };
        (generate_ground_truth(&config)?, config)
    };
    let sessions = simulate_sessions(&truth, &config)?;
    write_sessions(&args.out, &sessions)?;
    truth.write_sidecar(&args.out)?;
    println!("{} sessions over {} queries", sessions.len(), config.num_queries);
    Ok(Outcome {
        inputs: vec![],
        outputs: vec![
            args.out.clone(),
            with_suffix(&args.out, ".truth.json"),
            with_suffix(&args.out, ".judgments.tsv"),
        ],
        seed: Some(config.seed),
    })
}

fn query_features(sessions: &[Session], config: &FeatureConfig) -> BTreeMap<String, FeatureVector> {
    let mut by_query: BTreeMap<&str, Vec<&Session>> = BTreeMap::new();
    for s in sessions {
        by_query.entry(&s.query_id).or_default().push(s);
    }
    by_query
        .into_iter()
        .map(|(q, group)| {
            let clicked = clicked_url_counts(&group);
            (q.to_string(), extract_features(q, &group, &clicked, config))
        })
        .collect()
}

fn classify_cmd(args: &ClassifyArgs) -> Result<Outcome> {
    let mut sessions = read_sessions(&args.sessions)?;
    let lexicon = match &args.lexicon {
        Some(path) => CueLexicon::from_file(path)?,
        None => CueLexicon::default(),
    };
    let features = query_features(
        &sessions,
        &FeatureConfig {
            ncs_n: args.ncs_n,
            nrs_n: args.nrs_n,
            hash_dim: args.hash_dim,
            lexicon,
        },
    );
    let mut inputs = vec![args.sessions.clone()];
    let mut outputs = vec![args.out.clone()];
    let model = match (&args.model, &args.labels) {
        (Some(path), _) => {
            inputs.push(path.clone());
            ClassifierModel::load(path)?
        }
        (None, Some(path)) => {
            inputs.push(path.clone());
            let labels = read_intent_labels(path)?;
            let (xs, ys): (Vec<FeatureVector>, Vec<IntentLabel>) = labels
                .iter()
                .filter_map(|(q, &l)| features.get(q).map(|f| (f.clone(), l)))
                .unzip();
            if xs.len() < labels.len() {
                log::warn!("{} labeled queries have no sessions", labels.len() - xs.len());
            }
            let model = train_classifier(
                &xs,
                &ys,
                &TrainConfig {
                    seed: args.seed,
                    ..TrainConfig::default()
                },
            )?;
            if let Some(out) = &args.model_out {
                model.save(out)?;
                outputs.push(out.clone());
            }
            model
        }
        (None, None) => return Err(Error::Config("either --model or --labels is required".into())),
    };
    let mut predicted = BTreeMap::new();
    for (q, f) in &features {
        predicted.insert(q.clone(), classify(&model, f)?.0);
    }
    if let Some(path) = &args.labels {
        let truth = read_intent_labels(path)?;
        let (p, t): (Vec<IntentLabel>, Vec<IntentLabel>) = truth
            .iter()
            .filter_map(|(q, &l)| predicted.get(q).map(|&p| (p, l)))
            .unzip();
        if !t.is_empty() {
            let report = evaluate_classifier(&p, &t)?;
            println!(
                "training fit: macro precision {:.3}, recall {:.3}, F1 {:.3}",
                report.macro_precision, report.macro_recall, report.macro_f1
            );
        }
    }
    for s in &mut sessions {
        s.intent = predicted[&s.query_id];
    }
    write_sessions(&args.out, &sessions)?;
    if let Some(path) = &args.labels_out {
        write_intent_labels(path, &predicted)?;
        outputs.push(path.clone());
    }
    let counts = IntentLabel::CLASSES.map(|c| predicted.values().filter(|&&l| l == c).count());
    println!(
        "{} queries: {} inf, {} nav, {} tra",
        predicted.len(),
        counts[0],
        counts[1],
        counts[2]
    );
    Ok(Outcome {
        inputs,
        outputs,
        seed: Some(args.seed),
    })
}

fn fit(args: &FitArgs, verbose: bool) -> Result<Outcome> {
    let sessions = read_sessions(&args.sessions)?;
    let config = EmConfig {
        tol: args.tol,
        max_iters: args.max_iters,
        prior_alpha: args.prior_alpha,
        prior_beta: args.prior_beta,
        seed: args.seed,
        max_positions: args.max_positions,
        max_rounds: args.max_rounds,
        verbose,
        ..EmConfig::default()
    };
    let (params, report) = Fitter::new(args.model, &config)
        .intent_aware(args.intent_aware || args.alternating)
        .alternating(args.alternating)
        .fit(&sessions)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    println!(
        "{}{}: {} iterations, converged {}, log-likelihood {:.4}",
        if report.intent_aware { "IA-" } else { "" },
        args.model,
        report.iterations,
        report.converged,
        report.data_log_likelihood
    );
    ModelDocument::new(params, Some(report)).save(&args.out)?;
    Ok(Outcome {
        inputs: vec![args.sessions.clone()],
        outputs: vec![args.out.clone()],
        seed: Some(args.seed),
    })
}

fn eval_cmd(args: &EvalArgs) -> Result<Outcome> {
    let doc = ModelDocument::load(&args.params)?;
    let sessions = read_sessions(&args.sessions)?;
    let judgments = args.judgments.as_deref().map(read_judgments).transpose()?;
    let label = args.label.clone().unwrap_or_else(|| {
        let name = doc.model.name().to_uppercase();
        if doc.intent_aware {
            format!("IA-{name}")
        } else {
            name
        }
    });
    let report = evaluate(&label, &doc.params, &sessions, judgments.as_ref(), &args.k_list)?;
    print!("{}", report.to_text());
    write_json(&args.out, &report)?;
    let mut inputs = vec![args.params.clone(), args.sessions.clone()];
    inputs.extend(args.judgments.clone());
    Ok(Outcome {
        inputs,
        outputs: vec![args.out.clone()],
        seed: None,
    })
}

fn compare_cmd(args: &CompareArgs) -> Result<Outcome> {
    let base: EvalReport = read_json(&args.base)?;
    let treat: EvalReport = read_json(&args.treat)?;
    let cmp = compare_models(&base, &treat)?;
    print!("{}", cmp.to_table());
    let mut outputs = Vec::new();
    if let Some(out) = &args.out {
        write_json(out, &cmp)?;
        outputs.push(out.clone());
    }
    Ok(Outcome {
        inputs: vec![args.base.clone(), args.treat.clone()],
        outputs,
        seed: None,
    })
}

fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

fn init_logging(verbose: bool) {
    let level = if verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    log::set_max_level(level);
}

/// Runs one subcommand; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    let start = Instant::now();
    let result = match &cli.command {
        Command::Ingest(a) => ingest(a).and_then(|o| manifest("ingest", a, o, start)),
        Command::Simulate(a) => simulate(a).and_then(|o| manifest("simulate", a, o, start)),
        Command::Classify(a) => classify_cmd(a).and_then(|o| manifest("classify", a, o, start)),
        Command::Fit(a) => fit(a, cli.verbose).and_then(|o| manifest("fit", a, o, start)),
        Command::Eval(a) => eval_cmd(a).and_then(|o| manifest("eval", a, o, start)),
        Command::Compare(a) => compare_cmd(a).and_then(|o| manifest("compare", a, o, start)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}
