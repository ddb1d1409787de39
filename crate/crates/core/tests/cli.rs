use std::path::Path;
use std::process::Command;

use clickbias::cli::run;
use clickbias::models::ModelDocument;

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("clickbias").chain(args.iter().copied()))
}

fn simulate(dir: &Path, name: &str, seed: &str, queries: &str) -> String {
    let out = p(dir, name);
    let code = cli(&[
        "simulate",
        "--queries",
        queries,
        "--sessions-per-query",
        "60",
        "--positions",
        "6",
        "--intent-mix",
        "0.5,0.5,0",
        "--per-query-intent",
        "--intent-dependent",
        "--seed",
        seed,
        "--out",
        &out,
    ]);
    assert_eq!(code, 0);
    out
}

#[test]
fn no_arguments_is_usage_error() {
    let status = Command::new(env!("CARGO_BIN_EXE_clickbias")).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&status.stderr).contains("Usage"));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(cli(&["--help"]), 0);
    assert_eq!(cli(&["--version"]), 0);
    assert_eq!(cli(&["fit", "--help"]), 0);
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(cli(&["fit", "--bogus"]), 1);
    assert_eq!(cli(&["fit", "--model", "xyz", "--sessions", "a", "--out", "b"]), 1);
}

#[test]
fn missing_input_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let code = cli(&["fit", "--model", "pbm", "--sessions", &p(dir.path(), "none.jsonl"), "--out", &p(dir.path(), "m.json")]);
    assert_eq!(code, 2);
}

#[test]
fn bad_tolerance_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = simulate(dir.path(), "s.jsonl", "1", "4");
    let code = cli(&["fit", "--model", "pbm", "--sessions", &s, "--out", &p(dir.path(), "m.json"), "--tol", "0"]);
    assert_eq!(code, 1);
}

#[test]
fn simulate_writes_sidecar_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let s = simulate(dir.path(), "s.jsonl", "5", "3");
    for suffix in [".truth.json", ".judgments.tsv", ".manifest.json"] {
        assert!(Path::new(&format!("{s}{suffix}")).exists(), "{suffix}");
    }
    let lines = std::fs::read_to_string(&s).unwrap().lines().count();
    assert_eq!(lines, 180);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{s}.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config"]["queries"], 3);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a.jsonl", "9", "3");
    let b = simulate(dir.path(), "b.jsonl", "9", "3");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn fit_eval_compare_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = simulate(d, "s.jsonl", "2", "8");
    let j = format!("{s}.judgments.tsv");
    assert_eq!(cli(&["fit", "--model", "pbm", "--sessions", &s, "--out", &p(d, "base.json")]), 0);
    assert_eq!(
        cli(&["fit", "--model", "pbm", "--intent-aware", "--sessions", &s, "--out", &p(d, "ia.json")]),
        0
    );
    let doc = ModelDocument::load(Path::new(&p(d, "ia.json"))).unwrap();
    assert!(doc.intent_aware);
    assert!(doc.fit_report.is_some());

    for (m, e) in [("base.json", "a.eval"), ("ia.json", "b.eval")] {
        let code = cli(&[
            "eval", "--params", &p(d, m), "--sessions", &s, "--judgments", &j, "--out", &p(d, e),
        ]);
        assert_eq!(code, 0);
    }
    let code = cli(&["compare", "--base", &p(d, "a.eval"), "--treat", &p(d, "b.eval"), "--out", &p(d, "c.json")]);
    assert_eq!(code, 0);
    let cmp: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p(d, "c.json")).unwrap()).unwrap();
    assert_eq!(cmp["baseline"]["label"], "PBM");
    assert_eq!(cmp["treatment"]["label"], "IA-PBM");
}

#[test]
fn compare_rejects_different_session_sets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s1 = simulate(d, "s1.jsonl", "1", "4");
    let s2 = simulate(d, "s2.jsonl", "2", "4");
    assert_eq!(cli(&["fit", "--model", "ubm", "--sessions", &s1, "--out", &p(d, "m.json")]), 0);
    assert_eq!(cli(&["eval", "--params", &p(d, "m.json"), "--sessions", &s1, "--out", &p(d, "a.eval")]), 0);
    assert_eq!(cli(&["eval", "--params", &p(d, "m.json"), "--sessions", &s2, "--out", &p(d, "b.eval")]), 0);
    assert_eq!(cli(&["compare", "--base", &p(d, "a.eval"), "--treat", &p(d, "b.eval")]), 2);
}

#[test]
fn alternating_fit_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = simulate(d, "s.jsonl", "3", "5");
    let code = cli(&["fit", "--model", "dbn", "--alternating", "--sessions", &s, "--out", &p(d, "m.json")]);
    assert_eq!(code, 0);
    let doc = ModelDocument::load(Path::new(&p(d, "m.json"))).unwrap();
    assert!(doc.fit_report.unwrap().alternating);
}

#[test]
fn classify_train_then_apply() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = simulate(d, "s.jsonl", "4", "6");
    let labels = "q0000\tinf\nq0001\tnav\nq0002\tinf\nq0003\tnav\n";
    std::fs::write(p(d, "train.tsv"), labels).unwrap();
    let code = cli(&[
        "classify",
        "--sessions",
        &s,
        "--labels",
        &p(d, "train.tsv"),
        "--model-out",
        &p(d, "clf.json"),
        "--labels-out",
        &p(d, "pred.tsv"),
        "--out",
        &p(d, "l1.jsonl"),
    ]);
    assert_eq!(code, 0);
    let code = cli(&["classify", "--sessions", &s, "--model", &p(d, "clf.json"), "--out", &p(d, "l2.jsonl")]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read(p(d, "l1.jsonl")).unwrap(), std::fs::read(p(d, "l2.jsonl")).unwrap());
    let pred = std::fs::read_to_string(p(d, "pred.tsv")).unwrap();
    assert_eq!(pred.lines().count(), 6);
}

#[test]
fn classify_needs_labels_or_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cli(&["classify", "--sessions", &p(d, "s.jsonl"), "--out", &p(d, "o.jsonl")]), 1);
}

#[test]
fn ingest_aol_log() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let log = "AnonID\tQuery\tQueryTime\tItemRank\tClickURL\n\
               7\tcheap flights\t2006-03-01 10:00:00\t2\thttp://a.com\n\
               7\tcheap flights\t2006-03-01 10:00:30\t1\thttp://b.com\n\
               7\tnews\t2006-03-01 12:00:00\t\t\n\
               garbage\n";
    std::fs::write(p(d, "log.txt"), log).unwrap();
    assert_eq!(cli(&["ingest", "--input", &p(d, "log.txt"), "--out", &p(d, "s.jsonl")]), 2);
    let code = cli(&["ingest", "--input", &p(d, "log.txt"), "--out", &p(d, "s.jsonl"), "--skip-malformed"]);
    assert_eq!(code, 0);
    let sessions = clickbias::log_store::read_sessions(Path::new(&p(d, "s.jsonl"))).unwrap();
    assert!(!sessions.is_empty());
    assert!(sessions.iter().any(|s| s.query_id == "cheap flights" && s.num_clicks() == 2));
}

#[test]
fn fit_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = simulate(d, "s.jsonl", "6", "5");
    for out in ["a.json", "b.json"] {
        assert_eq!(cli(&["fit", "--model", "dbn", "--intent-aware", "--sessions", &s, "--out", &p(d, out)]), 0);
    }
    assert_eq!(std::fs::read(p(d, "a.json")).unwrap(), std::fs::read(p(d, "b.json")).unwrap());
}
