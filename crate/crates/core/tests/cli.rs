mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tokscope::ranking::ProbabilityMatrix;
use tokscope::synth::{synthetic_world, SyntheticWorldConfig};

fn tokscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tokscope"))
        .args(args)
        .env_remove("TOKSCOPE_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = tokscope(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn encode_then_metrics_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    std::fs::write(&corpus, "hello world\nthe cat sat on the mat\n\nthe end\n").unwrap();
    let gpt2 = common::fixtures().join("gpt2");
    let tokens = dir.path().join("tokens.txt");
    let out = ok(&[
        "encode",
        "--vocab",
        p(&gpt2.join("vocab.json")),
        "--merges",
        p(&gpt2.join("merges.txt")),
        "--input",
        p(&corpus),
        "--out",
        p(&tokens),
        "--threads",
        "2",
    ]);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["n_documents"], 3);
    assert_eq!(summary["metadata"]["log_base"], "e");
    let stream = std::fs::read_to_string(&tokens).unwrap();
    assert!(stream.starts_with("31373 995 "));

    let report = dir.path().join("m.json");
    ok(&["metrics", "--tokens", p(&tokens), "--out", p(&report)]);
    let m = json(&report);
    assert_eq!(m["metrics"]["compression"], summary["n_tokens"]);
    assert_eq!(m["metadata"]["truncation_bound"], 6.0);
    assert_eq!(m["metadata"]["simpson_grid"], 2049);
    assert!(m["metadata"]["timestamp"].is_string());

    let curve = dir.path().join("curve.csv");
    ok(&["export-curve", "--tokens", p(&tokens), "--out", p(&curve)]);
    let text = std::fs::read_to_string(&curve).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rank,count,log_rank,log_count"));
    assert!(lines.next().unwrap().starts_with("1,2,0.0,"));
}

#[test]
fn gen_zipf_honours_seed_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a.txt"),
        dir.path().join("b.txt"),
        dir.path().join("c.txt"),
    );
    let base = [
        "gen-zipf",
        "--n-tokens",
        "5000",
        "--n-types",
        "40",
        "--no-timestamp",
    ];
    let run = |out: &Path, seed: &str, env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_tokscope"));
        cmd.args(base).args(["--seed", seed, "--out", p(out)]);
        match env {
            Some(v) => cmd.env("TOKSCOPE_SEED", v),
            None => cmd.env_remove("TOKSCOPE_SEED"),
        };
        let o = cmd.output().unwrap();
        assert!(o.status.success());
        serde_json::from_slice::<Value>(&o.stdout).unwrap()
    };
    let meta = run(&a, "1", None);
    assert_eq!(meta["metadata"]["seed"], 1);
    assert!(meta["metadata"].get("timestamp").is_none());
    let meta = run(&b, "99", Some("1"));
    assert_eq!(meta["metadata"]["seed"], 1);
    run(&c, "2", None);
    let read = |f: &Path| std::fs::read(f).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn correlate_reports_both_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    std::fs::write(&csv, "metric,score\n1,2\n2,1\n3,4\n4,3\n").unwrap();
    let out = ok(&[
        "correlate",
        "--input",
        p(&csv),
        "--x",
        "metric",
        "--y",
        "score",
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let results = v["results"].as_array().unwrap();
    assert_eq!(results[0]["kind"], "spearman");
    assert!((results[0]["coefficient"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert_eq!(results[1]["kind"], "kendall");
}

#[test]
fn rank_from_published_style_matrix() {
    let published = common::published_rankings();
    let de = &published.languages["de"];
    let n = de.predicted.len();
    let lambda: Vec<f64> = (0..n).map(|k| 2f64.powi((n - k) as i32)).collect();
    let matrix = ProbabilityMatrix::from_ratings(de.predicted.clone(), &lambda).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mpath = dir.path().join("de.json");
    std::fs::write(&mpath, matrix.to_json().unwrap()).unwrap();
    let out_path = dir.path().join("rank.json");
    ok(&[
        "rank",
        "--probabilities",
        p(&mpath),
        "--scale",
        "2.7B",
        "--heldout-language",
        "de",
        "--out",
        p(&out_path),
    ]);
    let v = json(&out_path);
    let predicted: Vec<String> = serde_json::from_value(v["predicted"].clone()).unwrap();
    assert_eq!(predicted, de.predicted);
    let truth: Vec<String> = serde_json::from_value(v["truth"].clone()).unwrap();
    assert_eq!(truth, de.truth);
    assert!((v["kendall_tau"].as_f64().unwrap() - 0.8667).abs() < 0.005);
    assert!((v["p_value_two_sided"].as_f64().unwrap() - 12.0 / 720.0).abs() < 1e-12);
    assert!((v["p_value_one_sided"].as_f64().unwrap() - 6.0 / 720.0).abs() < 1e-12);
}

#[test]
fn predict_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (metrics, fixture) = synthetic_world(&SyntheticWorldConfig::default()).unwrap();
    let mdir = dir.path().join("metrics");
    common::write_metrics_dir(&mdir, &metrics);
    let fpath = dir.path().join("fixture.csv");
    fixture.write_csv(&fpath).unwrap();
    let args = |threads: &'static str| {
        vec![
            "predict".to_string(),
            "--metrics".into(),
            p(&mdir).into(),
            "--fixture".into(),
            p(&fpath).into(),
            "--features".into(),
            "power_law,slope".into(),
            "--no-timestamp".into(),
            "--threads".into(),
            threads.into(),
        ]
    };
    let one = ok(&args("1").iter().map(String::as_str).collect::<Vec<_>>());
    let four = ok(&args("4").iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(one.stdout, four.stdout);
    let report: Value = serde_json::from_slice(&one.stdout).unwrap();
    assert_eq!(report["per_heldout"].as_object().unwrap().len(), 6);
    assert_eq!(report["model"], "logistic");
}

#[test]
fn errors_exit_nonzero_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1 2 x 4").unwrap();
    let out = tokscope(&["metrics", "--tokens", p(&bad)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.txt") && err.contains("entry 3"), "{err}");

    let out = tokscope(&["frobnicate"]);
    assert!(!out.status.success());

    let out = tokscope(&[
        "rank",
        "--probabilities",
        "a.json",
        "--metrics",
        "dir",
        "--heldout-language",
        "de",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot be used with"));

    let out = tokscope(&["rank", "--heldout-language", "de"]);
    assert!(!out.status.success());
}
