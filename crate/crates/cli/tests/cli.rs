use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn opaque(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opaque")).args(args).output().expect("binary runs")
}

fn cfg(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_string()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

#[test]
fn zero_thresholds_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = opaque(&["threshold-prior", "--n", "0", "--translation", "reorder", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["exit_code"], 1);
    assert!(!out.exists());
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = opaque(&["sbc", "run", "--config", "missing.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["error"], "io");
    assert!(e["message"].as_str().unwrap().contains("missing.json"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(opaque(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(opaque(&["reproduce", "--section", "2.1", "--bogus"]).status.code(), Some(1));
    assert_eq!(opaque(&["reproduce", "--section", "9.9", "--out", "x"]).status.code(), Some(1));
    assert_eq!(opaque(&["--help"]).status.code(), Some(0));
}

#[test]
fn schema_errors_name_the_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"model": {"factors": 3}, "priors": {}}"#).unwrap();
    let out = dir.path().join("r.csv");
    let o = opaque(&["sbc", "run", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["error"], "schema");
    assert_eq!(e["path"], "model.factors");
}

#[test]
fn reproduce_rejection_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = opaque(&["reproduce", "--section", "2.1", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",pass")), "{summary}");
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 1);
    assert_eq!(m["command"], "reproduce");
}

#[test]
fn chol_structure_prints_the_classification() {
    let o = opaque(&["chol-structure", "--pattern", &cfg("bollen-block.json")]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.split_whitespace().eq(["y6", "y4", "determined"])), "{text}");
    assert!(text.lines().any(|l| l.split_whitespace().eq(["y8", "y2", "structural_zero"])), "{text}");
}

#[test]
fn svg_can_be_switched_off() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("c.svg");
    let out = dir.path().join("c.csv");
    let args = [
        "threshold-prior",
        "--n",
        "3",
        "--translation",
        "reorder",
        "--out",
        out.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ];
    let o = Command::new(env!("CARGO_BIN_EXE_opaque"))
        .args(args)
        .env("OPAQUE_NO_SVG", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.exists() && !svg.exists());
    assert_eq!(opaque(&args).status.code(), Some(0));
    assert!(svg.exists());
}

/// Runs `args` with one and with three workers and returns both output
/// directories.
fn both_worker_counts(args: &[&str], file: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for w in ["1", "3"] {
        let d = dir.path().join(format!("w{w}"));
        let out = d.join(file);
        let mut a: Vec<&str> = args.to_vec();
        a.extend(["--workers", w, "--out", out.to_str().unwrap()]);
        let o = opaque(&a);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(d);
    }
    let b = outs.pop().unwrap();
    let a = outs.pop().unwrap();
    (dir, a, b)
}

fn same_file(a: &Path, b: &Path) {
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), "{} differs", a.display());
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let (pattern, priors) = (cfg("bollen-pattern.json"), cfg("bollen-priors.json"));
    let (_d, a, b) = both_worker_counts(
        &["implied-prior", "--pattern", &pattern, "--priors", &priors, "--n", "20000", "--seed", "5"],
        "s.csv",
    );
    same_file(&a.join("s.csv"), &b.join("s.csv"));

    let (_d, a, b) = both_worker_counts(&["threshold-prior", "--n", "3", "--translation", "logincrement", "--seed", "2"], "c.csv");
    same_file(&a.join("c.csv"), &b.join("c.csv"));

    let (model, cfa_priors) = (cfg("cfa-model.json"), cfg("cfa-priors.json"));
    let (_d, a, _b) = both_worker_counts(&["cfa", "simulate", "--model", &model, "--n", "200", "--seed", "3"], "data.csv");
    let data = a.join("data.csv");
    let (_d2, a, b) = both_worker_counts(
        &[
            "cfa", "fit", "--model", &model, "--priors", &cfa_priors, "--data", data.to_str().unwrap(), "--chains", "3", "--warmup",
            "50", "--iters", "50", "--relabel", "--seed", "4",
        ],
        "draws.csv",
    );
    same_file(&a.join("draws.csv"), &b.join("draws.csv"));
}

#[test]
fn sbc_outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(configs().join("sbc-informative.json")).unwrap()).unwrap();
    config["n_sims"] = 6.into();
    config["warmup"] = 50.into();
    config["iters"] = 100.into();
    config["thin"] = 5.into();
    let path = dir.path().join("sbc.json");
    std::fs::write(&path, config.to_string()).unwrap();
    let (_d, a, b) = both_worker_counts(&["sbc", "run", "--config", path.to_str().unwrap(), "--seed", "9"], "report.csv");
    same_file(&a.join("report.csv"), &b.join("report.csv"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_digests"]["config"].as_str().unwrap().len(), 64);
}
