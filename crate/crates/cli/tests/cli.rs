use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use softverify_cli::RunManifest;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softverify")).args(args).current_dir(cwd).output().unwrap()
}

fn ok_json(args: &[&str], cwd: &Path) -> Value {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    let out = run(&full, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn generate(cwd: &Path, out: &str, workers: &str) {
    let out = run(&["generate", "--config", &fixture("mock_campaign.json"), "--seed", "7", "--out", out, "--workers", workers], cwd);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn no_arguments_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&["fit", "--weighting", "bogus"], tmp.path()).status.code(), Some(2));
}

#[test]
fn runtime_errors_are_json_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["fit", "--input", "missing.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
    assert!(out.stdout.is_empty());

    fs::write(tmp.path().join("three.json"), r#"[{"x":1,"y":1},{"x":2,"y":2},{"x":3,"y":3}]"#).unwrap();
    let out = run(&["fit", "--input", "three.json"], tmp.path());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "fit");
}

#[test]
fn stats_reports_the_headline_snr() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [vec!["stats"], vec!["stats", "--input", &fixture("table2.json")]] {
        let v = ok_json(&args, tmp.path());
        let c = &v["comparisons"][0];
        assert_eq!(format!("{:.1}", c["snr"].as_f64().unwrap()), "4.4");
        assert_eq!(c["tier"], "real");
    }
    let v = ok_json(&["stats", "--input", &fixture("scaling_seeds.json")], tmp.path());
    assert_eq!(v["groups"].as_array().unwrap().len(), 7);
    assert!((v["groups"][6]["summary"]["mean"].as_f64().unwrap() - 46.60).abs() < 0.01);
}

#[test]
fn fit_matches_the_bundled_points() {
    let tmp = tempfile::tempdir().unwrap();
    let a = ok_json(&["fit"], tmp.path());
    let b = ok_json(&["fit", "--input", &fixture("scaling_vllm.json")], tmp.path());
    assert_eq!(a["fit"], b["fit"]);
    assert!(a["fit"]["r_squared"].as_f64().unwrap() > 0.95);
    assert!(a["fit"]["mean_abs_error"].as_f64().unwrap() <= 1.0);
    assert_eq!(a["inversions"].as_array().unwrap().len(), 2);
    let weighted = ok_json(&["fit", "--weighting", "inverse-variance"], tmp.path());
    assert_ne!(weighted["fit"], a["fit"]);
}

#[test]
fn cost_reproduces_the_campaign_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let v = ok_json(&["cost"], tmp.path());
    let vllm: Vec<&Value> = v["campaigns"].as_array().unwrap().iter().filter(|c| c["column"] == "SVG (vLLM)").collect();
    assert_eq!(vllm.len(), 2);
    assert!((vllm[0]["dollars_at_published_total"].as_f64().unwrap() - 74.68).abs() < 0.01);
    assert!((vllm[1]["dollars_at_published_total"].as_f64().unwrap() - 2987.2).abs() < 0.01);
    let out = run(&["cost", "--format", "csv", "--samples", "1"], tmp.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("samples,column,"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn generate_is_deterministic_across_reruns_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "a", "1");
    generate(tmp.path(), "b", "1");
    generate(tmp.path(), "c", "4");
    for shard in ["first_rollouts.jsonl", "second_rollouts.jsonl", "verification.jsonl", "synthetic_prs.jsonl"] {
        let a = fs::read(tmp.path().join("a").join(shard)).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("b").join(shard)).unwrap(), "{shard}");
        assert_eq!(a, fs::read(tmp.path().join("c").join(shard)).unwrap(), "{shard}");
    }
    let m = RunManifest::read(&tmp.path().join("a/manifest.json")).unwrap();
    assert_eq!(m.subcommand, "generate");
    assert_eq!(m.seed, Some(7));
    assert!(m.config.is_some());
    assert!(m.outputs.iter().any(|d| d.path.ends_with("campaign.json")));
}

#[test]
fn verify_and_curate_filter_by_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let w = tmp.path();
    generate(w, "gen", "2");
    let v = ok_json(&["verify", "--input", "gen", "--out", "ver", "--threshold", "0.5"], w);
    let pairs = v["pairs"].as_u64().unwrap();
    let kept = v["kept"].as_u64().unwrap();
    assert_eq!(pairs, 3);
    assert!(kept < pairs);
    let counts: u64 = v["groups"].as_array().unwrap().iter().map(|g| g["count"].as_u64().unwrap()).sum();
    assert_eq!(counts, pairs);

    // Same records whether given as a directory or as two shards.
    let v2 = ok_json(&["verify", "--first", "gen/first_rollouts.jsonl", "--second", "gen/second_rollouts.jsonl", "--out", "ver2"], w);
    assert_eq!(fs::read(w.join("ver/verification.jsonl")).unwrap(), fs::read(w.join("ver2/verification.jsonl")).unwrap());
    assert!(v2["kept"].is_null());

    let c = ok_json(
        &["curate", "--input", "gen/second_rollouts.jsonl", "--verification", "ver/verification.jsonl", "--threshold", "0.5", "--seed", "1", "--out", "cur"],
        w,
    );
    assert_eq!(c["curated"].as_u64().unwrap(), kept);
    assert_eq!(c["stages"][0]["after_threshold"].as_u64().unwrap(), kept);
    let curated = fs::read_to_string(w.join("cur/curated.jsonl")).unwrap();
    assert!(!curated.contains("\"reasoning\""));

    let out = run(&["curate", "--input", "gen/second_rollouts.jsonl", "--threshold", "0.5", "--seed", "1", "--out", "bad"], w);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["verify", "--input", "gen", "--out", "x", "--threshold", "1.5"], w);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn random_curation_is_seed_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let w = tmp.path();
    generate(w, "gen", "1");
    let args = |out: &'static str, seed: &'static str| {
        vec!["curate", "--input", "gen/first_rollouts.jsonl", "--input", "gen/second_rollouts.jsonl", "--selection", "random", "--target", "2", "--seed", seed, "--out", out]
    };
    ok_json(&args("r1", "5"), w);
    ok_json(&args("r2", "5"), w);
    assert_eq!(fs::read(w.join("r1/curated.jsonl")).unwrap(), fs::read(w.join("r2/curated.jsonl")).unwrap());

    fs::write(
        w.join("mix.json"),
        r#"{"mix": {"shares": [{"label": "first_rollouts", "proportion": 0.5}, {"label": "second_rollouts", "proportion": 0.5}], "target_size": 4}}"#,
    )
    .unwrap();
    let v = ok_json(
        &["curate", "--config", "mix.json", "--input", "gen/first_rollouts.jsonl", "--input", "gen/second_rollouts.jsonl", "--seed", "2", "--out", "mixed"],
        w,
    );
    assert_eq!(v["curated"], 4);
}

#[test]
fn plot_data_scaling_has_seven_observed_points() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["plot-data", "scaling", "--format", "csv", "--out", "plots"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("observed,")).count(), 7);
    assert!(text.lines().filter(|l| l.starts_with("fit,")).count() > 10);
    assert_eq!(fs::read_to_string(tmp.path().join("plots/scaling.csv")).unwrap(), text);
    let m = RunManifest::read(&tmp.path().join("plots/manifest.json")).unwrap();
    assert_eq!(m.outputs.len(), 1);

    let out = run(&["plot-data", "truncation"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn manifest_flag_overrides_location() {
    let tmp = tempfile::tempdir().unwrap();
    ok_json(&["--manifest", "runs/fit.json", "fit"], tmp.path());
    let m = RunManifest::read(&tmp.path().join("runs/fit.json")).unwrap();
    assert_eq!(m.subcommand, "fit");
    assert_eq!(m.versions.core, softverify::VERSION);
    assert!(!tmp.path().join("fit.manifest.json").exists());
}

#[test]
fn serve_rejects_a_bad_config_before_binding() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("proxy.json"),
        r#"{"upstream_url": "http://localhost:1/v1", "model_id": "m", "canonical_root": "relative/path"}"#,
    )
    .unwrap();
    let out = run(&["serve", "--config", "proxy.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "proxy");
}
