use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use etsafe_cli::config::LoadedConfig;
use etsafe_cli::experiment::Experiment;
use etsafe_cli::{run_batch, RunOptions};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn etsafe(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etsafe"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

/// A short naive run with a placeholder for the trigger and initial state.
fn short_config(variant: &str, sigma: f64, x0: &str, assertions: &str) -> String {
    format!(
        r#"{{
  "system": {{ "name": "counterexample", "params": {{ "r": 1.2 }} }},
  "certificate": {{ "b": 0.1 }},
  "trigger": {{ "variant": "{variant}", "sigma": {sigma} }},
  "x0": {x0},
  "sim": {{
    "t_final": 1.0, "max_events": 1000, "max_step": 0.05, "rel_tol": 1e-10,
    "abs_tol": 1e-12, "event_tol": 1e-10, "sample_stride": 0.01
  }},
  "assertions": {assertions}
}}
"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn sigma_out_of_range_exits_2_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "bad.json",
        &short_config("signed_naive_safety", 1.5, "[0.5, 0.5]", "{}"),
    );
    let out = etsafe(&["run", "--config", "bad.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:4:"), "{err}");
    assert!(err.contains("sigma"), "{err}");
}

#[test]
fn malformed_json_exits_2_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let text = short_config("strong_issf", 0.9, "[0.5, 0.5]", "{}").replace("\"x0\"", "x0");
    write(tmp.path(), "broken.json", &text);
    let out = etsafe(&["run", "--config", "broken.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.json:5:"));
}

#[test]
fn infeasible_trigger_exits_3() {
    // the naive trigger cannot be satisfied once h < 0
    let tmp = tempfile::tempdir().unwrap();
    let text =
        short_config("naive_safety", 0.5, "[1.1, 0.0]", "{}").replace("\"b\": 0.1", "\"b\": 0.0");
    write(tmp.path(), "outside.json", &text);
    let out = etsafe(
        &["run", "--config", "outside.json", "--out", "o"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let report = std::fs::read_to_string(tmp.path().join("o/report.json")).unwrap();
    assert!(report.contains("\"trigger_infeasible\""));
}

#[test]
fn failed_assertion_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let text = short_config(
        "strong_issf",
        0.9,
        "[0.5, 0.5]",
        r#"{ "miet": true, "shrinkage": true }"#,
    );
    write(tmp.path(), "a.json", &text);
    let out = etsafe(&["run", "--config", "a.json", "--plots", "off"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("assert shrinkage: expected true, got false -> FAILED"),
        "{stdout}"
    );
    // default output directory is named after the config
    assert!(tmp.path().join("out/a/events.csv").exists());
    assert!(!tmp.path().join("out/a/h_vs_t.svg").exists());
}

#[test]
fn miet_assertion_needs_strong_trigger() {
    let tmp = tempfile::tempdir().unwrap();
    let text = short_config(
        "signed_naive_safety",
        0.5,
        "[0.5, 0.5]",
        r#"{ "miet": false }"#,
    );
    write(tmp.path(), "a.json", &text);
    assert_eq!(
        etsafe(&["run", "--config", "a.json"], tmp.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn strong_without_margin_is_rejected() {
    let text =
        short_config("strong_issf", 0.9, "[0.5, 0.5]", "{}").replace("\"b\": 0.1", "\"b\": 0.0");
    let loaded = LoadedConfig::from_source(text, None).unwrap();
    let err = Experiment::build(&loaded).err().unwrap();
    assert_eq!(err.line, Some(3));
}

#[test]
fn wrong_state_dimension_is_rejected() {
    let text = short_config("strong_issf", 0.9, "[0.5]", "{}");
    let loaded = LoadedConfig::from_source(text, None).unwrap();
    assert!(Experiment::build(&loaded)
        .err()
        .unwrap()
        .message
        .contains("x0"));
}

#[test]
fn scaled_beta_shrinks_tau_and_must_dominate_alpha() {
    let base = short_config("strong_issf", 0.9, "[0.5, 0.5]", "{}");
    let scaled = base.replace("\"b\": 0.1", "\"b\": 0.1, \"beta\": { \"scale\": 2.0 }");
    let tau = |text: String| {
        let loaded = LoadedConfig::from_source(text, None).unwrap();
        Experiment::build(&loaded).unwrap().bound.unwrap().tau
    };
    // a larger beta admits larger errors, hence a larger F and a smaller tau
    assert!(tau(scaled) < tau(base));
    let shrunk = short_config("strong_issf", 0.9, "[0.5, 0.5]", "{}")
        .replace("\"b\": 0.1", "\"b\": 0.1, \"beta\": { \"scale\": 0.5 }");
    let loaded = LoadedConfig::from_source(shrunk, None).unwrap();
    assert!(Experiment::build(&loaded).is_err());
}

#[test]
fn report_schema_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "s.json",
        &short_config("strong_issf", 0.9, "[0.5, 0.5]", "{}"),
    );
    let out = etsafe(
        &["--quiet", "run", "--config", "s.json", "--out", "o"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(tmp.path().join("o/report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["min", "median", "max", "count", "pass", "tau"] {
        assert!(v["miet"].get(key).is_some(), "miet.{key}");
    }
    for key in ["min_h", "pass"] {
        assert!(v["safety"].get(key).is_some(), "safety.{key}");
    }
    for key in ["ratio", "flagged"] {
        assert!(v["shrinkage"].get(key).is_some(), "shrinkage.{key}");
    }
    assert!(v["certification"]["min_slack"].is_f64());
    for name in [
        "events.csv",
        "trace.csv",
        "h_vs_t.svg",
        "interevent_times.svg",
        "phase_portrait.svg",
    ] {
        assert!(tmp.path().join("o").join(name).exists(), "{name}");
    }
}

#[test]
fn batch_parallel_matches_sequential() {
    let tmp = tempfile::tempdir().unwrap();
    let paths = vec![
        write(
            tmp.path(),
            "one.json",
            &short_config("strong_issf", 0.9, "[0.5, 0.5]", "{}"),
        ),
        write(
            tmp.path(),
            "two.json",
            &short_config("signed_naive_safety", 0.5, "[0.3, -0.6]", "{}"),
        ),
        write(
            tmp.path(),
            "three.json",
            &short_config("strong_issf", 0.5, "[0.0, 0.9]", "{}"),
        ),
    ];
    let opts = |out: &str| RunOptions {
        out: Some(tmp.path().join(out)),
        plots: false,
    };
    let seq = run_batch(&paths, &opts("seq"), 1).unwrap();
    let par = run_batch(&paths, &opts("par"), 3).unwrap();
    for (s, p) in seq.iter().zip(&par) {
        let (s, p) = (s.as_ref().unwrap(), p.as_ref().unwrap());
        assert_eq!(s.report, p.report);
        let read = |d: &Path| std::fs::read(d.join("events.csv")).unwrap();
        assert_eq!(read(&s.out_dir), read(&p.out_dir));
    }
    assert!(tmp.path().join("par/two/trace.csv").exists());
}

#[test]
fn compare_identical_configs_gives_identical_columns() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "s.json",
        &short_config("strong_issf", 0.9, "[0.5, 0.5]", "{}"),
    );
    let out = etsafe(
        &[
            "compare", "--config", "s.json", "--config", "s.json", "--out", "cmp",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("cmp/compare.json")).unwrap())
            .unwrap();
    assert_eq!(v["identical_interevent_times"], true);
    let a = std::fs::read(tmp.path().join("cmp/a/events.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("cmp/b/events.csv")).unwrap();
    assert_eq!(a, b);
    assert!(tmp.path().join("cmp/interevent_times.svg").exists());
}

#[test]
fn compare_rejects_mismatched_systems() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "a.json",
        &short_config("strong_issf", 0.9, "[0.5, 0.5]", "{}"),
    );
    let other = short_config("strong_issf", 0.9, "[0.5, 0.5]", "{}").replace("1.2", "1.5");
    write(tmp.path(), "b.json", &other);
    let out = etsafe(
        &["compare", "--config", "a.json", "--config", "b.json"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    write(
        tmp.path(),
        "c.json",
        &short_config("strong_issf", 0.9, "[0.4, 0.5]", "{}"),
    );
    let out = etsafe(
        &["compare", "--config", "a.json", "--config", "c.json"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bundled_pair_compares_naive_below_strong() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = configs_dir();
    let naive = dir.join("counterexample_naive.json");
    let strong = dir.join("counterexample_strong.json");
    let out = etsafe(
        &[
            "compare",
            "--config",
            naive.to_str().unwrap(),
            "--config",
            strong.to_str().unwrap(),
            "--out",
            "cmp",
            "--plots",
            "off",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("cmp/compare.json")).unwrap())
            .unwrap();
    let naive_min = v["min_interevent"][0].as_f64().unwrap();
    let strong_min = v["min_interevent"][1].as_f64().unwrap();
    assert!(naive_min < strong_min);
    assert_eq!(v["miet_against_reference"][0], false);
    assert_eq!(v["miet_against_reference"][1], true);
}

#[test]
fn validate_oracle_reports_and_rejects_zero_trials() {
    let tmp = tempfile::tempdir().unwrap();
    let out = etsafe(
        &["validate-oracle", "--seed", "5", "--trials", "20"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 failures"));
    let out = etsafe(&["validate-oracle", "--trials", "0"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}
