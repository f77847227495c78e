use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn base() -> Value {
    json!({
        "system": {
            "case": "i",
            "dimension": 1,
            "outer": [
                { "scale": "1/8", "translation": 0 },
                { "scale": "1/8", "translation": "7/8" }
            ],
            "p": ["1/20", "19/40", "19/40"],
            "t": ["1/3", "2/3"]
        },
        "r_list": [2],
        "k_list": [1, 10],
        "samples": 5000,
        "restarts": 2,
        "seed": 7
    })
}

fn write(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
    path
}

fn ismq(config: &Path, out: &Path, sub: &str, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ismq"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--subcommand", sub])
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn dims_reports_both_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["r_list"] = json!(["1/100", 20]);
    let out = ismq(&write(dir.path(), &cfg), &dir.path().join("o"), "dims", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("o/dims.csv")).unwrap();
    let regimes: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap())
        .collect();
    assert_eq!(regimes, ["XI1_GREATER", "XI2_GREATER"]);
}

#[test]
fn malformed_p_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["system"]["p"] = json!([0.05, 0.425, 0.425]);
    let out = ismq(&write(dir.path(), &cfg), &dir.path().join("o"), "dims", &[]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("`p`"), "{msg}");
    assert!(msg.contains("0.9"), "{msg}");
}

#[test]
fn missing_seed_is_a_config_error_unless_given_on_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg.as_object_mut().unwrap().remove("seed");
    let path = write(dir.path(), &cfg);
    let out = ismq(&path, &dir.path().join("o"), "dims", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("seed"));
    let out = ismq(&path, &dir.path().join("o"), "dims", &["--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn unknown_names_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), &base());
    let out = ismq(&path, &dir.path().join("o"), "plot", &[]);
    assert_eq!(out.status.code(), Some(2));
    let mut cfg = base();
    cfg["solver"] = json!("secant");
    let out = ismq(&write(dir.path(), &cfg), &dir.path().join("o"), "dims", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bisection"));
}

#[test]
fn cap_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["k_list"] = json!([1e6]);
    cfg["cap"] = json!(10);
    let out = ismq(
        &write(dir.path(), &cfg),
        &dir.path().join("o"),
        "antichain",
        &[],
    );
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn same_regime_crossing_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["crossing"] = json!({ "r_lo": 5, "r_hi": 20 });
    let out = ismq(&write(dir.path(), &cfg), &dir.path().join("o"), "dims", &[]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn verify_fails_on_overlapping_pieces() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["system"]["outer"] = json!([
        { "scale": "1/2", "translation": 0 },
        { "scale": "1/2", "translation": "1/4" }
    ]);
    cfg["k_list"] = json!([1]);
    let out = ismq(
        &write(dir.path(), &cfg),
        &dir.path().join("o"),
        "verify",
        &[],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(
        stderr(&out).contains("model.separation"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn verify_passes_on_the_bundled_configs() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["case_i_eighths.json", "case_ii_eighths.json"] {
        let dir = tempfile::tempdir().unwrap();
        let out = ismq(&configs.join(name), dir.path(), "verify", &[]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stderr(&out));
        let manifest: Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        let checks = manifest["checks"].as_array().unwrap();
        assert!(checks.len() > 20);
        assert!(checks.iter().all(|c| c["status"] == "pass"));
        if name.starts_with("case_ii") {
            assert!(stderr(&out).contains("outer ratios"));
        }
    }
}

#[test]
fn outputs_do_not_depend_on_threads_or_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), &base());
    let runs: Vec<PathBuf> = [("a", "1"), ("b", "1"), ("c", "3")]
        .iter()
        .map(|(name, threads)| {
            let o = dir.path().join(name);
            let out = ismq(&path, &o, "report", &["--threads", threads]);
            assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
            o
        })
        .collect();
    for file in [
        "empirical.csv",
        "lambda_series.csv",
        "bounds.csv",
        "codebooks.csv",
        "dims.csv",
        "manifest.json",
        "summary.md",
    ] {
        let first = std::fs::read(runs[0].join(file)).unwrap();
        for other in &runs[1..] {
            assert_eq!(first, std::fs::read(other.join(file)).unwrap(), "{file}");
        }
    }
}

#[test]
fn fraction_rounding_is_noted() {
    let dir = tempfile::tempdir().unwrap();
    let out = ismq(&write(dir.path(), &base()), dir.path(), "dims", &[]);
    assert_eq!(out.status.code(), Some(0));
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    let notes: Vec<&str> = manifest["notes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| n.as_str().unwrap())
        .collect();
    assert!(
        notes.iter().any(|n| n.starts_with("system.t[0] = 1/3")),
        "{notes:?}"
    );
    assert!(!notes.iter().any(|n| n.contains("1/8")), "{notes:?}");
}
