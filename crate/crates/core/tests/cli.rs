mod common;

use std::process::Command;

use common::{check_golden, config_path, run_config};

fn ergolab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergolab"))
}

#[test]
fn sculpt_demo_matches_golden() {
    let (dir, out) = run_config("sculpt.toml");
    let csv = std::fs::read_to_string(dir.path().join("stages.csv")).unwrap();
    check_golden("sculpt-stages.csv", &csv, 1e-9).unwrap();
    assert_eq!(out.report["schema_version"], 1);
    assert_eq!(out.report["results"]["degenerate"], false);
}

#[test]
fn shipped_configs_validate_cleanly() {
    for entry in std::fs::read_dir(config_path("")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let (cfg, diags) = ergolab::cli::validate_text(&text, None);
        assert!(cfg.is_some() && diags.is_empty(), "{}: {diags:?}", path.display());
    }
}

#[test]
fn invalid_config_exits_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[system]\nbackend = \"cycle\"\ndims = [100]\n[tower]\nn = 0\neps = -1.0\n").unwrap();
    let out = ergolab().args(["tower", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["stage"], "validate");
    assert_eq!(err["errors"].as_array().unwrap().len(), 2);
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn infeasible_run_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.toml");
    std::fs::write(&cfg, "[system]\nbackend = \"cycle\"\ndims = [100]\n[tower]\nn = 60\neps = 0.01\n").unwrap();
    let out = ergolab().args(["tower", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["stage"], "run");
}

#[test]
fn check_flag_only_validates() {
    let dir = tempfile::tempdir().unwrap();
    let out = ergolab()
        .args(["tower", "--check", "--config"])
        .arg(config_path("tower.toml"))
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(!dir.path().join("x").exists());
}

#[test]
fn seed_override_changes_hash_and_output() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let st = ergolab()
            .args(["average", "--config"])
            .arg(config_path("average.toml"))
            .args(["--seed", seed, "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(st.status.success());
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        (report, csv)
    };
    let (a, csv_a) = run("1");
    let (b, csv_b) = run("2");
    let (c, _) = run("1");
    assert_eq!(a["seed"], 1);
    assert_ne!(a["config_hash"], b["config_hash"]);
    assert_eq!(a["config_hash"], c["config_hash"]);
    assert_ne!(csv_a, csv_b);
    assert!(a["timings"]["total_ms"].is_number());
    assert_eq!(a["versions"]["ergolab"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn kind_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = ergolab().args(["cover", "--config"]).arg(config_path("tower.toml")).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
