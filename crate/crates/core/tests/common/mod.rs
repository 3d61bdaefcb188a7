#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ergolab::cli::{run, ExperimentConfig, RunOutput};

pub fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load_config(name: &str) -> ExperimentConfig {
    let text = std::fs::read_to_string(config_path(name)).unwrap();
    ExperimentConfig::from_toml(&text).unwrap()
}

/// Runs a shipped config into a fresh directory.
pub fn run_config(name: &str) -> (tempfile::TempDir, RunOutput) {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&load_config(name), None, dir.path()).unwrap();
    (dir, out)
}

fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares CSV text with a golden file cell by cell; numeric cells may differ
/// by `tol` relative. With `ERGOLAB_BLESS=1` the golden file is rewritten.
pub fn check_golden(name: &str, actual: &str, tol: f64) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var("ERGOLAB_BLESS").is_ok_and(|v| v == "1") {
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let (el, al): (Vec<&str>, Vec<&str>) = (expected.lines().collect(), actual.lines().collect());
    if el.len() != al.len() {
        return Err(format!("{name}: {} lines, golden has {}", al.len(), el.len()));
    }
    for (i, (e, a)) in el.iter().zip(&al).enumerate() {
        let (ec, ac): (Vec<&str>, Vec<&str>) = (e.split(',').collect(), a.split(',').collect());
        if ec.len() != ac.len() {
            return Err(format!("{name}:{}: column count differs", i + 1));
        }
        for (x, y) in ec.iter().zip(&ac) {
            let same = match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(u), Ok(v)) => (u - v).abs() <= tol * u.abs().max(v.abs()).max(1e-300) || u == v,
                _ => x == y,
            };
            if !same {
                return Err(format!("{name}:{}: `{y}` differs from golden `{x}`", i + 1));
            }
        }
    }
    Ok(())
}

/// Numeric column of a CSV by header name; empty cells become `None`.
pub fn csv_column(csv: &str, name: &str) -> Vec<Option<f64>> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(idx).and_then(|v| v.parse().ok())).collect()
}
