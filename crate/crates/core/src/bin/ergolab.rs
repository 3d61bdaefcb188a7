use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ergolab::cli::{run, validate_text, Kind};

/// Run one reproducible experiment and write `report.json` plus CSV tables.
#[derive(Debug, Parser)]
#[command(name = "ergolab", version)]
struct Args {
    kind: Kind,
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "ergolab-out")]
    out: PathBuf,
    /// Only validate the config.
    #[arg(long)]
    check: bool,
}

fn fail(stage: &str, errors: Vec<String>, code: u8) -> ExitCode {
    let body = serde_json::json!({ "status": "error", "stage": stage, "errors": errors });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail("read", vec![format!("{}: {e}", args.config.display())], 2),
    };
    let (cfg, diags) = validate_text(&text, Some(args.kind));
    let mut cfg = match cfg {
        Some(c) => c,
        None => return fail("validate", diags.iter().map(|d| d.to_string()).collect(), 2),
    };
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    let diags = ergolab::cli::validate(&cfg, Some(args.kind));
    if !diags.is_empty() {
        return fail("validate", diags.iter().map(|d| d.to_string()).collect(), 2);
    }
    if args.check {
        println!("{}: ok", args.config.display());
        return ExitCode::SUCCESS;
    }
    match run(&cfg, Some(args.kind), &args.out) {
        Ok(out) => {
            for f in &out.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail("run", vec![e.to_string()], 1),
    }
}
