//! `vortex` — evaluate products of moment functionals and drive the
//! stabilizer-rotation Monte Carlo experiments.
//!
//! Exit codes: 0 success (all criteria pass), 1 criteria failed (outputs
//! still written), 2 parse/config error, 3 product-rule violation
//! (mismatched omega(1), unregistered family).

mod eval;
mod sample_check;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vortex_core::experiments::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "vortex", version, about = "Products of moment functionals and their matrix models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a product of moment functionals on a word.
    Eval {
        /// Word or polynomial, e.g. "X0*Y0" or "(X0 - 1/2)*Y1^2".
        #[arg(long)]
        word: String,
        /// free | cfree | cyclic | ordered | indented
        #[arg(long, default_value = "free")]
        mode: String,
        /// JSON file with per-family functionals.
        #[arg(long)]
        spec: PathBuf,
    },
    /// Sampler diagnostics: unitarity and stabilizer residuals, mean check.
    SampleCheck {
        #[arg(long)]
        n: usize,
        /// Number of fixed canonical basis vectors (k < N).
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Monte Carlo samples for the mean check.
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Run an experiment from a JSON config or a named preset.
    Run {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Overrides the config seed and is recorded in all outputs.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for CSV and summary (defaults to ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (VORTEX_THREADS is the fallback).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Render a summary JSON as a table.
    Report {
        #[arg(long)]
        summary: PathBuf,
    },
    /// List shipped experiment presets.
    Presets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Eval { word, mode, spec } => eval::cmd_eval(&word, &mode, &spec),
        Command::SampleCheck { n, k, seed, trials } => {
            sample_check::cmd_sample_check(n, k, seed, trials)
        }
        Command::Run { config, preset, seed, out, threads } => {
            cmd_run(config, preset, seed, out, threads)
        }
        Command::Report { summary } => cmd_report(&summary),
        Command::Presets => {
            for name in experiments::preset_names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn cmd_run(
    config: Option<PathBuf>,
    preset: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> ExitCode {
    let mut cfg: ExperimentConfig = match (&config, &preset) {
        (Some(path), None) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return config_error(format!("{}: {e}", path.display())),
            };
            match serde_json::from_str(&text) {
                Ok(c) => c,
                Err(e) => return config_error(format!("{}: {e}", path.display())),
            }
        }
        (None, Some(name)) => match experiments::preset_config(name) {
            Some(c) => c,
            None => {
                return config_error(format!(
                    "unknown preset `{name}` (see `vortex presets`)"
                ))
            }
        },
        _ => return config_error("exactly one of --config or --preset is required"),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from("out"));
    if cfg.out_csv.is_none() {
        cfg.out_csv = Some(out_dir.join(format!("{}.csv", cfg.kind.name())));
    }
    if cfg.out_summary.is_none() {
        cfg.out_summary = Some(out_dir.join(format!("{}.json", cfg.kind.name())));
    }
    if let Err(e) = cfg.validate() {
        return config_error(e);
    }
    eprintln!(
        "[{}] seed={} dims={:?} trials={} -> {}",
        cfg.kind.name(),
        cfg.seed,
        cfg.dims,
        cfg.trials,
        cfg.out_csv.as_ref().unwrap().display()
    );
    match experiments::run(&cfg) {
        Ok(report) => {
            for c in &report.criteria {
                println!(
                    "[{}] {} {}: {}",
                    cfg.kind.name(),
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.details
                );
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => config_error(e),
    }
}

fn cmd_report(summary: &PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(summary) {
        Ok(t) => t,
        Err(e) => return config_error(format!("{}: {e}", summary.display())),
    };
    let json: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => return config_error(format!("{}: {e}", summary.display())),
    };
    let experiment = json["experiment"].as_str().unwrap_or("?");
    let seed = &json["seed"];
    let passed = json["passed"].as_bool().unwrap_or(false);
    println!("experiment: {experiment}   seed: {seed}   rows: {}", json["rows"]);
    let Some(criteria) = json["criteria"].as_array() else {
        return config_error("summary has no criteria array");
    };
    for c in criteria {
        println!(
            "  {} {}: {}",
            if c["passed"].as_bool().unwrap_or(false) { "PASS" } else { "FAIL" },
            c["name"].as_str().unwrap_or("?"),
            c["details"].as_str().unwrap_or("")
        );
    }
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
