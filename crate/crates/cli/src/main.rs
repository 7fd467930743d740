//! `deni`: run seed sweeps, shot sweeps and sensitivity grids, and report
//! on finished runs.
//!
//! Exit status: 0 on success, 1 when the configuration or inputs are
//! unusable, 2 when the sweep finished but some runs (or grid points) failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use deni_core::data::{write_jsonl, SynthSpec};
use deni_core::harness::{report, run_experiment, run_sensitivity, run_shot_sweep, ExperimentConfig, Outcome, SweepSpec};
use deni_core::metrics::ExperimentReport;

#[derive(Parser)]
#[command(name = "deni", version, about = "Fine-tuning instability mitigation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every strategy on every seed and write the reports.
    Run { config: PathBuf },
    /// Repeat an experiment for several shot counts (samples per class).
    Shots {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        shots: Vec<usize>,
    },
    /// Run a delayed-ensemble hyperparameter grid.
    Sweep { sweep: PathBuf },
    /// Rebuild the report files of a finished experiment directory.
    Report {
        dir: PathBuf,
        /// Strategy id the comparison table tests against.
        #[arg(long)]
        baseline: Option<String>,
    },
    /// Write a synthetic dataset described by a JSON spec.
    GenSynth {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Finished, but with recorded failures.
struct Partial(usize);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Partial(n))) => {
            eprintln!("finished with {n} failed run(s) recorded");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<Option<Partial>> {
    match command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let outcome = run_experiment(&cfg)?;
            print_reports(&outcome.reports);
            Ok(partial(outcome.failed_runs))
        }
        Command::Shots { config, shots } => {
            let cfg = load_config(&config)?;
            let mut failed = 0;
            for (k, Outcome { reports, failed_runs }) in run_shot_sweep(&cfg, &shots)? {
                println!("# {k} shots per class");
                print_reports(&reports);
                failed += failed_runs;
            }
            Ok(partial(failed))
        }
        Command::Sweep { sweep } => {
            let spec = SweepSpec::from_file(&sweep).with_context(|| format!("reading {}", sweep.display()))?;
            let points = run_sensitivity(&spec)?;
            let mut failed = 0;
            for (i, p) in points.iter().enumerate() {
                let axes = serde_json::to_string(&p.values)?;
                match &p.result {
                    Ok(r) => {
                        println!("point {i} {axes}: {}", line(r));
                        failed += r.failed.len();
                    }
                    Err(msg) => {
                        println!("point {i} {axes}: invalid ({msg})");
                        failed += 1;
                    }
                }
            }
            Ok(partial(failed))
        }
        Command::Report { dir, baseline } => {
            let reports = report(&dir, baseline.as_deref())?;
            print_reports(&reports);
            Ok(None)
        }
        Command::GenSynth { spec, output } => {
            let text = std::fs::read(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let synth: SynthSpec = serde_json::from_slice(&text).with_context(|| format!("parsing {}", spec.display()))?;
            let ds = synth.generate()?;
            write_jsonl(&ds, &output)?;
            log::info!("wrote {} samples to {}", ds.len(), output.display());
            Ok(None)
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))
}

fn partial(failed: usize) -> Option<Partial> {
    (failed > 0).then_some(Partial(failed))
}

fn line(r: &ExperimentReport) -> String {
    let std = r.std.map(|s| format!("{s:.4}")).unwrap_or_else(|| "n/a".into());
    let mut out = format!("mean {:.4} std {std} cost {} seeds {}", r.mean, r.normalized_cost, r.results.len());
    if !r.failed.is_empty() {
        out.push_str(&format!(" failed {}", r.failed.len()));
    }
    out
}

fn print_reports(reports: &[ExperimentReport]) {
    for r in reports {
        println!("{:<16} {}", r.strategy, line(r));
    }
}
