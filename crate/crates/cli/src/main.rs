//! `rps`: config-driven portfolio selection experiments.
//!
//! Exit codes: 0 when every requested cell succeeded, 2 when the run
//! completed but some cells or stability checks failed, 1 on config or
//! data errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rps_core::experiment::{
    emit_reports, report, run_experiment, run_selection, run_stability_stage, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "rps", version, about = "Portfolio selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Replace the config's seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write outputs here instead of the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Full experiment: select, weight, rank, evaluate, stability, reports.
    Run { config: PathBuf },
    /// Selection stage only; writes subsets.csv.
    Select { config: PathBuf },
    /// Selection plus weighting; writes weights.csv and frontier files.
    Weight { config: PathBuf },
    /// Ranked train/test evaluation; writes performance.csv and
    /// portfolios.csv.
    Evaluate { config: PathBuf },
    /// Stability checks only; writes stability_noise.csv and
    /// stability_time.csv.
    Stability { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("{failures} requested step(s) failed; see the logs above");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Runs the chosen command and returns how many requested steps failed.
fn execute(cli: Cli) -> rps_core::Result<usize> {
    let (config_path, stability_requested) = match &cli.command {
        Command::Run { config } => (config, true),
        Command::Select { config }
        | Command::Weight { config }
        | Command::Evaluate { config } => (config, false),
        Command::Stability { config } => (config, true),
    };
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.display().to_string();
    }
    if !stability_requested {
        // Stage commands before evaluation never need perturbed reruns.
        config.stability.enabled = false;
    }
    let out_dir = PathBuf::from(&config.output.dir);

    match cli.command {
        Command::Run { .. } => {
            let artifacts = run_experiment(&config)?;
            let mut written = emit_reports(&artifacts, &out_dir)?;
            written.extend(report::emit_dumps(&artifacts, &out_dir)?);
            print_written(&written);
            print_log(&artifacts.log);
            Ok(artifacts.failure_count())
        }
        Command::Select { .. } => {
            let stage = run_selection(&config)?;
            let path = report::write_subsets_csv(&stage.strategies, &out_dir)?;
            print_written(std::slice::from_ref(&path));
            print_log(&stage.log);
            Ok(stage.failures.len())
        }
        Command::Weight { .. } => {
            let artifacts = run_experiment(&config)?;
            let mut written = vec![report::write_weights_csv(&artifacts, &out_dir)?];
            written.extend(report::write_frontier_csvs(&artifacts, &out_dir)?);
            print_written(&written);
            print_log(&artifacts.log);
            Ok(artifacts.failure_count())
        }
        Command::Evaluate { .. } => {
            let artifacts = run_experiment(&config)?;
            let written = vec![
                report::write_performance_csv(&artifacts, &out_dir)?,
                report::write_portfolios_csv(&artifacts, &out_dir)?,
            ];
            print_written(&written);
            print_log(&artifacts.log);
            Ok(artifacts.failure_count())
        }
        Command::Stability { .. } => {
            let stage = run_stability_stage(&config)?;
            let written = report::write_stability_csvs(&stage.outcomes, &out_dir)?;
            print_written(&written);
            print_log(&stage.log);
            Ok(stage.failure_count())
        }
    }
}

fn print_written(paths: &[impl AsRef<Path>]) {
    for p in paths {
        println!("wrote {}", p.as_ref().display());
    }
}

fn print_log(log: &[String]) {
    for line in log {
        println!("{line}");
    }
}
