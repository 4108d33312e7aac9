use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qgrp::config::{ProtocolKind, ScenarioConfig};
use qgrp::dcf::{build_table, SolverSettings};
use qgrp::experiment::{figure_csv, run_experiment, run_sweep, write_outputs, ExperimentError, ExperimentOptions, ExperimentReport};
use qgrp::metrics::Metric;

const EXIT_RUN_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(version, about = "Bandwidth- and energy-aware geographic routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured protocol over every size and repetition.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write one event log per run under <output>/logs.
        #[arg(long)]
        logs: bool,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Solve the collision-probability table and write it as CSV.
    SolveDcf {
        #[arg(short, long)]
        output: PathBuf,
        /// Take model parameters and default axes from this config.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Densities in nodes per km².
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        density_axis: Option<Vec<f64>>,
        /// Sender-receiver distances in meters.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        distance_axis: Option<Vec<f64>>,
    },
    /// Run both protocols and print the per-figure tables.
    Compare {
        #[arg(short, long)]
        config: PathBuf,
        /// Also write all CSV outputs here.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig, ExitCode> {
    ScenarioConfig::from_file(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn report_status(result: Result<ExperimentReport, ExperimentError>) -> Result<ExperimentReport, ExitCode> {
    match result {
        Ok(r) => {
            for f in &r.failures {
                eprintln!("run failed: {} n={} seed={}: {}", f.key.protocol, f.key.n, f.key.seed, f.message);
            }
            Ok(r)
        }
        Err(ExperimentError::Config(e)) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(EXIT_CONFIG))
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(EXIT_RUN_FAILURE))
        }
    }
}

fn finish(report: &ExperimentReport) -> ExitCode {
    if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUN_FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output, logs, jobs } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let options = ExperimentOptions { jobs, write_logs: logs };
            match report_status(run_experiment(&cfg, &[cfg.protocol], &output, options)) {
                Ok(r) => {
                    println!("{} runs written to {}", r.runs.len(), output.display());
                    finish(&r)
                }
                Err(code) => code,
            }
        }
        Command::SolveDcf { output, config, density_axis, distance_axis } => {
            let cfg = match config {
                Some(path) => match load(&path) {
                    Ok(c) => c,
                    Err(code) => return code,
                },
                None => ScenarioConfig::default(),
            };
            let densities = density_axis.unwrap_or_else(|| cfg.dcf.densities.clone());
            let distances = distance_axis.unwrap_or_else(|| cfg.dcf.distances.clone());
            let table = match build_table(&densities, &distances, &cfg.dcf.params(), SolverSettings::default()) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_RUN_FAILURE);
                }
            };
            if let Err(e) = std::fs::write(&output, table.to_csv_string()) {
                eprintln!("error: {}: {e}", output.display());
                return ExitCode::from(EXIT_RUN_FAILURE);
            }
            ExitCode::SUCCESS
        }
        Command::Compare { config, output, jobs } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let options = ExperimentOptions { jobs, write_logs: false };
            let protocols = [ProtocolKind::Qgrp, ProtocolKind::Aodv];
            let report = match report_status(run_sweep(&cfg, &protocols, None, options)) {
                Ok(r) => r,
                Err(code) => return code,
            };
            for m in Metric::ALL {
                println!("# {}", m.column());
                print!("{}", figure_csv(&report, m));
                println!();
            }
            if let Some(dir) = output {
                if let Err(e) = write_outputs(&report, &dir) {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_RUN_FAILURE);
                }
            }
            finish(&report)
        }
    }
}

