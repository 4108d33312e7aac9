//! Batch runner: sweeps protocols × topology sizes × repetitions, computes
//! metrics and writes the CSV outputs.
//!
//! Output files in the target directory:
//!
//! - `runs.csv`: `protocol,n,seed,throughput_bps,pdr,mean_delay_s,
//!   mean_residual_energy_j,energy_efficiency_j_per_pkt,std_energy_deviation_j`,
//!   one row per run followed by a `seed=avg` row per (protocol, n); undefined
//!   values are written as `NA`
//! - `aggregate.csv`: per (protocol, n), mean, standard error and undefined
//!   count of every metric
//! - `fig2_throughput.csv` … `fig7_energy_std.csv`: one metric against `n`,
//!   one mean/stderr column pair per protocol
//! - `failures.csv`: only when some run failed
//! - `logs/<protocol>_n<n>_seed<seed>.log`: event logs, on request

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::aodv::AodvNode;
use crate::config::{ConfigError, ProtocolKind, ScenarioConfig};
use crate::dcf::CollisionTable;
use crate::metrics::{aggregate, compute_metrics, Aggregate, Cell, Metric, RunMetrics};
use crate::qgrp::QgrpNode;
use crate::sim::{RunOutput, SimSetup, Simulator};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// Runs one protocol over a prepared setup.
pub fn simulate(protocol: ProtocolKind, setup: &SimSetup, config: &ScenarioConfig) -> RunOutput {
    match protocol {
        ProtocolKind::Qgrp => {
            let c = config.qgrp_config();
            Simulator::<QgrpNode>::new(setup, &c).run()
        }
        ProtocolKind::Aodv => {
            let c = config.aodv_config();
            Simulator::<AodvNode>::new(setup, &c).run()
        }
    }
}

/// Identifies one run of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunKey {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub seed: u64,
    pub repetition: u32,
}

/// Runs a single sweep point and returns its metrics and output.
pub fn run_one(
    config: &ScenarioConfig,
    table: &CollisionTable,
    key: RunKey,
) -> Result<(RunMetrics, RunOutput), ConfigError> {
    let setup = config.sim_setup(key.n, key.repetition, table)?;
    let out = simulate(key.protocol, &setup, config);
    Ok((compute_metrics(&out.log, config.window()), out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExperimentOptions {
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    pub write_logs: bool,
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub key: RunKey,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub runs: Vec<(RunKey, RunMetrics)>,
    pub failures: Vec<Failure>,
    pub aggregates: BTreeMap<(ProtocolKind, usize), Aggregate>,
}

impl ExperimentReport {
    pub fn aggregate(&self, protocol: ProtocolKind, n: usize) -> Option<&Aggregate> {
        self.aggregates.get(&(protocol, n))
    }
}

/// Every run of the sweep, in output order.
pub fn sweep_keys(config: &ScenarioConfig, protocols: &[ProtocolKind]) -> Vec<RunKey> {
    let mut protocols = protocols.to_vec();
    protocols.sort();
    protocols.dedup();
    let mut sizes = config.sizes();
    sizes.sort();
    sizes.dedup();
    let mut keys = Vec::new();
    for &protocol in &protocols {
        for &n in &sizes {
            for repetition in 0..config.sim.repetitions {
                keys.push(RunKey { protocol, n, seed: config.run_seed(repetition), repetition });
            }
        }
    }
    keys
}

fn log_path(dir: &Path, key: &RunKey) -> PathBuf {
    dir.join("logs").join(format!("{}_n{}_seed{}.log", key.protocol, key.n, key.seed))
}

/// Runs the sweep without writing anything unless `out_dir` is given.
pub fn run_sweep(
    config: &ScenarioConfig,
    protocols: &[ProtocolKind],
    out_dir: Option<&Path>,
    options: ExperimentOptions,
) -> Result<ExperimentReport, ExperimentError> {
    let table = config.collision_table()?;
    let keys = sweep_keys(config, protocols);
    if let (Some(dir), true) = (out_dir, options.write_logs) {
        let logs = dir.join("logs");
        std::fs::create_dir_all(&logs).map_err(io_err(&logs))?;
    }
    let job = |key: &RunKey| -> Result<RunMetrics, String> {
        let result = catch_unwind(AssertUnwindSafe(|| run_one(config, &table, *key)));
        match result {
            Ok(Ok((metrics, out))) => {
                if let (Some(dir), true) = (out_dir, options.write_logs) {
                    let path = log_path(dir, key);
                    std::fs::write(&path, out.log.to_text()).map_err(|e| format!("{}: {e}", path.display()))?;
                }
                Ok(metrics)
            }
            Ok(Err(e)) => Err(e.to_string()),
            Err(panic) => Err(panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "run panicked".into())),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let results: Vec<Result<RunMetrics, String>> = pool.install(|| keys.par_iter().map(job).collect());

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (key, r) in keys.into_iter().zip(results) {
        match r {
            Ok(m) => runs.push((key, m)),
            Err(message) => failures.push(Failure { key, message }),
        }
    }
    let mut groups: BTreeMap<(ProtocolKind, usize), Vec<RunMetrics>> = BTreeMap::new();
    for (k, m) in &runs {
        groups.entry((k.protocol, k.n)).or_default().push(*m);
    }
    let aggregates = groups.into_iter().map(|(g, ms)| (g, aggregate(&ms))).collect();
    Ok(ExperimentReport { runs, failures, aggregates })
}

fn metric_header() -> Vec<&'static str> {
    Metric::ALL.iter().map(|m| m.column()).collect()
}

pub fn runs_csv(report: &ExperimentReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["protocol", "n", "seed"];
    header.extend(metric_header());
    w.write_record(&header).expect("in-memory write");
    let mut last: Option<(ProtocolKind, usize)> = None;
    let flush_avg = |w: &mut csv::Writer<Vec<u8>>, g: (ProtocolKind, usize)| {
        let agg = &report.aggregates[&g];
        let mut row = vec![g.0.to_string(), g.1.to_string(), "avg".to_string()];
        row.extend(Metric::ALL.iter().map(|m| Cell(agg.mean(*m)).to_string()));
        w.write_record(&row).expect("in-memory write");
    };
    for (k, m) in &report.runs {
        let g = (k.protocol, k.n);
        if let Some(prev) = last.filter(|p| *p != g) {
            flush_avg(&mut w, prev);
        }
        last = Some(g);
        let mut row = vec![k.protocol.to_string(), k.n.to_string(), k.seed.to_string()];
        row.extend(Metric::ALL.iter().map(|x| Cell(m.get(*x)).to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    if let Some(g) = last {
        flush_avg(&mut w, g);
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn aggregate_csv(report: &ExperimentReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["protocol".to_string(), "n".to_string(), "runs".to_string()];
    for m in Metric::ALL {
        header.push(format!("{}_mean", m.column()));
        header.push(format!("{}_stderr", m.column()));
        header.push(format!("{}_na", m.column()));
    }
    w.write_record(&header).expect("in-memory write");
    for ((p, n), agg) in &report.aggregates {
        let mut row = vec![p.to_string(), n.to_string(), agg.runs.to_string()];
        for m in Metric::ALL {
            let s = agg.metrics[&m];
            row.push(Cell(s.mean).to_string());
            row.push(Cell(s.stderr).to_string());
            row.push(s.undefined.to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Plot data for one metric: `n` against each protocol's mean and stderr.
pub fn figure_csv(report: &ExperimentReport, metric: Metric) -> String {
    let mut protocols: Vec<ProtocolKind> = report.aggregates.keys().map(|(p, _)| *p).collect();
    protocols.dedup();
    let mut sizes: Vec<usize> = report.aggregates.keys().map(|(_, n)| *n).collect();
    sizes.sort();
    sizes.dedup();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["n".to_string()];
    for p in &protocols {
        header.push(format!("{p}_mean"));
        header.push(format!("{p}_stderr"));
    }
    w.write_record(&header).expect("in-memory write");
    for n in sizes {
        let mut row = vec![n.to_string()];
        for p in &protocols {
            let s = report.aggregates.get(&(*p, n)).map(|a| a.metrics[&metric]);
            row.push(Cell(s.and_then(|s| s.mean)).to_string());
            row.push(Cell(s.and_then(|s| s.stderr)).to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn failures_csv(report: &ExperimentReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["protocol", "n", "seed", "error"]).expect("in-memory write");
    for f in &report.failures {
        w.write_record([f.key.protocol.to_string(), f.key.n.to_string(), f.key.seed.to_string(), f.message.clone()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Writes every CSV output of `report` into `dir`.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = vec![("runs.csv".to_string(), runs_csv(report)), ("aggregate.csv".to_string(), aggregate_csv(report))];
    for m in Metric::ALL {
        files.push((m.figure_file().to_string(), figure_csv(report, m)));
    }
    if !report.failures.is_empty() {
        files.push(("failures.csv".to_string(), failures_csv(report)));
    }
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Runs the sweep and writes its outputs into `dir`.
pub fn run_experiment(
    config: &ScenarioConfig,
    protocols: &[ProtocolKind],
    dir: &Path,
    options: ExperimentOptions,
) -> Result<ExperimentReport, ExperimentError> {
    let report = run_sweep(config, protocols, Some(dir), options)?;
    write_outputs(&report, dir)?;
    Ok(report)
}
