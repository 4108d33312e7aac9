//! Runs one configured scenario and writes the CSV outputs.
//!
//! cargo run --release --example run_scenario [-- config.toml out_dir]

use std::path::PathBuf;

use qgrp::config::ScenarioConfig;
use qgrp::experiment::{run_experiment, ExperimentOptions};
use qgrp::metrics::Metric;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let config = match args.next() {
        Some(path) => ScenarioConfig::from_file(path.as_ref())?,
        None => {
            let mut c = ScenarioConfig::default();
            c.sim.duration = 30.0;
            c.sim.repetitions = 3;
            c
        }
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("qgrp-run"));

    let report = run_experiment(&config, &[config.protocol], &out, ExperimentOptions { jobs: 0, write_logs: true })?;
    for ((p, n), agg) in &report.aggregates {
        println!("{p} n={n} ({} runs)", agg.runs);
        for m in Metric::ALL {
            let s = agg.metrics[&m];
            println!("  {:<32} {:>14} ± {}", m.column(), fmt(s.mean), fmt(s.stderr));
        }
    }
    println!("outputs in {}", out.display());
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("NA".into(), |x| format!("{x:.4}"))
}
