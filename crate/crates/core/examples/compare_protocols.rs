//! Both protocols on the same topologies, one table per metric.
//!
//! cargo run --release --example compare_protocols [-- config.toml]

use qgrp::config::{ProtocolKind, ScenarioConfig};
use qgrp::experiment::{figure_csv, run_sweep, ExperimentOptions};
use qgrp::metrics::Metric;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = match std::env::args().nth(1) {
        Some(path) => ScenarioConfig::from_file(path.as_ref())?,
        None => {
            let mut c = ScenarioConfig::default();
            c.experiment.sizes = vec![90, 120];
            c.sim.duration = 30.0;
            c.sim.repetitions = 2;
            c
        }
    };
    let report = run_sweep(&config, &[ProtocolKind::Qgrp, ProtocolKind::Aodv], None, ExperimentOptions::default())?;
    for m in Metric::ALL {
        println!("# {}\n{}", m.column(), figure_csv(&report, m));
    }
    for f in &report.failures {
        eprintln!("failed: {:?}: {}", f.key, f.message);
    }
    Ok(())
}
