//! Recomputes run metrics from a persisted event log.
//!
//! cargo run --release --example metrics_from_log [-- run.log warm_up duration]

use qgrp::config::ScenarioConfig;
use qgrp::eventlog::{EventLog, Record};
use qgrp::experiment::{run_one, RunKey};
use qgrp::metrics::{compute_metrics, MeasureWindow};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (text, window) = match args.as_slice() {
        [path, warm_up, duration] => (
            std::fs::read_to_string(path)?,
            MeasureWindow { warm_up: warm_up.parse()?, duration: duration.parse()? },
        ),
        _ => {
            let mut c = ScenarioConfig::default();
            c.topology.n = 60;
            c.sim.duration = 20.0;
            let key = RunKey { protocol: c.protocol, n: 60, seed: c.run_seed(0), repetition: 0 };
            let (_, out) = run_one(&c, &c.collision_table()?, key)?;
            (out.log.to_text(), c.window())
        }
    };
    let log = EventLog::parse(&text)?;
    let deaths = log.iter().filter(|e| e.record == Record::Death).count();
    println!("{} records, {deaths} deaths", log.len());
    println!("{:#?}", compute_metrics(&log, window));
    Ok(())
}
