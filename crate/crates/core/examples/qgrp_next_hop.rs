//! Forwarder selection at one node: which neighbors qualify for a flow and
//! which one the composite metric picks.
//!
//! cargo run --example qgrp_next_hop

use qgrp::geometry::Position;
use qgrp::qgrp::{forwarder_set, link_metric, max_grantable, select_next_hop, Candidate, MetricWeights, Vantage};

fn main() {
    let at = Vantage { own: Position::new(200.0, 500.0), sink: Position::new(900.0, 500.0) };
    let weights = MetricWeights::new(0.7, 0.3).unwrap();
    let b_no = 2e6;
    let c = |id, x, y, bw, e| Candidate {
        id,
        position: Position::new(x, y),
        bandwidth: bw,
        residual_energy: e,
        initial_energy: 40.0,
    };
    let candidates = [
        c(1, 400.0, 500.0, 0.6e6, 35.0),
        c(2, 380.0, 620.0, 1.4e6, 39.0),
        c(3, 420.0, 400.0, 1.1e6, 12.0),
        c(4, 100.0, 500.0, 1.9e6, 40.0),
        c(5, 300.0, 720.0, 1.6e6, 38.0),
    ];

    for cand in &candidates {
        let angle = at.angle(cand).map_or("-".to_string(), |a| format!("{:.1}°", a.to_degrees()));
        let score = link_metric(&at, cand, weights, b_no).map_or(f64::NAN, |s| s * 1e3);
        println!("node {}: angle {angle:>7}, bw {:.1} Mbit/s, score {score:.4}", cand.id, cand.bandwidth / 1e6);
    }
    for required in [0.2e6, 0.8e6, 1.5e6, 2.0e6] {
        println!(
            "require {:.1} Mbit/s: forwarders {:?}, next hop {:?}",
            required / 1e6,
            forwarder_set(&at, &candidates, required),
            select_next_hop(&at, &candidates, required, weights, b_no)
        );
    }
    println!("largest grantable: {:.1} Mbit/s", max_grantable(&at, &candidates) / 1e6);
}
