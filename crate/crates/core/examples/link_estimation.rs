//! Passive bandwidth estimates for a node with four neighbors.
//!
//! cargo run --example link_estimation

use qgrp::dcf::{CollisionTable, DcfParams};
use qgrp::geometry::Position;
use qgrp::link::{average_backoff_overhead, refresh_estimates, EstimationContext, NeighborReport};

fn main() {
    let table = CollisionTable::published();
    let params = DcfParams::default();
    let ctx = EstimationContext {
        table: &table,
        params: &params,
        density: 100.0,
        b_no: 2e6,
        tx_range: 250.0,
        expiry: 3.0,
        window: 1.0,
    };
    let me = Position::new(500.0, 500.0);
    let reports = [
        NeighborReport { peer: 3, position: Position::new(550.0, 500.0), idle_fraction: 0.95, heard_at: 9.5 },
        NeighborReport { peer: 7, position: Position::new(500.0, 650.0), idle_fraction: 0.60, heard_at: 9.8 },
        NeighborReport { peer: 9, position: Position::new(700.0, 600.0), idle_fraction: 0.90, heard_at: 9.9 },
        // too old
        NeighborReport { peer: 12, position: Position::new(450.0, 450.0), idle_fraction: 1.0, heard_at: 5.0 },
    ];

    for p_c in [0.0, 0.1, 0.25, 0.5] {
        println!("p_c {p_c:.2}: backoff overhead {:.4}", average_backoff_overhead(p_c, &params).unwrap());
    }
    println!();
    for e in refresh_estimates(me, 0.85, 10.0, &reports, &ctx) {
        println!("link to {:>2}: p_c {:.3}, {:>9.0} bit/s", e.peer, e.p_c_used, e.available_bandwidth);
    }
}
