//! Fits the carrier-sense radius to the reference collision table for both
//! collision models and writes the per-cell deviations of the best fit.
//!
//! cargo run --release --example calibrate [-- docs/calibration.md]

use std::fmt::Write as _;

use qgrp::dcf::{calibrate_carrier_sense_radius, CalibrationReport, CollisionModel, CollisionTable, DcfParams, SolverSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = CollisionTable::published();
    let mut reports: Vec<CalibrationReport> = Vec::new();
    for model in [CollisionModel::Reduced, CollisionModel::Full] {
        let base = DcfParams { collision_model: model, ..DcfParams::default() };
        let r = calibrate_carrier_sense_radius(&reference, &base, (100.0, 1000.0), SolverSettings::default())?;
        println!(
            "{model:?}: R_cs = {:.1} m, SSE = {:.4}, max |dev| = {:.4}",
            r.carrier_sense_radius, r.sum_squared_error, r.max_abs_deviation
        );
        reports.push(r);
    }
    let best = reports
        .iter()
        .min_by(|a, b| a.sum_squared_error.total_cmp(&b.sum_squared_error))
        .expect("two reports");

    let mut md = String::new();
    writeln!(md, "# Collision table calibration\n")?;
    writeln!(md, "Least-squares fit of the carrier-sense radius against the reference table,")?;
    writeln!(md, "all other DCF parameters at their defaults. Regenerate with")?;
    writeln!(md, "`cargo run --release --example calibrate`.\n")?;
    writeln!(md, "| model | R_cs (m) | SSE | max abs deviation |")?;
    writeln!(md, "|---|---|---|---|")?;
    for r in &reports {
        writeln!(
            md,
            "| {:?} | {:.1} | {:.4} | {:.4} |",
            r.model, r.carrier_sense_radius, r.sum_squared_error, r.max_abs_deviation
        )?;
    }
    writeln!(md, "\nBest fit: {:?} model. Per cell, reproduced (reference, deviation):\n", best.model)?;
    let header: Vec<String> = reference.distances().iter().map(|d| format!("{d:.0} m")).collect();
    writeln!(md, "| density (/km²) | {} |", header.join(" | "))?;
    writeln!(md, "|---|{}", "---|".repeat(header.len()))?;
    for (i, den) in reference.densities().iter().enumerate() {
        let cells: Vec<String> = (0..reference.distances().len())
            .map(|j| {
                format!("{:.4} ({:.2}, {:+.4})", best.reproduced.get(i, j), reference.get(i, j), best.deviations[i][j])
            })
            .collect();
        writeln!(md, "| {den:.0} | {} |", cells.join(" | "))?;
    }
    writeln!(
        md,
        "\nThe reproduced grid is monotone in both axes: {}.",
        if best.reproduced.is_monotone() { "yes" } else { "no" }
    )?;

    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/calibration.md").to_string()
    });
    std::fs::write(&path, md)?;
    println!("written to {path}");
    Ok(())
}
