//! Solves the collision-probability grid and shows one cell in detail.
//!
//! cargo run --example solve_dcf [-- out.csv]

use qgrp::dcf::{build_table, region_counts, solve_fixed_point, DcfParams, SolverSettings, DENSITY_UNIT_M2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = DcfParams::default();
    let densities = [90.0, 100.0, 110.0, 120.0];
    let distances = [100.0, 150.0, 200.0, 250.0];

    let counts = region_counts(100.0 / DENSITY_UNIT_M2, 150.0, &params);
    let s = solve_fixed_point(counts, &params, SolverSettings::default())?;
    println!("density 100/km², 150 m: {counts:?}");
    println!("  p_a = {:.6}, p_c = {:.6} after {} iterations (residual {:.1e})", s.p_a, s.p_c, s.iterations, s.residual);

    let table = build_table(&densities, &distances, &params, SolverSettings::default())?;
    print!("\n{:>8}", "den\\d");
    for d in table.distances() {
        print!("{d:>9.0}");
    }
    println!();
    for (den, row) in table.densities().iter().zip(table.rows()) {
        print!("{den:>8.0}");
        for p in row {
            print!("{p:>9.4}");
        }
        println!();
    }
    println!("monotone: {}", table.is_monotone());

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, table.to_csv_string())?;
        println!("written to {path}");
    }
    Ok(())
}
