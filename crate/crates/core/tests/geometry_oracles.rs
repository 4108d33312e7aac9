use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qgrp::geometry::lens_area;
use qgrp::sim::generate_topology;

fn monte_carlo_lens(r1: f64, r2: f64, d: f64, samples: u32, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = r1.max(r2);
    let (x0, x1) = (-r1, d + r2);
    let box_area = (x1 - x0) * 2.0 * half;
    let mut hits = 0u32;
    for _ in 0..samples {
        let x = rng.gen_range(x0..x1);
        let y = rng.gen_range(-half..half);
        if x * x + y * y <= r1 * r1 && (x - d) * (x - d) + y * y <= r2 * r2 {
            hits += 1;
        }
    }
    box_area * hits as f64 / samples as f64
}

#[test]
fn lens_area_matches_sampling() {
    for (r1, r2, d) in [(250.0, 250.0, 125.0), (250.0, 550.0, 400.0), (100.0, 80.0, 150.0)] {
        let exact = lens_area(r1, r2, d);
        let sampled = monte_carlo_lens(r1, r2, d, 10_000_000, 9);
        assert!((exact - sampled).abs() / exact < 0.005, "{r1} {r2} {d}: {exact} vs {sampled}");
    }
}

#[test]
fn lens_area_limits() {
    assert_eq!(lens_area(100.0, 50.0, 300.0), 0.0);
    let contained = lens_area(100.0, 50.0, 20.0);
    assert!((contained - std::f64::consts::PI * 2500.0).abs() < 1e-6);
    let touching = lens_area(100.0, 100.0, 200.0);
    assert!(touching.abs() < 1e-9);
}

#[test]
fn default_field_has_expected_degree() {
    let degrees: Vec<f64> = (0..50).map(|s| generate_topology(100, 1000.0, 250.0, s).mean_degree()).collect();
    let mean = degrees.iter().sum::<f64>() / degrees.len() as f64;
    assert!((15.0..=20.0).contains(&mean), "{mean}");
}

#[test]
fn topology_is_seeded() {
    let a = generate_topology(50, 1000.0, 250.0, 3);
    let b = generate_topology(50, 1000.0, 250.0, 3);
    let c = generate_topology(50, 1000.0, 250.0, 4);
    assert_eq!(a.positions, b.positions);
    assert_ne!(a.positions, c.positions);
    assert!(a.positions.iter().all(|p| (0.0..=1000.0).contains(&p.x) && (0.0..=1000.0).contains(&p.y)));
}
