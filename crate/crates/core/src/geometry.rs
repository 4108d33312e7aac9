//! Planar geometry used by the routing metric, forwarder selection and the
//! DCF region counts.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in the deployment plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    fn to(self, other: Position) -> (f64, f64) {
        (other.x - self.x, other.y - self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("neighbor coincides with the deciding node")]
    DegenerateNeighbor,
    #[error("deciding node coincides with the sink")]
    DegenerateSink,
}

/// The three positions a forwarding decision at `self_pos` looks at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoContext {
    pub self_pos: Position,
    pub neighbor_pos: Position,
    pub sink_pos: Position,
}

/// Euclidean distance in meters.
pub fn distance(a: Position, b: Position) -> f64 {
    (b.x - a.x).hypot(b.y - a.y)
}

/// Angle between `self -> sink` and `self -> neighbor`, in `[0, π]`.
pub fn deviation_angle(ctx: &GeoContext) -> Result<f64, GeometryError> {
    if ctx.self_pos == ctx.sink_pos {
        return Err(GeometryError::DegenerateSink);
    }
    if ctx.self_pos == ctx.neighbor_pos {
        return Err(GeometryError::DegenerateNeighbor);
    }
    let (sx, sy) = ctx.self_pos.to(ctx.sink_pos);
    let (nx, ny) = ctx.self_pos.to(ctx.neighbor_pos);
    // atan2 of cross and dot stays accurate near 0 and π, unlike acos.
    let cross = sx * ny - sy * nx;
    let dot = sx * nx + sy * ny;
    Ok(cross.abs().atan2(dot))
}

/// True when the neighbor lies within ±π/2 of the straight line to the sink.
pub fn is_forward_progress(ctx: &GeoContext) -> Result<bool, GeometryError> {
    Ok(deviation_angle(ctx)? <= PI / 2.0)
}

/// Area of the intersection of two disks whose centers are `separation` apart.
pub fn lens_area(r1: f64, r2: f64, separation: f64) -> f64 {
    let d = separation.abs();
    if d >= r1 + r2 {
        return 0.0;
    }
    let small = r1.min(r2);
    if d <= (r1 - r2).abs() {
        return PI * small * small;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let kite = 0.5 * ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0).sqrt();
    (r1 * r1 * a1 + r2 * r2 * a2 - kite).clamp(0.0, PI * small * small)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ctx(s: (f64, f64), n: (f64, f64), k: (f64, f64)) -> GeoContext {
        GeoContext {
            self_pos: Position::new(s.0, s.1),
            neighbor_pos: Position::new(n.0, n.1),
            sink_pos: Position::new(k.0, k.1),
        }
    }

    #[test]
    fn distance_examples() {
        let o = Position::new(0.0, 0.0);
        assert_eq!(distance(o, o), 0.0);
        assert_eq!(distance(o, Position::new(3.0, 4.0)), 5.0);
    }

    #[test]
    fn deviation_examples() {
        let a = deviation_angle(&ctx((0., 0.), (5., 0.), (10., 0.))).unwrap();
        assert_eq!(a, 0.0);
        let a = deviation_angle(&ctx((0., 0.), (0., 5.), (10., 0.))).unwrap();
        assert_relative_eq!(a, PI / 2.0, epsilon = 1e-15);
        let a = deviation_angle(&ctx((0., 0.), (-5., 0.), (10., 0.))).unwrap();
        assert_relative_eq!(a, PI, epsilon = 1e-15);
    }

    #[test]
    fn forward_progress_boundary() {
        assert!(is_forward_progress(&ctx((0., 0.), (0., 5.), (10., 0.))).unwrap());
        assert!(!is_forward_progress(&ctx((0., 0.), (-5., 0.), (10., 0.))).unwrap());
        assert!(is_forward_progress(&ctx((0., 0.), (5., 0.), (10., 0.))).unwrap());
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            deviation_angle(&ctx((1., 1.), (1., 1.), (10., 0.))),
            Err(GeometryError::DegenerateNeighbor)
        );
        assert_eq!(
            deviation_angle(&ctx((1., 1.), (2., 1.), (1., 1.))),
            Err(GeometryError::DegenerateSink)
        );
    }

    #[test]
    fn lens_edge_cases() {
        assert_relative_eq!(lens_area(250.0, 250.0, 0.0), PI * 250.0 * 250.0);
        assert_eq!(lens_area(250.0, 250.0, 500.0), 0.0);
        assert_eq!(lens_area(250.0, 100.0, 600.0), 0.0);
        // contained disk
        assert_relative_eq!(lens_area(550.0, 250.0, 250.0), PI * 250.0 * 250.0);
        // equal radii at separation R: 2R²(π/3 − √3/4)
        let r: f64 = 250.0;
        let expected = 2.0 * r * r * (PI / 3.0 - 3f64.sqrt() / 4.0);
        assert_relative_eq!(lens_area(r, r, r), expected, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn distance_matches_component_arithmetic(
            ax in -1e4..1e4f64, ay in -1e4..1e4f64, bx in -1e4..1e4f64, by in -1e4..1e4f64,
        ) {
            let a = Position::new(ax, ay);
            let b = Position::new(bx, by);
            let dx = bx - ax;
            let dy = by - ay;
            let oracle = (dx * dx + dy * dy).sqrt();
            let d = distance(a, b);
            prop_assert!((d - oracle).abs() <= 1e-12 * oracle.max(1e-300));
            prop_assert_eq!(d, distance(b, a));
        }

        #[test]
        fn deviation_invariant_under_rigid_motion(
            s in (-500.0..500.0f64, -500.0..500.0f64),
            n in (-500.0..500.0f64, -500.0..500.0f64),
            k in (-500.0..500.0f64, -500.0..500.0f64),
            tx in -1e3..1e3f64, ty in -1e3..1e3f64, rot in 0.0..(2.0 * PI),
        ) {
            prop_assume!(distance(Position::new(s.0, s.1), Position::new(n.0, n.1)) > 1e-3);
            prop_assume!(distance(Position::new(s.0, s.1), Position::new(k.0, k.1)) > 1e-3);
            let base = deviation_angle(&ctx(s, n, k)).unwrap();
            let (c, sn) = (rot.cos(), rot.sin());
            let m = |p: (f64, f64)| (c * p.0 - sn * p.1 + tx, sn * p.0 + c * p.1 + ty);
            let moved = deviation_angle(&ctx(m(s), m(n), m(k))).unwrap();
            prop_assert!((base - moved).abs() < 1e-9);
            prop_assert!((0.0..=PI).contains(&base));
        }

        #[test]
        fn forward_progress_matches_dot_sign(
            n in (-300.0..300.0f64, -300.0..300.0f64),
            k in (-1000.0..1000.0f64, -1000.0..1000.0f64),
        ) {
            prop_assume!(n.0.abs() + n.1.abs() > 1e-6 && k.0.abs() + k.1.abs() > 1e-6);
            let dot = n.0 * k.0 + n.1 * k.1;
            // stay off the exact boundary where rounding decides
            prop_assume!(dot.abs() > 1e-6);
            let fwd = is_forward_progress(&ctx((0., 0.), n, k)).unwrap();
            prop_assert_eq!(fwd, dot >= 0.0);
        }
    }
}
