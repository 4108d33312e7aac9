use super::{attempt_probability, collision_probability, DcfError, DcfParams, RegionCounts};

/// Step used to move off the attempt-probability singularity.
const SINGULARITY_STEP: f64 = 1e-9;
const MAX_BISECTIONS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: u32,
    /// Damping factor of the fixed-point update.
    pub damping: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iterations: 10_000, damping: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointSolution {
    pub p_a: f64,
    pub p_c: f64,
    /// `|g(p_c) - p_c|` at the returned point.
    pub residual: f64,
    pub iterations: u32,
    /// Whether any attempt probability evaluated at the solution was clamped.
    pub clamped: bool,
}

/// `p_c -> (p_a, collision_probability(p_a))`, stepping just off the
/// singular point of the backoff equation when it is hit exactly.
fn map(p_c: f64, counts: RegionCounts, params: &DcfParams) -> Result<(f64, f64, bool), DcfError> {
    let attempt = match attempt_probability(p_c, params) {
        Ok(a) => a,
        Err(DcfError::DegenerateDenominator { .. }) => attempt_probability(p_c + SINGULARITY_STEP, params)
            .or_else(|_| attempt_probability(p_c - SINGULARITY_STEP, params))?,
        Err(e) => return Err(e),
    };
    Ok((attempt.value, collision_probability(attempt.value, counts, params), attempt.clamped))
}

/// Solves the attempt/collision probability system for one configuration.
///
/// Damped iteration `p <- (1-λ)p + λ g(p)` starting from `p = 0`; if that
/// has not met the tolerance within `max_iterations`, falls back to bisection
/// of `g(p) - p` on `[0, 1]`, which always brackets the root because
/// `g(0) >= 0` and `g(1) <= 1`.
pub fn solve_fixed_point(
    counts: RegionCounts,
    params: &DcfParams,
    settings: SolverSettings,
) -> Result<FixedPointSolution, DcfError> {
    params.validate()?;
    if !(settings.tolerance > 0.0) || settings.max_iterations == 0 {
        return Err(DcfError::InvalidParams("solver needs tol > 0 and max_iter >= 1".into()));
    }
    let tol = settings.tolerance;
    let lambda = settings.damping.clamp(f64::MIN_POSITIVE, 1.0);

    let mut p = 0.0;
    let mut residual = f64::INFINITY;
    for iteration in 0..settings.max_iterations {
        let (p_a, g, clamped) = map(p, counts, params)?;
        residual = (g - p).abs();
        if residual <= tol {
            return Ok(FixedPointSolution { p_a, p_c: p, residual, iterations: iteration, clamped });
        }
        p = ((1.0 - lambda) * p + lambda * g).clamp(0.0, 1.0);
    }

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for step in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let (p_a, g, clamped) = map(mid, counts, params)?;
        let h = g - mid;
        if h.abs() <= tol {
            return Ok(FixedPointSolution {
                p_a,
                p_c: mid,
                residual: h.abs(),
                iterations: settings.max_iterations + step + 1,
                clamped,
            });
        }
        if h > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        residual = h.abs();
    }
    Err(DcfError::NoConvergence { iterations: settings.max_iterations + MAX_BISECTIONS, residual })
}
