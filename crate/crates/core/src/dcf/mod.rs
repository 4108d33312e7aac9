//! Analytical 802.11 DCF collision model.
//!
//! A sender's per-virtual-slot attempt probability and its conditional
//! collision probability are coupled: the attempt probability follows from
//! binary exponential backoff given the collision probability, and the
//! collision probability follows from how many contenders share the
//! carrier-sense and receiver-silenced regions. [`solve_fixed_point`] finds the
//! consistent pair; [`CollisionTable`] caches solutions over a density ×
//! distance grid so nodes never solve on-line.

mod solver;
mod table;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::lens_area;

pub use solver::{solve_fixed_point, FixedPointSolution, SolverSettings};
pub use table::{
    build_table, calibrate_carrier_sense_radius, lookup_p_c, CalibrationReport, CollisionTable,
    DENSITY_UNIT_M2,
};

/// Denominators smaller than this are treated as singular in the attempt probability.
pub const SINGULAR_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DcfError {
    #[error("invalid DCF parameters: {0}")]
    InvalidParams(String),
    #[error("attempt probability denominator vanishes at p_c = {p_c}")]
    DegenerateDenominator { p_c: f64 },
    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: u32, residual: f64 },
    #[error("invalid table axes: {0}")]
    InvalidAxes(String),
    #[error("cell (density {density}, distance {distance} m): {source}")]
    Cell {
        density: f64,
        distance: f64,
        #[source]
        source: Box<DcfError>,
    },
    #[error("table csv: {0}")]
    Csv(String),
}

/// Which form of the collision equation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollisionModel {
    /// The receiver-silenced region is assumed to lie inside the sender's
    /// carrier-sense region; only the overlap term counts.
    #[default]
    Reduced,
    /// Adds the carrier-sense-only term weighted by `V / T_v`.
    Full,
}

/// Contention-window and region parameters of the DCF model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DcfParams {
    pub cw_min: u32,
    pub cw_max: u32,
    /// Header + payload duration `V`, seconds.
    pub payload_duration: f64,
    /// Virtual slot `T_v`, seconds.
    pub virtual_slot: f64,
    /// Radius of the sender's carrier-sense region, meters.
    pub carrier_sense_radius: f64,
    /// Radius of the region silenced by the receiver, meters.
    pub interference_radius: f64,
    pub collision_model: CollisionModel,
}

impl Default for DcfParams {
    fn default() -> Self {
        Self {
            cw_min: 32,
            cw_max: 1024,
            payload_duration: 4e-3,
            virtual_slot: 50e-6,
            carrier_sense_radius: 550.0,
            interference_radius: 250.0,
            collision_model: CollisionModel::Reduced,
        }
    }
}

impl DcfParams {
    pub fn validate(&self) -> Result<(), DcfError> {
        let bad = |m: &str| Err(DcfError::InvalidParams(m.to_string()));
        if self.cw_min < 1 {
            return bad("cw_min must be at least 1");
        }
        if self.cw_max < self.cw_min {
            return bad("cw_max must be >= cw_min");
        }
        if !self.cw_max.is_multiple_of(self.cw_min) || !(self.cw_max / self.cw_min).is_power_of_two() {
            return bad("cw_max / cw_min must be a power of two");
        }
        if !(self.payload_duration > 0.0 && self.payload_duration.is_finite()) {
            return bad("payload_duration must be positive");
        }
        if !(self.virtual_slot > 0.0 && self.virtual_slot.is_finite()) {
            return bad("virtual_slot must be positive");
        }
        if !(self.carrier_sense_radius > 0.0 && self.interference_radius > 0.0) {
            return bad("radii must be positive");
        }
        Ok(())
    }

    /// Number of backoff stages, `log2(cw_max / cw_min)`.
    pub fn backoff_stages(&self) -> u32 {
        (self.cw_max / self.cw_min).trailing_zeros()
    }

    /// Contention window of backoff stage `i`.
    pub fn window(&self, stage: u32) -> f64 {
        let w = (self.cw_min as u64) << stage.min(32);
        w.min(self.cw_max as u64) as f64
    }
}

/// Expected contender counts in the two regions around a link.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegionCounts {
    /// Nodes in the carrier-sense region that are also in the receiver's
    /// silenced region.
    pub n_cs_and_in: f64,
    /// Nodes in the carrier-sense region outside the silenced region.
    pub n_cs_minus_in: f64,
}

/// Attempt probability together with whether it had to be clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttemptProbability {
    pub value: f64,
    pub clamped: bool,
}

/// Transmission attempt probability given the conditional collision
/// probability under binary exponential backoff.
pub fn attempt_probability(p_c: f64, params: &DcfParams) -> Result<AttemptProbability, DcfError> {
    let m = params.backoff_stages() as i32;
    let cw_min = params.cw_min as f64;
    let cw_max = params.cw_max as f64;
    let numerator = 2.0 - 4.0 * p_c;
    let denominator =
        (1.0 - 2.0 * p_c) * (cw_max + 1.0) + p_c * cw_min * (1.0 - (2.0 * p_c).powi(m));
    if denominator.abs() < SINGULAR_DENOMINATOR {
        return Err(DcfError::DegenerateDenominator { p_c });
    }
    let raw = numerator / denominator;
    let value = raw.clamp(0.0, 1.0);
    Ok(AttemptProbability { value, clamped: value != raw })
}

/// Conditional collision probability seen by a sender attempting with
/// probability `p_a`. Counts may be fractional.
pub fn collision_probability(p_a: f64, counts: RegionCounts, params: &DcfParams) -> f64 {
    let idle = 1.0 - p_a;
    let mut exponent = counts.n_cs_and_in;
    if params.collision_model == CollisionModel::Full {
        exponent += counts.n_cs_minus_in * params.payload_duration / params.virtual_slot;
    }
    if exponent == 0.0 {
        return 0.0;
    }
    (1.0 - idle.powf(exponent)).clamp(0.0, 1.0)
}

/// Expected contenders for a sender/receiver pair `distance` apart.
/// `density` is in nodes per square meter.
pub fn region_counts(density: f64, distance: f64, params: &DcfParams) -> RegionCounts {
    let r_cs = params.carrier_sense_radius;
    let overlap = lens_area(r_cs, params.interference_radius, distance);
    RegionCounts {
        n_cs_and_in: density * overlap,
        n_cs_minus_in: density * (PI * r_cs * r_cs - overlap).max(0.0),
    }
}
