//! Bandwidth- and energy-aware geographic routing.
//!
//! Route discovery is a greedy unicast walk towards the sink: each hop picks,
//! among neighbors that make forward progress and can carry the flow, the one
//! maximizing a composite metric of link bandwidth, neighbor energy, distance
//! to the sink and deviation from the straight line. The reply reserves
//! bandwidth hop by hop and the source only starts sending once every link
//! accepted the flow.

mod node;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{deviation_angle, distance, GeoContext, GeometryError, Position};
use crate::NodeId;

pub use node::{Hello, Notify, QgrpNode, QgrpPacket, QgrpTimer, Rrep, Rreq, RouteEntry};

/// Smallest deviation angle used in the metric denominator, radians.
pub const MIN_ANGLE: f64 = 0.01;
/// Smallest sink distance used in the metric denominator, meters.
pub const MIN_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum WeightsError {
    #[error("weights must lie in [0, 1], got alpha={alpha}, beta={beta}")]
    OutOfRange { alpha: f64, beta: f64 },
    #[error("alpha + beta must equal 1, got {0}")]
    BadSum(f64),
}

/// Relative importance of bandwidth (`alpha`) and energy (`beta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self { alpha: 0.7, beta: 0.3 }
    }
}

impl MetricWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, WeightsError> {
        let w = Self { alpha, beta };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), WeightsError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.alpha) || !unit(self.beta) {
            return Err(WeightsError::OutOfRange { alpha: self.alpha, beta: self.beta });
        }
        if (self.alpha + self.beta - 1.0).abs() > 1e-12 {
            return Err(WeightsError::BadSum(self.alpha + self.beta));
        }
        Ok(())
    }
}

/// What the deciding node knows about one neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: NodeId,
    pub position: Position,
    /// Available bandwidth of the link to this neighbor, bits/s.
    pub bandwidth: f64,
    pub residual_energy: f64,
    pub initial_energy: f64,
}

/// Positions of the deciding node and the sink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vantage {
    pub own: Position,
    pub sink: Position,
}

impl Vantage {
    fn geo(&self, c: &Candidate) -> GeoContext {
        GeoContext { self_pos: self.own, neighbor_pos: c.position, sink_pos: self.sink }
    }

    /// Deviation angle of the candidate, or `None` when degenerate.
    pub fn angle(&self, c: &Candidate) -> Option<f64> {
        deviation_angle(&self.geo(c)).ok()
    }
}

/// Neighbors making forward progress whose link can carry `required` bits/s.
pub fn forwarder_set(at: &Vantage, candidates: &[Candidate], required: f64) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = candidates
        .iter()
        .filter(|c| c.bandwidth >= required)
        .filter(|c| at.angle(c).is_some_and(|a| a <= std::f64::consts::FRAC_PI_2))
        .map(|c| c.id)
        .collect();
    out.sort_unstable();
    out
}

/// Composite link score, higher is better:
/// `(α·B/B_no + β·E/E_in) / (max(r, 1 m) · max(θ, 0.01))`.
pub fn link_metric(at: &Vantage, c: &Candidate, weights: MetricWeights, b_no: f64) -> Result<f64, GeometryError> {
    let theta = deviation_angle(&at.geo(c))?;
    let r = distance(c.position, at.sink);
    let quality = weights.alpha * (c.bandwidth / b_no) + weights.beta * (c.residual_energy / c.initial_energy);
    Ok(quality / (r.max(MIN_DISTANCE) * theta.max(MIN_ANGLE)))
}

/// Argmax of `scores` over the given ids, lowest id on ties.
pub fn argmax_lowest_id(scores: impl IntoIterator<Item = (NodeId, f64)>) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for (id, s) in scores {
        best = match best {
            Some((bid, bs)) if bs > s || (bs == s && bid < id) => Some((bid, bs)),
            _ => Some((id, s)),
        };
    }
    best.map(|(id, _)| id)
}

/// Best forwarder for a flow needing `required` bits/s, or `None` when no
/// neighbor qualifies.
pub fn select_next_hop(
    at: &Vantage,
    candidates: &[Candidate],
    required: f64,
    weights: MetricWeights,
    b_no: f64,
) -> Option<NodeId> {
    let fw = forwarder_set(at, candidates, required);
    argmax_lowest_id(candidates.iter().filter(|c| fw.binary_search(&c.id).is_ok()).filter_map(|c| {
        link_metric(at, c, weights, b_no).ok().map(|s| (c.id, s))
    }))
}

/// Largest requirement some forward-progress neighbor could still carry, 0
/// when there is none.
pub fn max_grantable(at: &Vantage, candidates: &[Candidate]) -> f64 {
    candidates
        .iter()
        .filter(|c| at.angle(c).is_some_and(|a| a <= std::f64::consts::FRAC_PI_2))
        .map(|c| c.bandwidth)
        .fold(0.0, f64::max)
}

/// Route freshness: a higher destination sequence number wins; at equal
/// sequence numbers only a strictly wider path does.
pub fn is_fresher(stored: (u64, f64), incoming: (u64, f64)) -> bool {
    incoming.0 > stored.0 || (incoming.0 == stored.0 && incoming.1 > stored.1)
}

/// What a source does when a reply tells it the path cannot carry the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourcePolicy {
    /// Keep the requirement and ask again later.
    #[default]
    Retry,
    /// Lower the requirement to what was offered and ask again at once.
    Reduce,
}

/// Route request retries and source buffering, shared with the AODV baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryConfig {
    /// How long a source waits for a reply before retrying, seconds.
    pub rrep_wait: f64,
    pub max_retries: u32,
    /// First retry delay; doubles with each retry.
    pub backoff: f64,
    /// Packets buffered per flow while no route is available.
    pub buffer_capacity: usize,
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self { rrep_wait: 0.5, max_retries: 3, backoff: 0.5, buffer_capacity: 64 }
    }
}

impl RetryConfig {
    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> f64 {
        self.backoff * 2f64.powi(retry.saturating_sub(1) as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HelloConfig {
    pub interval: f64,
    /// Relative jitter applied to each interval.
    pub jitter: f64,
    /// Neighbors unheard for this many intervals are forgotten.
    pub expiry_intervals: f64,
}

impl Default for HelloConfig {
    fn default() -> Self {
        Self { interval: 1.0, jitter: 0.1, expiry_intervals: 3.0 }
    }
}

impl HelloConfig {
    pub fn expiry(&self) -> f64 {
        self.interval * self.expiry_intervals
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QgrpConfig {
    pub weights: MetricWeights,
    pub hello: HelloConfig,
    pub retry: RetryConfig,
    pub tuning: QgrpTuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QgrpTuning {
    pub policy: SourcePolicy,
    /// Reservations unused by data for this long are released, seconds.
    pub reservation_timeout: f64,
    /// Let nodes holding a route answer requests themselves.
    pub intermediate_replies: bool,
}

impl Default for QgrpTuning {
    fn default() -> Self {
        Self { policy: SourcePolicy::Retry, reservation_timeout: 2.0, intermediate_replies: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn origin() -> Vantage {
        Vantage { own: Position::new(0.0, 0.0), sink: Position::new(1000.0, 0.0) }
    }

    fn cand(id: NodeId, x: f64, y: f64, bw: f64) -> Candidate {
        Candidate { id, position: Position::new(x, y), bandwidth: bw, residual_energy: 40.0, initial_energy: 40.0 }
    }

    #[test]
    fn weights_validation() {
        assert!(MetricWeights::new(0.7, 0.3).is_ok());
        assert!(matches!(MetricWeights::new(0.7, 0.5), Err(WeightsError::BadSum(_))));
        assert!(matches!(MetricWeights::new(1.2, -0.2), Err(WeightsError::OutOfRange { .. })));
    }

    #[test]
    fn empty_and_backward_neighbors() {
        assert!(forwarder_set(&origin(), &[], 1.0).is_empty());
        assert!(forwarder_set(&origin(), &[cand(1, -100.0, 0.0, 2e6)], 1.0).is_empty());
    }

    #[test]
    fn forwarder_set_matches_brute_force() {
        let at = origin();
        let mut cands = Vec::new();
        for i in 0..24 {
            let a = 2.0 * PI * i as f64 / 24.0;
            cands.push(cand(i, 200.0 * a.cos(), 200.0 * a.sin(), 1e5 * (i % 7) as f64));
        }
        let got = forwarder_set(&at, &cands, 3e5);
        let want: Vec<NodeId> = cands
            .iter()
            .filter(|c| {
                let dot = (at.sink.x - at.own.x) * (c.position.x - at.own.x)
                    + (at.sink.y - at.own.y) * (c.position.y - at.own.y);
                dot >= 0.0 && c.bandwidth >= 3e5
            })
            .map(|c| c.id)
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn metric_examples() {
        let w = MetricWeights::default();
        // candidate 100 m from the sink at a 0.5 rad deviation
        let sink = Position::new(0.0, 0.0);
        let own = Position::new(-150.0, 0.0);
        // put the candidate on the circle of radius 100 around the sink with the right angle
        let theta: f64 = 0.5;
        let (dx, dy) = (theta.cos(), theta.sin());
        // own + t·(dx,dy) at distance 100 from sink
        let b = 2.0 * (own.x * dx + own.y * dy);
        let c = own.x * own.x + own.y * own.y - 100.0 * 100.0;
        let t = (-b - (b * b - 4.0 * c).sqrt()) / 2.0;
        let p = Position::new(own.x + t * dx, own.y + t * dy);
        let at = Vantage { own, sink };
        let k = Candidate { id: 3, position: p, bandwidth: 2e6, residual_energy: 40.0, initial_energy: 40.0 };
        assert_relative_eq!(link_metric(&at, &k, w, 2e6).unwrap(), 0.02, max_relative = 1e-9);

        // collinear: angle guard
        let k = Candidate { position: Position::new(-100.0, 0.0), ..k };
        assert_relative_eq!(link_metric(&at, &k, w, 2e6).unwrap(), 1.0, max_relative = 1e-12);
        // doubling r halves the score
        let near = Candidate { position: Position::new(-50.0, 0.0), ..k };
        let far = Candidate { position: Position::new(-100.0, 0.0), ..k };
        let ratio = link_metric(&at, &near, w, 2e6).unwrap() / link_metric(&at, &far, w, 2e6).unwrap();
        assert_relative_eq!(ratio, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn selection_picks_best_and_breaks_ties_low() {
        let at = origin();
        assert_eq!(select_next_hop(&at, &[], 1.0, MetricWeights::default(), 2e6), None);
        let cands = [cand(4, 100.0, 100.0, 1e6), cand(2, 200.0, 0.0, 1e6)];
        assert_eq!(select_next_hop(&at, &cands, 1.0, MetricWeights::default(), 2e6), Some(2));
        assert_eq!(argmax_lowest_id([(5, 0.02), (9, 0.05)]), Some(9));
        assert_eq!(argmax_lowest_id([(5, 0.05), (3, 0.05), (9, 0.05)]), Some(3));
        // symmetric pair: equal scores
        let cands = [cand(8, 150.0, 50.0, 1e6), cand(6, 150.0, -50.0, 1e6)];
        assert_eq!(select_next_hop(&at, &cands, 1.0, MetricWeights::default(), 2e6), Some(6));
    }

    #[test]
    fn max_grantable_is_best_forward_link() {
        let at = origin();
        let cands = [cand(1, 100.0, 0.0, 3e5), cand(2, 50.0, 80.0, 2e5), cand(3, -90.0, 0.0, 1.9e6)];
        assert_eq!(max_grantable(&at, &cands), 3e5);
        assert!(forwarder_set(&at, &cands, 5e5).is_empty());
        assert_eq!(max_grantable(&at, &[]), 0.0);
    }

    #[test]
    fn freshness_examples() {
        assert!(is_fresher((4, 1.0), (5, 0.8)));
        assert!(is_fresher((5, 1.0), (5, 1.2)));
        assert!(!is_fresher((5, 1.0), (5, 1.0)));
        assert!(!is_fresher((5, 1.0), (4, 9.0)));
    }

    #[test]
    fn retry_delays_double() {
        let r = RetryConfig::default();
        assert_eq!([r.delay(1), r.delay(2), r.delay(3)], [0.5, 1.0, 2.0]);
    }

    fn arb_cands() -> impl Strategy<Value = Vec<Candidate>> {
        prop::collection::vec((-250.0..250.0f64, -250.0..250.0f64, 0.0..2e6f64, 0.0..40.0f64), 0..12).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (x, y, bw, e))| Candidate {
                    id: i,
                    position: Position::new(x, y),
                    bandwidth: bw,
                    residual_energy: e,
                    initial_energy: 40.0,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn forwarder_set_monotone(cands in arb_cands(), b1 in 0.0..2e6f64, b2 in 0.0..2e6f64) {
            let at = Vantage { own: Position::new(0.0, 0.0), sink: Position::new(700.0, 300.0) };
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let big = forwarder_set(&at, &cands, lo);
            for id in forwarder_set(&at, &cands, hi) {
                prop_assert!(big.contains(&id));
            }
        }

        #[test]
        fn argmax_scale_invariant(scores in prop::collection::vec(1e-6..10.0f64, 1..20), k in 1e-3..1e3f64) {
            let a = argmax_lowest_id(scores.iter().copied().enumerate());
            let b = argmax_lowest_id(scores.iter().map(|s| s * k).enumerate());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn freshness_antisymmetric(s1 in 0u64..5, b1 in 0.0..3.0f64, s2 in 0u64..5, b2 in 0.0..3.0f64) {
            prop_assert!(!(is_fresher((s1, b1), (s2, b2)) && is_fresher((s2, b2), (s1, b1))));
            prop_assert!(!is_fresher((s1, b1), (s1, b1)));
        }

        #[test]
        fn metric_positive_and_finite(cands in arb_cands()) {
            let at = Vantage { own: Position::new(0.0, 0.0), sink: Position::new(700.0, 300.0) };
            for c in &cands {
                if let Ok(m) = link_metric(&at, c, MetricWeights::default(), 2e6) {
                    prop_assert!(m.is_finite() && m >= 0.0);
                    if at.angle(c).unwrap() <= FRAC_PI_2 {
                        prop_assert!(forwarder_set(&at, &cands, 0.0).contains(&c.id));
                    }
                }
            }
        }
    }
}
