//! Passive available-bandwidth estimation per link.
//!
//! Neither end probes the channel. A node combines its own measured idle
//! fraction, the idle fraction its peer advertises in hellos, the analytical
//! collision probability for the link geometry and the mean backoff cost.

use thiserror::Error;

use crate::dcf::{lookup_p_c, CollisionTable, DcfParams};
use crate::geometry::{distance, Position};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LinkError {
    #[error("collision probability {0} leaves no successful transmission")]
    CertainCollision(f64),
}

/// Idle-time observations for one link over a measurement window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelObservation {
    pub window: f64,
    pub local_idle_fraction: f64,
    pub peer_idle_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEstimate {
    pub peer: NodeId,
    /// Bits per second.
    pub available_bandwidth: f64,
    pub p_c_used: f64,
    pub last_update: f64,
}

/// Available bandwidth: nominal capacity derated by both ends' idle time,
/// the collision probability and the backoff overhead.
pub fn estimate_bandwidth(obs: &ChannelObservation, p_c: f64, b_no: f64, backoff_overhead: f64) -> f64 {
    let unit = |v: f64| v.clamp(0.0, 1.0);
    let b = b_no
        * unit(obs.local_idle_fraction)
        * unit(obs.peer_idle_fraction)
        * (1.0 - unit(p_c))
        * (1.0 - unit(backoff_overhead));
    b.clamp(0.0, b_no)
}

/// Expected backoff slots spent per delivered frame,
/// `Σ_{i=0..m} p_c^i (CW_i - 1) / 2`.
pub fn expected_backoff_slots(p_c: f64, params: &DcfParams) -> Result<f64, LinkError> {
    if p_c >= 1.0 {
        return Err(LinkError::CertainCollision(p_c));
    }
    let p = p_c.max(0.0);
    let mut total = 0.0;
    let mut weight = 1.0;
    for stage in 0..=params.backoff_stages() {
        total += weight * (params.window(stage) - 1.0) / 2.0;
        weight *= p;
    }
    Ok(total)
}

/// Fraction of channel time a frame spends in backoff rather than on air.
pub fn average_backoff_overhead(p_c: f64, params: &DcfParams) -> Result<f64, LinkError> {
    let backoff = expected_backoff_slots(p_c, params)? * params.virtual_slot;
    Ok(backoff / (params.payload_duration + backoff))
}

/// What a node last heard from a neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborReport {
    pub peer: NodeId,
    pub position: Position,
    pub idle_fraction: f64,
    pub heard_at: f64,
}

/// Inputs shared by all links of one node when refreshing estimates.
#[derive(Debug, Clone, Copy)]
pub struct EstimationContext<'a> {
    pub table: &'a CollisionTable,
    pub params: &'a DcfParams,
    /// Nodes per km², the table's density unit.
    pub density: f64,
    pub b_no: f64,
    pub tx_range: f64,
    /// Reports older than this many seconds are discarded.
    pub expiry: f64,
    pub window: f64,
}

/// Recomputes the estimate for every neighbor heard recently enough and within
/// range. Output is sorted by peer id.
pub fn refresh_estimates(
    own_position: Position,
    local_idle_fraction: f64,
    now: f64,
    reports: &[NeighborReport],
    ctx: &EstimationContext<'_>,
) -> Vec<LinkEstimate> {
    let mut out: Vec<LinkEstimate> = reports
        .iter()
        .filter(|r| now - r.heard_at <= ctx.expiry)
        .filter_map(|r| {
            let d = distance(own_position, r.position);
            if d > ctx.tx_range {
                return None;
            }
            let p_c = lookup_p_c(ctx.table, ctx.density, d);
            let overhead = average_backoff_overhead(p_c, ctx.params).unwrap_or(1.0);
            let obs = ChannelObservation {
                window: ctx.window,
                local_idle_fraction,
                peer_idle_fraction: r.idle_fraction,
            };
            Some(LinkEstimate {
                peer: r.peer,
                available_bandwidth: estimate_bandwidth(&obs, p_c, ctx.b_no, overhead),
                p_c_used: p_c,
                last_update: now,
            })
        })
        .collect();
    out.sort_by_key(|e| e.peer);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn idle(local: f64, peer: f64) -> ChannelObservation {
        ChannelObservation { window: 1.0, local_idle_fraction: local, peer_idle_fraction: peer }
    }

    #[test]
    fn idle_link_gets_nominal_capacity() {
        assert_eq!(estimate_bandwidth(&idle(1.0, 1.0), 0.0, 2e6, 0.0), 2e6);
        assert_eq!(estimate_bandwidth(&idle(0.0, 1.0), 0.0, 2e6, 0.0), 0.0);
    }

    #[test]
    fn derated_product() {
        let b = estimate_bandwidth(&idle(0.8, 0.9), 0.2727, 2e6, 0.05);
        assert_relative_eq!(b, 994_946.4, max_relative = 1e-12);
    }

    #[test]
    fn backoff_overhead_examples() {
        let p = DcfParams::default();
        assert_eq!(expected_backoff_slots(0.0, &p).unwrap(), 15.5);
        assert_relative_eq!(
            average_backoff_overhead(0.0, &p).unwrap(),
            0.1623036649214659685863874345549738219895,
            max_relative = 1e-13
        );
        assert!(average_backoff_overhead(0.4, &p).unwrap() > average_backoff_overhead(0.1, &p).unwrap());
        assert!(average_backoff_overhead(1.0, &p).is_err());
    }

    fn ctx(table: &CollisionTable) -> EstimationContext<'_> {
        static PARAMS: std::sync::OnceLock<DcfParams> = std::sync::OnceLock::new();
        EstimationContext {
            table,
            params: PARAMS.get_or_init(DcfParams::default),
            density: 90.0,
            b_no: 2e6,
            tx_range: 250.0,
            expiry: 3.0,
            window: 1.0,
        }
    }

    #[test]
    fn refresh_without_neighbors_is_empty() {
        let t = CollisionTable::published();
        assert!(refresh_estimates(Position::new(0.0, 0.0), 1.0, 10.0, &[], &ctx(&t)).is_empty());
    }

    #[test]
    fn refresh_uses_grid_value_at_grid_distance() {
        let t = CollisionTable::published();
        let reports =
            [NeighborReport { peer: 7, position: Position::new(150.0, 0.0), idle_fraction: 1.0, heard_at: 9.5 }];
        let est = refresh_estimates(Position::new(0.0, 0.0), 1.0, 10.0, &reports, &ctx(&t));
        assert_eq!(est.len(), 1);
        assert_eq!(est[0].p_c_used, 0.2535);
        assert_eq!(est[0].last_update, 10.0);
    }

    #[test]
    fn refresh_recomputes_each_link_independently() {
        let t = CollisionTable::published();
        let c = ctx(&t);
        let reports = [
            NeighborReport { peer: 3, position: Position::new(120.0, 0.0), idle_fraction: 0.9, heard_at: 9.0 },
            NeighborReport { peer: 1, position: Position::new(0.0, 230.0), idle_fraction: 0.5, heard_at: 8.0 },
            NeighborReport { peer: 2, position: Position::new(-60.0, 80.0), idle_fraction: 1.0, heard_at: 9.9 },
            // stale
            NeighborReport { peer: 4, position: Position::new(10.0, 0.0), idle_fraction: 1.0, heard_at: 6.0 },
            // out of range
            NeighborReport { peer: 5, position: Position::new(300.0, 0.0), idle_fraction: 1.0, heard_at: 9.9 },
        ];
        let est = refresh_estimates(Position::new(0.0, 0.0), 0.7, 10.0, &reports, &c);
        assert_eq!(est.iter().map(|e| e.peer).collect::<Vec<_>>(), vec![1, 2, 3]);
        for e in &est {
            let r = reports.iter().find(|r| r.peer == e.peer).unwrap();
            let d = (r.position.x.powi(2) + r.position.y.powi(2)).sqrt();
            let pc = lookup_p_c(&t, 90.0, d);
            let slots: f64 = (0..=5).map(|i| pc.powi(i) * ((32u32 << i).min(1024) as f64 - 1.0) / 2.0).sum();
            let ovh = slots * 50e-6 / (4e-3 + slots * 50e-6);
            let oracle = 2e6 * 0.7 * r.idle_fraction * (1.0 - pc) * (1.0 - ovh);
            assert_relative_eq!(e.available_bandwidth, oracle, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn estimate_monotone_and_bounded(
            l in 0.0..=1.0f64, dl in 0.0..0.5f64, pe in 0.0..=1.0f64,
            pc in 0.0..=1.0f64, dpc in 0.0..0.5f64,
            ov in 0.0..=1.0f64, dov in 0.0..0.5f64,
        ) {
            let base = estimate_bandwidth(&idle(l, pe), pc, 2e6, ov);
            prop_assert!((0.0..=2e6).contains(&base));
            prop_assert!(estimate_bandwidth(&idle((l + dl).min(1.0), pe), pc, 2e6, ov) >= base);
            prop_assert!(estimate_bandwidth(&idle(l, pe), (pc + dpc).min(1.0), 2e6, ov) <= base);
            prop_assert!(estimate_bandwidth(&idle(l, pe), pc, 2e6, (ov + dov).min(1.0)) <= base);
        }

        #[test]
        fn overhead_monotone_in_p_c(a in 0.0..0.99f64, b in 0.0..0.99f64) {
            let p = DcfParams::default();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(average_backoff_overhead(lo, &p).unwrap() <= average_backoff_overhead(hi, &p).unwrap());
        }
    }
}
