#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use qgrp::aodv::{AodvConfig, AodvNode};
use qgrp::config::ScenarioConfig;
use qgrp::dcf::{CollisionTable, DcfParams};
use qgrp::eventlog::{DropReason, EventLog, Record};
use qgrp::packet::PacketSizes;
use qgrp::sim::{generate_topology, FlowSpec, MacConfig, RadioModel, RunOutput, SimSetup, Simulator, Topology};
use qgrp::{FlowId, NodeId};

pub fn repo_path(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn full_grid() -> ScenarioConfig {
    ScenarioConfig::from_file(&repo_path("configs/full_grid.toml")).expect("full grid config")
}

/// Nodes repeated in a data trace, over every record that carries one.
pub fn looping_traces(log: &EventLog) -> usize {
    log.iter()
        .filter(|e| matches!(e.record, Record::Deliver { .. } | Record::Drop { .. }))
        .filter_map(|e| e.record.trace())
        .filter(|t| t.iter().collect::<BTreeSet<_>>().len() != t.len())
        .count()
}

pub fn loop_witnesses(log: &EventLog) -> usize {
    log.iter()
        .filter(|e| {
            matches!(e.record, Record::LoopWitness { .. } | Record::Drop { reason: DropReason::Loop, .. })
        })
        .count()
}

/// Replays reservations and checks every admission against the estimate
/// logged at that instant. Returns (checks, violations).
pub fn admission_violations(log: &EventLog) -> (usize, usize) {
    let mut held: BTreeMap<(NodeId, NodeId), BTreeMap<FlowId, f64>> = BTreeMap::new();
    let (mut checks, mut bad) = (0, 0);
    for e in log.iter() {
        match e.record {
            Record::Reserve { flow, next_hop, required, estimate, reserved_before } => {
                let link = held.entry((e.node, next_hop)).or_default();
                let others: f64 = link.iter().filter(|(f, _)| **f != flow).map(|(_, a)| a).sum();
                checks += 1;
                if others + required > estimate || (others - reserved_before).abs() > 1e-6 {
                    bad += 1;
                }
                link.insert(flow, required);
            }
            Record::Release { flow, next_hop, .. } => {
                if let Some(link) = held.get_mut(&(e.node, next_hop)) {
                    link.remove(&flow);
                }
            }
            _ => {}
        }
    }
    (checks, bad)
}

/// For every installed route, whether its path bandwidth is the minimum of
/// the link estimates forwarded along the request path. Returns (routes, mismatches).
pub fn bottleneck_mismatches(log: &EventLog) -> (usize, usize) {
    let mut link_bw: BTreeMap<(FlowId, u64, NodeId, NodeId), f64> = BTreeMap::new();
    let mut paths: BTreeMap<(FlowId, u64), Vec<NodeId>> = BTreeMap::new();
    let (mut routes, mut bad) = (0, 0);
    for e in log.iter() {
        match &e.record {
            Record::RreqForward { flow, rreq_id, next, link_bw: bw, .. } => {
                link_bw.insert((*flow, *rreq_id, e.node, *next), *bw);
            }
            Record::RrepOrigin { flow, rreq_id, trace, .. } => {
                paths.insert((*flow, *rreq_id), trace.clone());
            }
            Record::RouteInstall { flow, rreq_id, path_bw, .. } => {
                routes += 1;
                let expected = paths.get(&(*flow, *rreq_id)).and_then(|p| {
                    p.windows(2)
                        .map(|w| link_bw.get(&(*flow, *rreq_id, w[0], w[1])).copied())
                        .try_fold(f64::INFINITY, |m, b| b.map(|b| m.min(b)))
                });
                if expected != Some(*path_bw) {
                    bad += 1;
                }
            }
            _ => {}
        }
    }
    (routes, bad)
}

/// Largest per-node gap between energy spent and energy debited in the log.
pub fn energy_gap(log: &EventLog) -> f64 {
    let mut initial: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut spent: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut gap = 0.0_f64;
    for e in log.iter() {
        match e.record {
            Record::NodeInit { energy, .. } => {
                initial.insert(e.node, energy);
            }
            Record::Final { residual } => {
                let used = initial[&e.node] - residual;
                gap = gap.max((used - spent.get(&e.node).copied().unwrap_or(0.0)).abs());
            }
            _ => {
                if let Some(j) = e.record.joules() {
                    *spent.entry(e.node).or_default() += j;
                }
            }
        }
    }
    gap
}

/// Records other than the closing residual attributed to nodes after they died.
pub fn post_death_events(log: &EventLog) -> usize {
    let mut dead = BTreeSet::new();
    let mut count = 0;
    for e in log.iter() {
        if dead.contains(&e.node) && !matches!(e.record, Record::Final { .. }) {
            count += 1;
        }
        if e.record == Record::Death {
            dead.insert(e.node);
        }
    }
    count
}

pub fn bfs(neighbors: &[Vec<NodeId>], from: NodeId) -> Vec<Option<u32>> {
    let mut dist = vec![None; neighbors.len()];
    dist[from] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &v in &neighbors[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

pub fn adjacency(t: &Topology) -> Vec<Vec<NodeId>> {
    let n = t.positions.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    j != i && {
                        let (a, b) = (t.positions[i], t.positions[j]);
                        ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt() <= t.tx_range
                    }
                })
                .collect()
        })
        .collect()
}

/// A loss-free AODV run with one low-rate flow from the node farthest (in
/// hops) from the sink. `None` when the sink is isolated.
pub fn aodv_loss_free(seed: u64) -> Option<(Topology, NodeId, RunOutput)> {
    let topology = generate_topology(100, 1000.0, 250.0, seed);
    let hops = bfs(&adjacency(&topology), topology.sink);
    let source = (0..hops.len()).filter(|&i| hops[i].is_some()).max_by_key(|&i| (hops[i], std::cmp::Reverse(i)))?;
    if source == topology.sink {
        return None;
    }
    let setup = SimSetup {
        topology: topology.clone(),
        flows: vec![FlowSpec { id: 0, source, rate: 20e3, packet_bits: 2000, start: 1.0, stop: 20.0 }],
        table: CollisionTable::collision_free(),
        dcf: DcfParams::default(),
        mac: MacConfig::default(),
        radio: RadioModel::default(),
        sizes: PacketSizes::default(),
        duration: 20.0,
        seed,
        idle_window: 1.0,
    };
    let out = Simulator::<AodvNode>::new(&setup, &AodvConfig::default()).run();
    Some((topology, source, out))
}

/// Last hop count each node logged towards `dest`.
pub fn final_hop_counts(log: &EventLog, dest: NodeId) -> BTreeMap<NodeId, u32> {
    let mut out = BTreeMap::new();
    for e in log.iter() {
        if let Record::AodvRoute { dest: d, hop_count, .. } = e.record {
            if d == dest {
                out.insert(e.node, hop_count);
            }
        }
    }
    out
}
