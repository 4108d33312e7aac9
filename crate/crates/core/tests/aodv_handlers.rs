mod common;

use qgrp::aodv::{AodvConfig, AodvNode, AodvPacket, AodvRrep, AodvRreq};
use qgrp::dcf::{CollisionTable, DcfParams};
use qgrp::eventlog::{DropReason, Record};
use qgrp::geometry::Position;
use qgrp::packet::DataPacket;
use qgrp::sim::{Action, Bench, Protocol, Topology, World};
use qgrp::NodeId;

fn bench(positions: &[(f64, f64)], sink: NodeId) -> Bench<AodvNode> {
    let topology = Topology {
        positions: positions.iter().map(|&(x, y)| Position::new(x, y)).collect(),
        sink,
        field_size: 1000.0,
        tx_range: 250.0,
        seed: 0,
    };
    let world = World::new(&topology, CollisionTable::collision_free(), DcfParams::default(), 2e6, 40.0);
    Bench::new(world, AodvConfig::default())
}

fn sends(actions: &[Action<AodvNode>]) -> Vec<(Option<NodeId>, AodvPacket)> {
    actions
        .iter()
        .filter_map(|a| match a {
            Action::Send { to, packet } => Some((*to, packet.clone())),
            _ => None,
        })
        .collect()
}

fn data(source: NodeId, trace: Vec<NodeId>) -> DataPacket {
    DataPacket { flow_id: 0, source, sequence: 0, origin_timestamp: 1.0, payload_bits: 2000, trace }
}

/// A - B - C in a line, C is the sink.
fn abc() -> Bench<AodvNode> {
    bench(&[(0.0, 0.0), (200.0, 0.0), (400.0, 0.0)], 2)
}

fn discover(b: &mut Bench<AodvNode>) -> (AodvNode, AodvNode, AodvNode) {
    let (mut a, mut m, mut c) = (b.node(0), b.node(1), b.node(2));
    let out = b.call(&mut a, 0, 1.0, |n, cx| n.on_flow_start(0, 1e5, cx));
    let s = sends(&out);
    let [(None, AodvPacket::Rreq(r))] = s.as_slice() else { panic!("{out:?}") };
    let out = b.call(&mut m, 1, 1.0, |n, cx| n.on_packet(0, AodvPacket::Rreq(r.clone()), cx));
    let s = sends(&out);
    let [(None, AodvPacket::Rreq(r))] = s.as_slice() else { panic!("{out:?}") };
    assert_eq!(r.hop_count, 1);
    let out = b.call(&mut c, 2, 1.0, |n, cx| n.on_packet(1, AodvPacket::Rreq(r.clone()), cx));
    let s = sends(&out);
    let [(Some(1), AodvPacket::Rrep(rep))] = s.as_slice() else { panic!("{out:?}") };
    let out = b.call(&mut m, 1, 1.0, |n, cx| n.on_packet(2, AodvPacket::Rrep(rep.clone()), cx));
    let s = sends(&out);
    let [(Some(0), AodvPacket::Rrep(rep))] = s.as_slice() else { panic!("{out:?}") };
    b.call(&mut a, 0, 1.0, |n, cx| n.on_packet(1, AodvPacket::Rrep(rep.clone()), cx));
    (a, m, c)
}

#[test]
fn line_route_has_two_hops() {
    let mut b = abc();
    let (a, m, c) = discover(&mut b);
    let r = a.route_to(2).unwrap();
    assert_eq!((r.next_hop, r.hop_count, r.valid), (1, 2, true));
    assert_eq!(m.route_to(2).unwrap().hop_count, 1);
    assert_eq!(c.route_to(0).unwrap().hop_count, 2);
    assert_eq!(c.route_to(0).unwrap().next_hop, 1);
}

#[test]
fn duplicate_request_is_ignored() {
    let mut b = abc();
    let mut m = b.node(1);
    let r = AodvRreq { flow_id: 0, origin: 0, origin_seq: 1, rreq_id: 0, destination: 2, dest_seq_known: 0, hop_count: 0 };
    assert_eq!(sends(&b.call(&mut m, 1, 1.0, |n, cx| n.on_packet(0, AodvPacket::Rreq(r.clone()), cx))).len(), 1);
    assert!(sends(&b.call(&mut m, 1, 1.1, |n, cx| n.on_packet(0, AodvPacket::Rreq(r), cx))).is_empty());
}

#[test]
fn fresher_reply_replaces_the_route() {
    let mut b = bench(&[(0.0, 0.0), (200.0, 0.0), (200.0, 100.0), (400.0, 0.0)], 3);
    let mut a = b.node(0);
    b.call(&mut a, 0, 1.0, |n, cx| n.on_flow_start(0, 1e5, cx));
    let rep = |seq, hops| AodvRrep { origin: 0, destination: 3, dest_seq: seq, hop_count: hops };
    b.call(&mut a, 0, 1.0, |n, cx| n.on_packet(1, AodvPacket::Rrep(rep(4, 1)), cx));
    assert_eq!(a.route_to(3).unwrap().next_hop, 1);
    // same sequence, more hops: kept
    b.call(&mut a, 0, 1.1, |n, cx| n.on_packet(2, AodvPacket::Rrep(rep(4, 3)), cx));
    assert_eq!(a.route_to(3).unwrap().next_hop, 1);
    // newer sequence wins regardless of length
    b.call(&mut a, 0, 1.2, |n, cx| n.on_packet(2, AodvPacket::Rrep(rep(5, 3)), cx));
    let r = a.route_to(3).unwrap();
    assert_eq!((r.next_hop, r.hop_count, r.dest_seq), (2, 4, 5));
}

#[test]
fn dead_next_hop_drops_and_reports() {
    let mut b = bench(&[(0.0, 0.0), (200.0, 0.0), (400.0, 0.0), (600.0, 0.0)], 3);
    let mut m = b.node(1);
    let rep = AodvRrep { origin: 0, destination: 3, dest_seq: 1, hop_count: 1 };
    b.call(&mut m, 1, 1.0, |n, cx| n.on_packet(2, AodvPacket::Rrep(rep), cx));
    assert_eq!(m.route_to(3).unwrap().next_hop, 2);
    b.world.energy[2].residual = 0.0;
    let out = b.call(&mut m, 1, 2.0, |n, cx| n.on_packet(0, AodvPacket::Data(data(0, vec![0])), cx));
    assert!(!m.route_to(3).unwrap().valid);
    let s = sends(&out);
    let [(Some(0), AodvPacket::Rerr(e))] = s.as_slice() else { panic!("{out:?}") };
    assert_eq!(e.trace, vec![0, 1]);
    assert!(b.log.iter().any(|e| matches!(e.record, Record::Drop { reason: DropReason::NoRoute, .. })));
}

#[test]
fn discovered_hop_counts_match_bfs() {
    let mut checked = 0;
    for seed in 100..104 {
        let Some((topology, source, out)) = common::aodv_loss_free(seed) else { continue };
        let truth = common::bfs(&common::adjacency(&topology), topology.sink);
        let at_source = common::final_hop_counts(&out.log, topology.sink);
        assert_eq!(at_source.get(&source).copied(), truth[source], "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 3);
}
