//! An AODV run on a random 100-node field: the source's discovered hop count
//! against breadth-first search.
//!
//! cargo run --release --example aodv_discovery [-- seed]

use qgrp::aodv::{AodvConfig, AodvNode};
use qgrp::dcf::{CollisionTable, DcfParams};
use qgrp::eventlog::Record;
use qgrp::metrics::{compute_metrics, MeasureWindow};
use qgrp::packet::PacketSizes;
use qgrp::sim::{generate_topology, FlowSpec, MacConfig, RadioModel, SimSetup, Simulator};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let topology = generate_topology(100, 1000.0, 250.0, seed);
    let hops = topology.hop_distances(topology.sink);
    let source = (0..hops.len()).filter(|&i| hops[i].is_some()).max_by_key(|&i| hops[i]).unwrap();
    println!("sink {}, source {source}, {} hops apart, mean degree {:.1}", topology.sink, hops[source].unwrap(), topology.mean_degree());

    let setup = SimSetup {
        topology: topology.clone(),
        flows: vec![FlowSpec { id: 0, source, rate: 50e3, packet_bits: 2000, start: 1.0, stop: 20.0 }],
        table: CollisionTable::published(),
        dcf: DcfParams::default(),
        mac: MacConfig::default(),
        radio: RadioModel::default(),
        sizes: PacketSizes::default(),
        duration: 20.0,
        seed,
        idle_window: 1.0,
    };
    let out = Simulator::<AodvNode>::new(&setup, &AodvConfig::default()).run();
    for e in out.log.iter() {
        if let Record::AodvRoute { dest, next_hop, hop_count, dest_seq } = e.record {
            if e.node == source && dest == topology.sink {
                println!("t={:.4}: route via {next_hop}, {hop_count} hops, seq {dest_seq}", e.time);
            }
        }
    }
    let m = compute_metrics(&out.log, MeasureWindow { warm_up: 1.0, duration: 20.0 });
    println!("{} delivered of {}, mean delay {:?} s", m.delivered, m.originated, m.mean_delay);
}
