//! Simplified AODV: flooded route requests with duplicate suppression,
//! replies along the reverse path, shortest hop count wins at equal
//! destination sequence numbers. Link connectivity comes from the
//! simulator's neighbor oracle instead of hellos, and there is no local
//! repair, gratuitous reply or expanding-ring search.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::eventlog::{DropReason, Record};
use crate::packet::{DataPacket, PacketKind, PacketSizes, WirePacket};
use crate::qgrp::RetryConfig;
use crate::sim::{Cx, Protocol, World};
use crate::{FlowId, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AodvTuning {
    /// Routes unused for this long become invalid, seconds.
    pub active_route_timeout: f64,
    /// Let nodes holding a fresh enough route answer requests themselves.
    pub intermediate_replies: bool,
}

impl Default for AodvTuning {
    fn default() -> Self {
        Self { active_route_timeout: 10.0, intermediate_replies: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AodvConfig {
    pub retry: RetryConfig,
    pub tuning: AodvTuning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AodvRreq {
    pub flow_id: FlowId,
    pub origin: NodeId,
    pub origin_seq: u64,
    pub rreq_id: u64,
    pub destination: NodeId,
    pub dest_seq_known: u64,
    pub hop_count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AodvRrep {
    pub origin: NodeId,
    pub destination: NodeId,
    pub dest_seq: u64,
    pub hop_count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AodvRerr {
    pub destination: NodeId,
    pub flow_id: FlowId,
    /// Path of the data packet that failed, walked backwards to its source.
    pub trace: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AodvPacket {
    Rreq(AodvRreq),
    Rrep(AodvRrep),
    Rerr(AodvRerr),
    Data(DataPacket),
}

impl WirePacket for AodvPacket {
    fn kind(&self) -> PacketKind {
        match self {
            AodvPacket::Rreq(_) => PacketKind::Rreq,
            AodvPacket::Rrep(_) => PacketKind::Rrep,
            AodvPacket::Rerr(_) => PacketKind::Rerr,
            AodvPacket::Data(_) => PacketKind::Data,
        }
    }

    fn size_bits(&self, sizes: &PacketSizes) -> u32 {
        match self {
            AodvPacket::Rreq(_) => sizes.rreq_bits,
            AodvPacket::Rrep(_) => sizes.rrep_bits,
            AodvPacket::Rerr(_) => sizes.rerr_bits,
            AodvPacket::Data(d) => sizes.data_header_bits + d.payload_bits,
        }
    }

    fn data(&self) -> Option<&DataPacket> {
        match self {
            AodvPacket::Data(d) => Some(d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AodvTimer {
    RrepWait { flow: FlowId, rreq_id: u64 },
    Retry { flow: FlowId },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AodvRouteEntry {
    pub destination: NodeId,
    pub next_hop: NodeId,
    pub hop_count: u32,
    pub dest_seq: u64,
    pub valid: bool,
    /// Time after which the entry is no longer valid.
    pub lifetime: f64,
}

impl AodvRouteEntry {
    fn usable(&self, now: f64) -> bool {
        self.valid && now <= self.lifetime
    }
}

/// Whether `(seq, hops)` should replace the stored entry: higher sequence
/// number, or the same one with fewer hops.
pub fn aodv_prefers(stored: Option<&AodvRouteEntry>, now: f64, seq: u64, hops: u32) -> bool {
    match stored {
        Some(r) if r.usable(now) => seq > r.dest_seq || (seq == r.dest_seq && hops < r.hop_count),
        _ => true,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
struct AodvFlow {
    awaiting: Option<u64>,
    retry_pending: bool,
    retries_used: u32,
    failed: bool,
    buffer: VecDeque<DataPacket>,
}

#[derive(Debug, Clone)]
pub struct AodvNode {
    seq: u64,
    next_rreq_id: u64,
    seen: BTreeMap<(NodeId, u64), u32>,
    routes: BTreeMap<NodeId, AodvRouteEntry>,
    flows: BTreeMap<FlowId, AodvFlow>,
}

type Ctx<'a, 'b> = &'a mut Cx<'b, AodvNode>;

impl AodvNode {
    pub fn route_to(&self, dest: NodeId) -> Option<&AodvRouteEntry> {
        self.routes.get(&dest)
    }

    fn install(&mut self, dest: NodeId, next_hop: NodeId, hop_count: u32, dest_seq: u64, cx: Ctx) -> bool {
        let now = cx.now();
        if !aodv_prefers(self.routes.get(&dest), now, dest_seq, hop_count) {
            // same route seen again keeps it alive
            if let Some(r) = self.routes.get_mut(&dest).filter(|r| r.next_hop == next_hop && r.usable(now)) {
                r.lifetime = now + cx.config().tuning.active_route_timeout;
            }
            return false;
        }
        let lifetime = now + cx.config().tuning.active_route_timeout;
        self.routes.insert(dest, AodvRouteEntry { destination: dest, next_hop, hop_count, dest_seq, valid: true, lifetime });
        cx.log(Record::AodvRoute { dest, next_hop, hop_count, dest_seq });
        true
    }

    fn usable_next_hop(&self, dest: NodeId, cx: &Cx<'_, Self>) -> Option<NodeId> {
        let r = self.routes.get(&dest).filter(|r| r.usable(cx.now()))?;
        let w = cx.world();
        (w.is_alive(r.next_hop) && w.in_range[cx.id()].binary_search(&r.next_hop).is_ok()).then_some(r.next_hop)
    }

    fn invalidate(&mut self, dest: NodeId) {
        if let Some(r) = self.routes.get_mut(&dest) {
            r.valid = false;
        }
    }

    fn discover(&mut self, flow_id: FlowId, cx: Ctx) {
        let Some(flow) = self.flows.get_mut(&flow_id) else { return };
        if flow.failed || flow.awaiting.is_some() {
            return;
        }
        self.seq += 1;
        let rreq_id = self.next_rreq_id;
        self.next_rreq_id += 1;
        flow.awaiting = Some(rreq_id);
        let me = cx.id();
        self.seen.insert((me, rreq_id), 0);
        let dest = cx.sink();
        let rreq = AodvRreq {
            flow_id,
            origin: me,
            origin_seq: self.seq,
            rreq_id,
            destination: dest,
            dest_seq_known: self.routes.get(&dest).map_or(0, |r| r.dest_seq),
            hop_count: 0,
        };
        cx.broadcast(AodvPacket::Rreq(rreq));
        cx.set_timer(cx.config().retry.rrep_wait, AodvTimer::RrepWait { flow: flow_id, rreq_id });
    }

    fn fail_flow(&mut self, flow_id: FlowId, cx: Ctx) {
        let Some(flow) = self.flows.get_mut(&flow_id) else { return };
        flow.failed = true;
        flow.awaiting = None;
        let dropped: Vec<DataPacket> = flow.buffer.drain(..).collect();
        cx.log(Record::FlowFailed { flow: flow_id });
        for d in dropped {
            cx.log(drop_data(DropReason::FlowFailed, &d));
        }
    }

    fn schedule_retry(&mut self, flow_id: FlowId, cx: Ctx) {
        let max = cx.config().retry.max_retries;
        let Some(flow) = self.flows.get_mut(&flow_id) else { return };
        if flow.retry_pending || flow.failed {
            return;
        }
        if flow.retries_used >= max {
            self.fail_flow(flow_id, cx);
            return;
        }
        flow.retries_used += 1;
        flow.retry_pending = true;
        cx.set_timer(cx.config().retry.delay(flow.retries_used), AodvTimer::Retry { flow: flow_id });
    }

    fn on_rreq(&mut self, from: NodeId, mut rreq: AodvRreq, cx: Ctx) {
        let me = cx.id();
        if rreq.origin == me {
            return;
        }
        let hops = rreq.hop_count + 1;
        let key = (rreq.origin, rreq.rreq_id);
        let first = match self.seen.get(&key) {
            Some(&best) if best <= hops => return,
            Some(_) => false,
            None => true,
        };
        self.seen.insert(key, hops);
        self.install(rreq.origin, from, hops, rreq.origin_seq, cx);

        if me == rreq.destination {
            if first {
                self.seq += 1;
            }
            let rrep = AodvRrep { origin: rreq.origin, destination: me, dest_seq: self.seq, hop_count: 0 };
            cx.send(from, AodvPacket::Rrep(rrep));
            return;
        }
        if cx.config().tuning.intermediate_replies {
            if let Some(r) = self.routes.get(&rreq.destination).copied() {
                if r.usable(cx.now()) && r.dest_seq >= rreq.dest_seq_known && r.next_hop != from {
                    let rrep = AodvRrep {
                        origin: rreq.origin,
                        destination: rreq.destination,
                        dest_seq: r.dest_seq,
                        hop_count: r.hop_count,
                    };
                    cx.send(from, AodvPacket::Rrep(rrep));
                    return;
                }
            }
        }
        rreq.hop_count = hops;
        cx.broadcast(AodvPacket::Rreq(rreq));
    }

    fn on_rrep(&mut self, from: NodeId, mut rrep: AodvRrep, cx: Ctx) {
        let me = cx.id();
        let hops = rrep.hop_count + 1;
        self.install(rrep.destination, from, hops, rrep.dest_seq, cx);
        if rrep.origin == me {
            let ready: Vec<FlowId> = self.flows.iter().filter(|(_, f)| f.awaiting.is_some()).map(|(id, _)| *id).collect();
            for flow_id in ready {
                let flow = self.flows.get_mut(&flow_id).expect("flow exists");
                flow.awaiting = None;
                flow.retries_used = 0;
                let buffered: Vec<DataPacket> = flow.buffer.drain(..).collect();
                for d in buffered {
                    self.forward_data(d, cx);
                }
            }
            return;
        }
        let Some(next) = self.usable_next_hop(rrep.origin, cx) else { return };
        rrep.hop_count = hops;
        cx.send(next, AodvPacket::Rrep(rrep));
    }

    fn on_rerr(&mut self, from: NodeId, rerr: AodvRerr, cx: Ctx) {
        if self.routes.get(&rerr.destination).is_some_and(|r| r.next_hop == from) {
            self.invalidate(rerr.destination);
        }
        let me = cx.id();
        let Some(i) = rerr.trace.iter().position(|&v| v == me) else { return };
        if i > 0 {
            let prev = rerr.trace[i - 1];
            cx.send(prev, AodvPacket::Rerr(rerr));
        } else if let Some(flow) = self.flows.get_mut(&rerr.flow_id) {
            flow.retries_used = 0;
            self.discover(rerr.flow_id, cx);
        }
    }

    fn link_broken(&mut self, data: &DataPacket, cx: Ctx) {
        let dest = cx.sink();
        self.invalidate(dest);
        if data.source == cx.id() {
            if let Some(flow) = self.flows.get_mut(&data.flow_id) {
                flow.retries_used = 0;
            }
            self.discover(data.flow_id, cx);
            return;
        }
        if data.trace.len() >= 2 {
            let rerr = AodvRerr { destination: dest, flow_id: data.flow_id, trace: data.trace.clone() };
            cx.send(data.trace[data.trace.len() - 2], AodvPacket::Rerr(rerr));
        }
    }

    fn forward_data(&mut self, data: DataPacket, cx: Ctx) {
        let dest = cx.sink();
        match self.usable_next_hop(dest, cx) {
            Some(next) => {
                let lifetime = cx.now() + cx.config().tuning.active_route_timeout;
                if let Some(r) = self.routes.get_mut(&dest) {
                    r.lifetime = r.lifetime.max(lifetime);
                }
                cx.send(next, AodvPacket::Data(data));
            }
            None => {
                if data.source == cx.id() {
                    self.buffer(data, cx);
                    return;
                }
                cx.log(drop_data(DropReason::NoRoute, &data));
                self.link_broken(&data, cx);
            }
        }
    }

    fn buffer(&mut self, data: DataPacket, cx: Ctx) {
        let capacity = cx.config().retry.buffer_capacity;
        let flow_id = data.flow_id;
        let Some(flow) = self.flows.get_mut(&flow_id) else { return };
        if flow.failed {
            cx.log(drop_data(DropReason::FlowFailed, &data));
            return;
        }
        if flow.buffer.len() >= capacity {
            if let Some(old) = flow.buffer.pop_front() {
                cx.log(drop_data(DropReason::BufferOverflow, &old));
            }
        }
        flow.buffer.push_back(data);
        if !flow.retry_pending {
            self.discover(flow_id, cx);
        }
    }

    fn on_data(&mut self, mut data: DataPacket, cx: Ctx) {
        let me = cx.id();
        if data.trace.contains(&me) {
            cx.log(Record::LoopWitness { flow: data.flow_id, kind: PacketKind::Data });
            cx.log(drop_data(DropReason::Loop, &data));
            return;
        }
        data.trace.push(me);
        if cx.is_sink() {
            cx.deliver(data);
        } else {
            self.forward_data(data, cx);
        }
    }
}

fn drop_data(reason: DropReason, d: &DataPacket) -> Record {
    Record::Drop {
        reason,
        kind: PacketKind::Data,
        flow: Some(d.flow_id),
        seq: Some(d.sequence),
        trace: d.trace.clone(),
    }
}

impl Protocol for AodvNode {
    type Packet = AodvPacket;
    type Timer = AodvTimer;
    type Config = AodvConfig;

    fn new(_id: NodeId, _world: &World, _config: &AodvConfig) -> Self {
        Self { seq: 0, next_rreq_id: 0, seen: BTreeMap::new(), routes: BTreeMap::new(), flows: BTreeMap::new() }
    }

    fn on_timer(&mut self, timer: AodvTimer, cx: &mut Cx<'_, Self>) {
        match timer {
            AodvTimer::RrepWait { flow, rreq_id } => {
                let Some(f) = self.flows.get_mut(&flow) else { return };
                if f.awaiting == Some(rreq_id) {
                    f.awaiting = None;
                    if self.usable_next_hop(cx.sink(), cx).is_none() {
                        self.schedule_retry(flow, cx);
                    }
                }
            }
            AodvTimer::Retry { flow } => {
                let Some(f) = self.flows.get_mut(&flow) else { return };
                f.retry_pending = false;
                if self.usable_next_hop(cx.sink(), cx).is_none() {
                    self.discover(flow, cx);
                } else {
                    let f = self.flows.get_mut(&flow).expect("flow exists");
                    let buffered: Vec<DataPacket> = f.buffer.drain(..).collect();
                    for d in buffered {
                        self.forward_data(d, cx);
                    }
                }
            }
        }
    }

    fn on_packet(&mut self, from: NodeId, packet: AodvPacket, cx: &mut Cx<'_, Self>) {
        match packet {
            AodvPacket::Rreq(r) => self.on_rreq(from, r, cx),
            AodvPacket::Rrep(r) => self.on_rrep(from, r, cx),
            AodvPacket::Rerr(r) => self.on_rerr(from, r, cx),
            AodvPacket::Data(d) => self.on_data(d, cx),
        }
    }

    fn on_flow_start(&mut self, flow: FlowId, _rate: f64, cx: &mut Cx<'_, Self>) {
        self.flows.insert(flow, AodvFlow::default());
        if self.usable_next_hop(cx.sink(), cx).is_none() {
            self.discover(flow, cx);
        }
    }

    fn on_originate(&mut self, data: DataPacket, cx: &mut Cx<'_, Self>) {
        if self.flows.get(&data.flow_id).is_some_and(|f| f.failed) {
            cx.log(drop_data(DropReason::FlowFailed, &data));
            return;
        }
        let pending = self.flows.get(&data.flow_id).is_some_and(|f| !f.buffer.is_empty());
        if pending {
            self.buffer(data, cx);
        } else {
            self.forward_data(data, cx);
        }
    }

    fn on_send_failure(&mut self, _to: NodeId, packet: AodvPacket, cx: &mut Cx<'_, Self>) {
        if let AodvPacket::Data(d) = packet {
            self.link_broken(&d, cx);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(seq: u64, hops: u32) -> AodvRouteEntry {
        AodvRouteEntry { destination: 9, next_hop: 1, hop_count: hops, dest_seq: seq, valid: true, lifetime: 100.0 }
    }

    #[test]
    fn preference_order() {
        assert!(aodv_prefers(None, 0.0, 1, 5));
        assert!(aodv_prefers(Some(&entry(3, 2)), 0.0, 4, 9));
        assert!(aodv_prefers(Some(&entry(3, 4)), 0.0, 3, 2));
        assert!(!aodv_prefers(Some(&entry(3, 2)), 0.0, 3, 2));
        assert!(!aodv_prefers(Some(&entry(3, 2)), 0.0, 2, 1));
        // expired entries are replaced by anything
        assert!(aodv_prefers(Some(&entry(3, 2)), 200.0, 1, 9));
    }
}
