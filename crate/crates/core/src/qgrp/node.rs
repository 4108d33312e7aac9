use std::collections::{BTreeMap, VecDeque};

use rand::Rng;

use crate::eventlog::{DropReason, NotifyCause, Record};
use crate::geometry::Position;
use crate::link::{refresh_estimates, EstimationContext, LinkEstimate, NeighborReport};
use crate::packet::{DataPacket, PacketKind, PacketSizes, WirePacket};
use crate::sim::{Cx, Protocol, World};
use crate::{FlowId, NodeId};

use super::{is_fresher, max_grantable, select_next_hop, Candidate, QgrpConfig, SourcePolicy, Vantage};

#[derive(Debug, Clone, PartialEq)]
pub struct Hello {
    pub sender: NodeId,
    pub position: Position,
    pub residual_energy: f64,
    pub idle_fraction: f64,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rreq {
    pub flow_id: FlowId,
    pub source: NodeId,
    pub destination: NodeId,
    pub rreq_id: u64,
    pub required_bandwidth: f64,
    pub path_bandwidth_so_far: f64,
    pub dest_seq_known: u64,
    pub retry_index: u32,
    pub hop_trace: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rrep {
    pub flow_id: FlowId,
    pub source: NodeId,
    pub destination: NodeId,
    pub rreq_id: u64,
    pub dest_seq: u64,
    pub path_bandwidth: f64,
    pub required_bandwidth: f64,
    /// Full path from the source to the replying node.
    pub hop_trace: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Notify {
    pub flow_id: FlowId,
    pub rreq_id: u64,
    pub max_grantable_bandwidth: f64,
    pub rejecting_node: NodeId,
    pub cause: NotifyCause,
    /// Path from the source to the rejecting node, walked backwards.
    pub hop_trace: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QgrpPacket {
    Hello(Hello),
    Rreq(Rreq),
    Rrep(Rrep),
    Notify(Notify),
    Data(DataPacket),
}

impl WirePacket for QgrpPacket {
    fn kind(&self) -> PacketKind {
        match self {
            QgrpPacket::Hello(_) => PacketKind::Hello,
            QgrpPacket::Rreq(_) => PacketKind::Rreq,
            QgrpPacket::Rrep(_) => PacketKind::Rrep,
            QgrpPacket::Notify(_) => PacketKind::Notify,
            QgrpPacket::Data(_) => PacketKind::Data,
        }
    }

    fn size_bits(&self, sizes: &PacketSizes) -> u32 {
        match self {
            QgrpPacket::Hello(_) => sizes.hello_bits,
            QgrpPacket::Rreq(_) => sizes.rreq_bits,
            QgrpPacket::Rrep(_) => sizes.rrep_bits,
            QgrpPacket::Notify(_) => sizes.notify_bits,
            QgrpPacket::Data(d) => sizes.data_header_bits + d.payload_bits,
        }
    }

    fn data(&self) -> Option<&DataPacket> {
        match self {
            QgrpPacket::Data(d) => Some(d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QgrpTimer {
    Hello,
    RrepWait { flow: FlowId, rreq_id: u64 },
    Retry { flow: FlowId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteEntry {
    pub destination: NodeId,
    pub next_hop: NodeId,
    pub dest_seq: u64,
    pub path_bandwidth: f64,
    pub established_at: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Neighbor {
    report: NeighborReport,
    residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Reservation {
    next_hop: NodeId,
    amount: f64,
    last_used: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct SourceFlow {
    required: f64,
    admitted: bool,
    failed: bool,
    awaiting: Option<u64>,
    retry_pending: bool,
    retries_used: u32,
    buffer: VecDeque<DataPacket>,
}

/// Per-node protocol state.
#[derive(Debug, Clone)]
pub struct QgrpNode {
    id: NodeId,
    hello_seq: u64,
    neighbors: BTreeMap<NodeId, Neighbor>,
    estimates: BTreeMap<NodeId, LinkEstimate>,
    route: Option<RouteEntry>,
    /// The sink's own destination sequence number.
    own_seq: u64,
    pins: BTreeMap<FlowId, NodeId>,
    reservations: BTreeMap<FlowId, Reservation>,
    flows: BTreeMap<FlowId, SourceFlow>,
    next_rreq_id: u64,
    broken_notified: BTreeMap<FlowId, f64>,
}

type Ctx<'a, 'b> = &'a mut Cx<'b, QgrpNode>;

impl QgrpNode {
    pub fn route(&self) -> Option<&RouteEntry> {
        self.route.as_ref()
    }

    pub fn estimates(&self) -> impl Iterator<Item = &LinkEstimate> {
        self.estimates.values()
    }

    pub fn is_admitted(&self, flow: FlowId) -> bool {
        self.flows.get(&flow).is_some_and(|f| f.admitted)
    }

    /// Sum of reservations on the link to `next_hop`, skipping `except`.
    pub fn reserved_on(&self, next_hop: NodeId, except: Option<FlowId>) -> f64 {
        self.reservations
            .iter()
            .filter(|(f, r)| r.next_hop == next_hop && Some(**f) != except)
            .fold(0.0, |acc, (_, r)| acc + r.amount)
    }

    /// Installs what a hello carries, as if `hello` had just been received.
    pub fn hear(&mut self, hello: &Hello, now: f64) {
        let report = NeighborReport {
            peer: hello.sender,
            position: hello.position,
            idle_fraction: hello.idle_fraction,
            heard_at: now,
        };
        self.neighbors.insert(hello.sender, Neighbor { report, residual: hello.residual_energy });
    }

    /// Recomputes every link estimate from the current neighbor reports.
    pub fn refresh(&mut self, world: &World, config: &QgrpConfig, own_pos: Position, local_idle: f64, now: f64) {
        let reports: Vec<NeighborReport> = self.neighbors.values().map(|n| n.report).collect();
        let ctx = EstimationContext {
            table: &world.table,
            params: &world.dcf,
            density: world.density,
            b_no: world.b_no,
            tx_range: world.tx_range,
            expiry: config.hello.expiry(),
            window: world.idle_window,
        };
        self.estimates = refresh_estimates(own_pos, local_idle, now, &reports, &ctx)
            .into_iter()
            .map(|e| (e.peer, e))
            .collect();
    }

    fn candidates(&self, world: &World, exclude: &[NodeId]) -> Vec<Candidate> {
        self.estimates
            .values()
            .filter(|e| !exclude.contains(&e.peer))
            .filter_map(|e| {
                let n = self.neighbors.get(&e.peer)?;
                Some(Candidate {
                    id: e.peer,
                    position: n.report.position,
                    bandwidth: e.available_bandwidth,
                    residual_energy: n.residual,
                    initial_energy: world.energy[e.peer].initial,
                })
            })
            .collect()
    }

    fn vantage(cx: &Cx<'_, Self>) -> Vantage {
        Vantage { own: cx.position(), sink: cx.sink_position() }
    }

    fn link_bandwidth(&self, peer: NodeId) -> f64 {
        self.estimates.get(&peer).map_or(0.0, |e| e.available_bandwidth)
    }

    fn release(&mut self, flow: FlowId, cx: Ctx) {
        if let Some(r) = self.reservations.remove(&flow) {
            cx.log(Record::Release { flow, next_hop: r.next_hop, amount: r.amount });
        }
    }

    fn forget_neighbor(&mut self, peer: NodeId, cx: Ctx) {
        self.neighbors.remove(&peer);
        self.estimates.remove(&peer);
        if let Some(r) = self.route.as_mut() {
            if r.next_hop == peer {
                r.valid = false;
            }
        }
        self.pins.retain(|_, v| *v != peer);
        let gone: Vec<FlowId> =
            self.reservations.iter().filter(|(_, r)| r.next_hop == peer).map(|(f, _)| *f).collect();
        for f in gone {
            self.release(f, cx);
        }
    }

    fn on_hello_timer(&mut self, cx: Ctx) {
        let now = cx.now();
        let config = cx.config();
        let stale: Vec<NodeId> = self
            .neighbors
            .iter()
            .filter(|(_, n)| now - n.report.heard_at > config.hello.expiry())
            .map(|(id, _)| *id)
            .collect();
        for peer in stale {
            self.forget_neighbor(peer, cx);
        }
        let idle = cx.local_idle_fraction();
        self.refresh(cx.world(), config, cx.position(), idle, now);
        let expired: Vec<FlowId> = self
            .reservations
            .iter()
            .filter(|(_, r)| now - r.last_used > config.tuning.reservation_timeout)
            .map(|(f, _)| *f)
            .collect();
        for f in expired {
            self.release(f, cx);
        }

        self.hello_seq += 1;
        let hello = Hello {
            sender: cx.id(),
            position: cx.position(),
            residual_energy: cx.energy().residual,
            idle_fraction: idle,
            seq: self.hello_seq,
        };
        cx.broadcast(QgrpPacket::Hello(hello));
        let j = config.hello.jitter;
        let next = config.hello.interval * (1.0 + cx.rng().gen_range(-j..=j));
        cx.set_timer(next, QgrpTimer::Hello);
    }

    fn send_rreq(&mut self, flow_id: FlowId, cx: Ctx) {
        let Some(flow) = self.flows.get(&flow_id) else { return };
        if flow.failed || flow.admitted {
            return;
        }
        let required = flow.required;
        let me = cx.id();
        let at = Self::vantage(cx);
        let cands = self.candidates(cx.world(), &[me]);
        let config = cx.config();
        match select_next_hop(&at, &cands, required, config.weights, cx.world().b_no) {
            None => {
                let grant = max_grantable(&at, &cands);
                cx.log(Record::Notify { flow: flow_id, max_grantable: grant, cause: NotifyCause::Rejected });
                self.on_rejected(flow_id, grant, cx);
            }
            Some(next) => {
                let rreq_id = self.next_rreq_id;
                self.next_rreq_id += 1;
                let link_bw = self.link_bandwidth(next);
                let path_bw = link_bw.min(cx.world().b_no);
                let flow = self.flows.get_mut(&flow_id).expect("flow exists");
                flow.awaiting = Some(rreq_id);
                let rreq = Rreq {
                    flow_id,
                    source: me,
                    destination: cx.sink(),
                    rreq_id,
                    required_bandwidth: required,
                    path_bandwidth_so_far: path_bw,
                    dest_seq_known: self.route.as_ref().map_or(0, |r| r.dest_seq),
                    retry_index: flow.retries_used,
                    hop_trace: vec![me],
                };
                cx.log(Record::RreqForward { flow: flow_id, rreq_id, next, link_bw, path_bw, trace: vec![me] });
                cx.send(next, QgrpPacket::Rreq(rreq));
                cx.set_timer(config.retry.rrep_wait, QgrpTimer::RrepWait { flow: flow_id, rreq_id });
            }
        }
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
        if flow.retry_pending || flow.failed || flow.admitted {
            return;
        }
        if flow.retries_used >= max {
            self.fail_flow(flow_id, cx);
            return;
        }
        flow.retries_used += 1;
        flow.retry_pending = true;
        let delay = cx.config().retry.delay(flow.retries_used);
        cx.set_timer(delay, QgrpTimer::Retry { flow: flow_id });
    }

    fn on_rejected(&mut self, flow_id: FlowId, grant: f64, cx: Ctx) {
        let policy = cx.config().tuning.policy;
        let max = cx.config().retry.max_retries;
        let Some(flow) = self.flows.get_mut(&flow_id) else { return };
        flow.awaiting = None;
        if policy == SourcePolicy::Reduce && grant > 0.0 && grant < flow.required {
            if flow.retries_used >= max {
                self.fail_flow(flow_id, cx);
                return;
            }
            flow.retries_used += 1;
            flow.required = grant;
            self.send_rreq(flow_id, cx);
        } else {
            self.schedule_retry(flow_id, cx);
        }
    }

    fn on_rreq(&mut self, mut rreq: Rreq, cx: Ctx) {
        let me = cx.id();
        if rreq.hop_trace.contains(&me) {
            cx.log(Record::LoopWitness { flow: rreq.flow_id, kind: PacketKind::Rreq });
            cx.log(Record::Drop {
                reason: DropReason::Loop,
                kind: PacketKind::Rreq,
                flow: Some(rreq.flow_id),
                seq: None,
                trace: rreq.hop_trace,
            });
            return;
        }
        rreq.hop_trace.push(me);
        let prev = rreq.hop_trace[rreq.hop_trace.len() - 2];

        if cx.is_sink() {
            self.own_seq += 1;
            let rrep = Rrep {
                flow_id: rreq.flow_id,
                source: rreq.source,
                destination: me,
                rreq_id: rreq.rreq_id,
                dest_seq: self.own_seq,
                path_bandwidth: rreq.path_bandwidth_so_far,
                required_bandwidth: rreq.required_bandwidth,
                hop_trace: rreq.hop_trace,
            };
            cx.log(Record::RrepOrigin {
                flow: rrep.flow_id,
                rreq_id: rrep.rreq_id,
                path_bw: rrep.path_bandwidth,
                dest_seq: rrep.dest_seq,
                cached_bw: None,
                trace: rrep.hop_trace.clone(),
            });
            cx.send(prev, QgrpPacket::Rrep(rrep));
            return;
        }

        if cx.config().tuning.intermediate_replies {
            if let Some(r) = self.route.clone().filter(|r| r.valid && !rreq.hop_trace.contains(&r.next_hop)) {
                let path_bw = rreq.path_bandwidth_so_far.min(r.path_bandwidth);
                self.pins.insert(rreq.flow_id, r.next_hop);
                let rrep = Rrep {
                    flow_id: rreq.flow_id,
                    source: rreq.source,
                    destination: r.destination,
                    rreq_id: rreq.rreq_id,
                    dest_seq: r.dest_seq,
                    path_bandwidth: path_bw,
                    required_bandwidth: rreq.required_bandwidth,
                    hop_trace: rreq.hop_trace,
                };
                cx.log(Record::RrepOrigin {
                    flow: rrep.flow_id,
                    rreq_id: rrep.rreq_id,
                    path_bw,
                    dest_seq: r.dest_seq,
                    cached_bw: Some(r.path_bandwidth),
                    trace: rrep.hop_trace.clone(),
                });
                cx.send(prev, QgrpPacket::Rrep(rrep));
                return;
            }
        }

        let at = Self::vantage(cx);
        let cands = self.candidates(cx.world(), &rreq.hop_trace);
        let config = cx.config();
        match select_next_hop(&at, &cands, rreq.required_bandwidth, config.weights, cx.world().b_no) {
            Some(next) => {
                let link_bw = self.link_bandwidth(next);
                let path_bw = rreq.path_bandwidth_so_far.min(link_bw);
                rreq.path_bandwidth_so_far = path_bw;
                cx.log(Record::RreqForward {
                    flow: rreq.flow_id,
                    rreq_id: rreq.rreq_id,
                    next,
                    link_bw,
                    path_bw,
                    trace: rreq.hop_trace.clone(),
                });
                cx.send(next, QgrpPacket::Rreq(rreq));
            }
            None => {
                let grant = max_grantable(&at, &cands);
                cx.log(Record::Notify { flow: rreq.flow_id, max_grantable: grant, cause: NotifyCause::Rejected });
                let notify = Notify {
                    flow_id: rreq.flow_id,
                    rreq_id: rreq.rreq_id,
                    max_grantable_bandwidth: grant,
                    rejecting_node: me,
                    cause: NotifyCause::Rejected,
                    hop_trace: rreq.hop_trace,
                };
                cx.send(prev, QgrpPacket::Notify(notify));
            }
        }
    }

    fn on_rrep(&mut self, rrep: Rrep, cx: Ctx) {
        let me = cx.id();
        let Some(i) = rrep.hop_trace.iter().position(|&v| v == me) else { return };
        let Some(&next) = rrep.hop_trace.get(i + 1) else { return };
        let flow_id = rrep.flow_id;
        let now = cx.now();

        self.release(flow_id, cx);
        let estimate = self.link_bandwidth(next);
        let reserved = self.reserved_on(next, None);
        let required = rrep.required_bandwidth;
        if reserved + required > estimate || !self.neighbors.contains_key(&next) {
            cx.log(Record::Reject { flow: flow_id, next_hop: next, required, estimate, reserved });
            let grant = (estimate - reserved).max(0.0);
            cx.log(Record::Notify { flow: flow_id, max_grantable: grant, cause: NotifyCause::Rejected });
            if i == 0 {
                if self.flows.get(&flow_id).is_some_and(|f| f.awaiting == Some(rrep.rreq_id)) {
                    self.on_rejected(flow_id, grant, cx);
                }
            } else {
                let notify = Notify {
                    flow_id,
                    rreq_id: rrep.rreq_id,
                    max_grantable_bandwidth: grant,
                    rejecting_node: me,
                    cause: NotifyCause::Rejected,
                    hop_trace: rrep.hop_trace[..=i].to_vec(),
                };
                cx.send(rrep.hop_trace[i - 1], QgrpPacket::Notify(notify));
            }
            return;
        }
        self.reservations.insert(flow_id, Reservation { next_hop: next, amount: required, last_used: now });
        cx.log(Record::Reserve { flow: flow_id, next_hop: next, required, estimate, reserved_before: reserved });

        let fresher = match &self.route {
            Some(r) if r.valid => is_fresher((r.dest_seq, r.path_bandwidth), (rrep.dest_seq, rrep.path_bandwidth)),
            _ => true,
        };
        if fresher {
            let replaced = self.route.is_some();
            self.route = Some(RouteEntry {
                destination: rrep.destination,
                next_hop: next,
                dest_seq: rrep.dest_seq,
                path_bandwidth: rrep.path_bandwidth,
                established_at: now,
                valid: true,
            });
            cx.log(Record::RouteInstall {
                flow: flow_id,
                rreq_id: rrep.rreq_id,
                dest: rrep.destination,
                next_hop: next,
                dest_seq: rrep.dest_seq,
                path_bw: rrep.path_bandwidth,
                replaced,
            });
        }
        self.pins.insert(flow_id, next);

        if i > 0 {
            let prev = rrep.hop_trace[i - 1];
            cx.send(prev, QgrpPacket::Rrep(rrep));
            return;
        }
        let Some(flow) = self.flows.get_mut(&flow_id) else { return };
        if flow.awaiting != Some(rrep.rreq_id) || flow.failed {
            return;
        }
        flow.awaiting = None;
        flow.admitted = true;
        flow.retries_used = 0;
        self.broken_notified.remove(&flow_id);
        cx.log(Record::Admit { flow: flow_id, rreq_id: rrep.rreq_id, required, path_bw: rrep.path_bandwidth });
        let buffered: Vec<DataPacket> = flow.buffer.drain(..).collect();
        for d in buffered {
            self.forward_data(d, cx);
        }
    }

    fn on_notify(&mut self, notify: Notify, cx: Ctx) {
        let me = cx.id();
        let Some(i) = notify.hop_trace.iter().position(|&v| v == me) else { return };
        if i > 0 {
            let prev = notify.hop_trace[i - 1];
            cx.send(prev, QgrpPacket::Notify(notify));
            return;
        }
        self.source_notified(notify.flow_id, notify.rreq_id, notify.cause, notify.max_grantable_bandwidth, cx);
    }

    fn source_notified(&mut self, flow_id: FlowId, rreq_id: u64, cause: NotifyCause, grant: f64, cx: Ctx) {
        let Some(flow) = self.flows.get_mut(&flow_id) else { return };
        match cause {
            NotifyCause::Rejected => {
                if flow.awaiting == Some(rreq_id) {
                    self.on_rejected(flow_id, grant, cx);
                }
            }
            NotifyCause::RouteBroken => {
                if flow.admitted {
                    flow.admitted = false;
                    flow.retries_used = 0;
                    self.pins.remove(&flow_id);
                    self.send_rreq(flow_id, cx);
                }
            }
        }
    }

    fn route_broken(&mut self, data: &DataPacket, cx: Ctx) {
        let flow_id = data.flow_id;
        self.pins.remove(&flow_id);
        self.release(flow_id, cx);
        let now = cx.now();
        if self.broken_notified.get(&flow_id).is_some_and(|&t| now - t < 1.0) {
            return;
        }
        self.broken_notified.insert(flow_id, now);
        cx.log(Record::Notify { flow: flow_id, max_grantable: 0.0, cause: NotifyCause::RouteBroken });
        if data.source == cx.id() {
            self.source_notified(flow_id, 0, NotifyCause::RouteBroken, 0.0, cx);
            return;
        }
        let notify = Notify {
            flow_id,
            rreq_id: 0,
            max_grantable_bandwidth: 0.0,
            rejecting_node: cx.id(),
            cause: NotifyCause::RouteBroken,
            hop_trace: data.trace.clone(),
        };
        if data.trace.len() >= 2 {
            cx.send(data.trace[data.trace.len() - 2], QgrpPacket::Notify(notify));
        }
    }

    fn next_hop_for(&self, flow: FlowId) -> Option<NodeId> {
        let pinned = self.pins.get(&flow).copied();
        let routed = self.route.as_ref().filter(|r| r.valid).map(|r| r.next_hop);
        pinned.or(routed).filter(|n| self.neighbors.contains_key(n))
    }

    fn forward_data(&mut self, data: DataPacket, cx: Ctx) {
        match self.next_hop_for(data.flow_id) {
            Some(next) => {
                if let Some(r) = self.reservations.get_mut(&data.flow_id).filter(|r| r.next_hop == next) {
                    r.last_used = cx.now();
                }
                cx.send(next, QgrpPacket::Data(data));
            }
            None => {
                cx.log(drop_data(DropReason::NoRoute, &data));
                self.route_broken(&data, cx);
            }
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

impl Protocol for QgrpNode {
    type Packet = QgrpPacket;
    type Timer = QgrpTimer;
    type Config = QgrpConfig;

    fn new(id: NodeId, _world: &World, _config: &QgrpConfig) -> Self {
        Self {
            id,
            hello_seq: 0,
            neighbors: BTreeMap::new(),
            estimates: BTreeMap::new(),
            route: None,
            own_seq: 0,
            pins: BTreeMap::new(),
            reservations: BTreeMap::new(),
            flows: BTreeMap::new(),
            next_rreq_id: 0,
            broken_notified: BTreeMap::new(),
        }
    }

    fn start(&mut self, cx: &mut Cx<'_, Self>) {
        let interval = cx.config().hello.interval;
        let first = cx.rng().gen_range(0.0..interval);
        cx.set_timer(first, QgrpTimer::Hello);
    }

    fn on_timer(&mut self, timer: QgrpTimer, cx: &mut Cx<'_, Self>) {
        match timer {
            QgrpTimer::Hello => self.on_hello_timer(cx),
            QgrpTimer::RrepWait { flow, rreq_id } => {
                if self.flows.get(&flow).is_some_and(|f| f.awaiting == Some(rreq_id)) {
                    self.flows.get_mut(&flow).expect("flow exists").awaiting = None;
                    self.schedule_retry(flow, cx);
                }
            }
            QgrpTimer::Retry { flow } => {
                if let Some(f) = self.flows.get_mut(&flow) {
                    f.retry_pending = false;
                    self.send_rreq(flow, cx);
                }
            }
        }
    }

    fn on_packet(&mut self, _from: NodeId, packet: QgrpPacket, cx: &mut Cx<'_, Self>) {
        match packet {
            QgrpPacket::Hello(h) => self.hear(&h, cx.now()),
            QgrpPacket::Rreq(r) => self.on_rreq(r, cx),
            QgrpPacket::Rrep(r) => self.on_rrep(r, cx),
            QgrpPacket::Notify(n) => self.on_notify(n, cx),
            QgrpPacket::Data(d) => self.on_data(d, cx),
        }
    }

    fn on_flow_start(&mut self, flow: FlowId, rate: f64, cx: &mut Cx<'_, Self>) {
        self.flows.insert(
            flow,
            SourceFlow {
                required: rate,
                admitted: false,
                failed: false,
                awaiting: None,
                retry_pending: false,
                retries_used: 0,
                buffer: VecDeque::new(),
            },
        );
        self.send_rreq(flow, cx);
    }

    fn on_originate(&mut self, data: DataPacket, cx: &mut Cx<'_, Self>) {
        let capacity = cx.config().retry.buffer_capacity;
        let Some(flow) = self.flows.get_mut(&data.flow_id) else {
            cx.log(drop_data(DropReason::NoRoute, &data));
            return;
        };
        if flow.failed {
            cx.log(drop_data(DropReason::FlowFailed, &data));
        } else if flow.admitted {
            self.forward_data(data, cx);
        } else {
            if flow.buffer.len() >= capacity {
                if let Some(old) = flow.buffer.pop_front() {
                    cx.log(drop_data(DropReason::BufferOverflow, &old));
                }
            }
            flow.buffer.push_back(data);
        }
    }

    fn on_send_failure(&mut self, to: NodeId, packet: QgrpPacket, cx: &mut Cx<'_, Self>) {
        if let QgrpPacket::Data(d) = packet {
            if let Some(r) = self.route.as_mut().filter(|r| r.next_hop == to) {
                r.valid = false;
            }
            self.route_broken(&d, cx);
        }
    }
}

impl QgrpNode {
    pub fn id(&self) -> NodeId {
        self.id
    }
}
