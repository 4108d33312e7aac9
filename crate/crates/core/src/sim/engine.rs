use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dcf::lookup_p_c;
use crate::eventlog::{DropReason, EventLog, Record};
use crate::link::expected_backoff_slots;
use crate::packet::{DataPacket, PacketKind, WirePacket};
use crate::NodeId;

use super::radio::RadioRole;
use super::{rng_stream, Action, BusyTracker, Cx, Protocol, SimSetup, Stream, World};

enum EventKind<P: Protocol> {
    Timer { node: NodeId, timer: P::Timer },
    Arrive { node: NodeId, from: NodeId, packet: P::Packet },
    TxStart { node: NodeId },
    TxEnd { node: NodeId },
    FlowStart { flow: usize },
    Emit { flow: usize },
}

struct Event<P: Protocol> {
    time: f64,
    seq: u64,
    kind: EventKind<P>,
}

impl<P: Protocol> PartialEq for Event<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P: Protocol> Eq for Event<P> {}

impl<P: Protocol> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P: Protocol> Ord for Event<P> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Frame<P: Protocol> {
    to: Option<NodeId>,
    packet: P::Packet,
    attempt: u32,
}

struct Mac<P: Protocol> {
    queue: VecDeque<Frame<P>>,
    in_service: bool,
    /// Medium reserved by transmissions heard by this node until this time.
    busy_until: f64,
}

impl<P: Protocol> Default for Mac<P> {
    fn default() -> Self {
        Self { queue: VecDeque::new(), in_service: false, busy_until: 0.0 }
    }
}

/// Mean contention before an attempt: backoff slots inflated by the
/// expected number of deferrals.
pub fn contention_delay(p_c: f64, dcf: &crate::dcf::DcfParams) -> f64 {
    let p = p_c.clamp(0.0, 0.999);
    expected_backoff_slots(p, dcf).unwrap_or(0.0) * dcf.virtual_slot / (1.0 - p)
}

/// Counters gathered while a run executes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub events: u64,
    /// Events scheduled earlier than the event that scheduled them. Always 0.
    pub causality_violations: u64,
    pub deaths: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: EventLog,
    pub stats: RunStats,
    pub world: World,
}

/// Event engine for one run of protocol `P`.
pub struct Simulator<'s, P: Protocol> {
    setup: &'s SimSetup,
    config: &'s P::Config,
    world: World,
    nodes: Vec<P>,
    busy: Vec<BusyTracker>,
    mac: Vec<Mac<P>>,
    heap: BinaryHeap<Event<P>>,
    next_seq: u64,
    now: f64,
    log: EventLog,
    channel_rng: ChaCha8Rng,
    protocol_rng: ChaCha8Rng,
    flow_seq: Vec<u64>,
    stats: RunStats,
}

impl<'s, P: Protocol> Simulator<'s, P> {
    pub fn new(setup: &'s SimSetup, config: &'s P::Config) -> Self {
        let mut world = World::new(
            &setup.topology,
            setup.table.clone(),
            setup.dcf.clone(),
            setup.mac.b_no,
            setup.radio.initial_energy,
        );
        world.idle_window = setup.idle_window;
        let n = world.len();
        let nodes = (0..n).map(|i| P::new(i, &world, config)).collect();
        Self {
            setup,
            config,
            world,
            nodes,
            busy: vec![BusyTracker::default(); n],
            mac: (0..n).map(|_| Mac::default()).collect(),
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: 0.0,
            log: EventLog::default(),
            channel_rng: rng_stream(setup.seed, Stream::Channel),
            protocol_rng: rng_stream(setup.seed, Stream::Protocol),
            flow_seq: vec![0; setup.flows.len()],
            stats: RunStats::default(),
        }
    }

    pub fn run(mut self) -> RunOutput {
        for i in 0..self.world.len() {
            let p = self.world.positions[i];
            let record = Record::NodeInit { x: p.x, y: p.y, energy: self.world.energy[i].initial, sink: i == self.world.sink };
            self.log.push(0.0, i, record);
        }
        for (k, f) in self.setup.flows.iter().enumerate() {
            let record =
                Record::FlowInit { flow: f.id, rate: f.rate, packet_bits: f.packet_bits, start: f.start, stop: f.stop };
            self.log.push(0.0, f.source, record);
            if f.start < self.setup.duration {
                self.schedule(f.start, EventKind::FlowStart { flow: k });
            }
        }
        for i in 0..self.world.len() {
            self.with_node(i, |p, cx| p.start(cx));
        }

        while let Some(ev) = self.heap.pop() {
            if ev.time > self.setup.duration {
                break;
            }
            self.now = ev.time;
            self.stats.events += 1;
            self.dispatch(ev.kind);
        }

        let end = self.setup.duration;
        for i in 0..self.world.len() {
            self.log.push(end, i, Record::Final { residual: self.world.energy[i].residual });
        }
        RunOutput { log: self.log, stats: self.stats, world: self.world }
    }

    fn schedule(&mut self, time: f64, kind: EventKind<P>) {
        if time < self.now {
            self.stats.causality_violations += 1;
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, kind });
    }

    fn dispatch(&mut self, kind: EventKind<P>) {
        match kind {
            EventKind::Timer { node, timer } => {
                if self.world.is_alive(node) {
                    self.with_node(node, |p, cx| p.on_timer(timer, cx));
                }
            }
            EventKind::Arrive { node, from, packet } => self.arrive(node, from, packet),
            EventKind::TxStart { node } => self.tx_start(node),
            EventKind::TxEnd { node } => self.tx_end(node),
            EventKind::FlowStart { flow } => {
                let f = &self.setup.flows[flow];
                let (id, source, rate, start) = (f.id, f.source, f.rate, f.start);
                if self.world.is_alive(source) {
                    self.with_node(source, |p, cx| p.on_flow_start(id, rate, cx));
                    self.schedule(start, EventKind::Emit { flow });
                }
            }
            EventKind::Emit { flow } => self.emit(flow),
        }
    }

    fn with_node(&mut self, node: NodeId, f: impl FnOnce(&mut P, &mut Cx<'_, P>)) {
        let mut actions = Vec::new();
        {
            let mut cx = Cx::new(
                self.now,
                node,
                &self.world,
                &self.busy[node],
                self.config,
                &mut self.protocol_rng,
                &mut actions,
                &mut self.log,
            );
            f(&mut self.nodes[node], &mut cx);
        }
        for action in actions {
            match action {
                Action::Send { to, packet } => self.enqueue(node, to, packet),
                Action::Timer { delay, timer } => self.schedule(self.now + delay, EventKind::Timer { node, timer }),
                Action::Deliver(data) => {
                    let record = Record::Deliver {
                        flow: data.flow_id,
                        seq: data.sequence,
                        origin: data.origin_timestamp,
                        bits: data.payload_bits,
                        trace: data.trace,
                    };
                    self.log.push(self.now, node, record);
                }
            }
        }
    }

    fn emit(&mut self, flow: usize) {
        let f = &self.setup.flows[flow];
        let (id, source, bits, interval, stop) = (f.id, f.source, f.packet_bits, f.interval(), f.stop);
        if !self.world.is_alive(source) || self.now >= stop {
            return;
        }
        let seq = self.flow_seq[flow];
        self.flow_seq[flow] += 1;
        self.log.push(self.now, source, Record::Originate { flow: id, seq });
        let data = DataPacket {
            flow_id: id,
            source,
            payload_bits: bits,
            origin_timestamp: self.now,
            sequence: seq,
            trace: vec![source],
        };
        self.with_node(source, |p, cx| p.on_originate(data, cx));
        let next = self.now + interval;
        if next < stop {
            self.schedule(next, EventKind::Emit { flow });
        }
    }

    fn drop_record(reason: DropReason, packet: &P::Packet) -> Record {
        let data = packet.data();
        Record::Drop {
            reason,
            kind: packet.kind(),
            flow: data.map(|d| d.flow_id),
            seq: data.map(|d| d.sequence),
            trace: data.map(|d| d.trace.clone()).unwrap_or_default(),
        }
    }

    fn enqueue(&mut self, node: NodeId, to: Option<NodeId>, packet: P::Packet) {
        let mac = &mut self.mac[node];
        if mac.queue.len() >= self.setup.mac.queue_capacity {
            let record = Self::drop_record(DropReason::QueueFull, &packet);
            self.log.push(self.now, node, record);
            return;
        }
        mac.queue.push_back(Frame { to, packet, attempt: 0 });
        if !mac.in_service {
            self.begin_attempt(node);
        }
    }

    fn link_p_c(&self, from: NodeId, to: Option<NodeId>) -> f64 {
        let d = match to {
            Some(to) => self.world.distance(from, to),
            None => self.world.tx_range,
        };
        lookup_p_c(&self.world.table, self.world.density, d)
    }

    fn begin_attempt(&mut self, node: NodeId) {
        let Some(frame) = self.mac[node].queue.front() else {
            self.mac[node].in_service = false;
            return;
        };
        let p_c = self.link_p_c(node, frame.to);
        let start = (self.now + contention_delay(p_c, &self.world.dcf)).max(self.mac[node].busy_until);
        self.mac[node].in_service = true;
        self.schedule(start, EventKind::TxStart { node });
    }

    fn airtime(&self, bits: u32) -> f64 {
        bits as f64 / self.world.b_no
    }

    fn kill(&mut self, node: NodeId) {
        let queued: Vec<_> = self.mac[node].queue.drain(..).collect();
        for frame in queued {
            let record = Self::drop_record(DropReason::DeadNode, &frame.packet);
            self.log.push(self.now, node, record);
        }
        self.mac[node].in_service = false;
        self.log.push(self.now, node, Record::Death);
        self.stats.deaths += 1;
    }

    fn tx_start(&mut self, node: NodeId) {
        if !self.world.is_alive(node) {
            return;
        }
        let Some(frame) = self.mac[node].queue.front() else {
            self.mac[node].in_service = false;
            return;
        };
        let bits = frame.packet.size_bits(&self.setup.sizes);
        let (to, attempt, kind) = (frame.to, frame.attempt, frame.packet.kind());
        let d = match to {
            Some(to) => self.world.distance(node, to),
            None => self.world.tx_range,
        };
        let cost = self.setup.radio.cost(RadioRole::Tx, bits, d);
        let joules = self.world.energy[node].debit(cost);
        self.log.push(self.now, node, Record::Tx { kind, to, bits, attempt, joules });
        if self.world.energy[node].is_depleted() {
            self.kill(node);
            return;
        }
        let end = self.now + self.airtime(bits);
        let horizon = self.now - self.world.idle_window;
        for i in 0..=self.world.in_range[node].len() {
            let v = if i == 0 { node } else { self.world.in_range[node][i - 1] };
            self.busy[v].prune(horizon);
            self.busy[v].add(self.now, end);
            let m = &mut self.mac[v];
            m.busy_until = m.busy_until.max(end);
        }
        self.schedule(end, EventKind::TxEnd { node });
    }

    fn tx_end(&mut self, node: NodeId) {
        if !self.world.is_alive(node) {
            return;
        }
        let Some(frame) = self.mac[node].queue.front_mut() else {
            self.mac[node].in_service = false;
            return;
        };
        match frame.to {
            None => {
                let frame = self.mac[node].queue.pop_front().expect("head frame");
                let receivers: Vec<NodeId> = self.world.live_neighbors(node).collect();
                for v in receivers {
                    let p_c = self.link_p_c(node, Some(v));
                    if self.channel_rng.gen::<f64>() >= p_c {
                        self.schedule(self.now, EventKind::Arrive { node: v, from: node, packet: frame.packet.clone() });
                    }
                }
            }
            Some(to) => {
                let p_c = lookup_p_c(&self.world.table, self.world.density, self.world.distance(node, to));
                let lost = self.channel_rng.gen::<f64>() < p_c;
                if !lost && self.world.is_alive(to) {
                    let frame = self.mac[node].queue.pop_front().expect("head frame");
                    self.schedule(self.now, EventKind::Arrive { node: to, from: node, packet: frame.packet });
                } else if frame.attempt < self.setup.mac.retries {
                    frame.attempt += 1;
                } else {
                    let frame = self.mac[node].queue.pop_front().expect("head frame");
                    let record = Self::drop_record(DropReason::MacFailure, &frame.packet);
                    self.log.push(self.now, node, record);
                    self.with_node(node, |p, cx| p.on_send_failure(to, frame.packet, cx));
                }
            }
        }
        self.begin_attempt(node);
    }

    fn arrive(&mut self, node: NodeId, from: NodeId, packet: P::Packet) {
        if !self.world.is_alive(node) {
            return;
        }
        let bits = packet.size_bits(&self.setup.sizes);
        let kind: PacketKind = packet.kind();
        let cost = self.setup.radio.cost(RadioRole::Rx, bits, 0.0);
        let joules = self.world.energy[node].debit(cost);
        self.log.push(self.now, node, Record::Rx { kind, from, bits, joules });
        if self.world.energy[node].is_depleted() {
            self.kill(node);
            return;
        }
        self.with_node(node, |p, cx| p.on_packet(from, packet, cx));
    }
}
