//! Deterministic discrete-event simulation of a sensor field.
//!
//! The MAC is abstracted: each transmission attempt waits the mean
//! contention delay predicted by the DCF model for the link, occupies the
//! medium of every node in range for its airtime, and is lost with the
//! link's tabulated collision probability. Unicast frames are retried up to
//! the configured limit; broadcasts are sent once. Routing protocols plug in
//! through [`Protocol`] and only ever see their own node's state plus the
//! read-only [`World`].

mod engine;
pub mod radio;
pub mod topology;

use std::collections::VecDeque;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dcf::{CollisionTable, DcfParams};
use crate::eventlog::{EventLog, Record};
use crate::geometry::{distance, Position};
use crate::packet::{DataPacket, PacketSizes, WirePacket};
use crate::{FlowId, NodeId};

pub use engine::{contention_delay, RunOutput, RunStats, Simulator};
pub use radio::{NodeEnergy, RadioModel, RadioRole};
pub use topology::{generate_topology, Topology};

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stream {
    Positions = 1,
    Sink = 2,
    Sources = 3,
    Channel = 4,
    Protocol = 5,
}

pub(crate) fn rng_stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacConfig {
    /// Nominal channel capacity, bits per second.
    pub b_no: f64,
    /// Retransmissions after the first unicast attempt.
    pub retries: u32,
    pub queue_capacity: usize,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self { b_no: 2e6, retries: 4, queue_capacity: 50 }
    }
}

/// A constant-bit-rate flow towards the sink.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub id: FlowId,
    pub source: NodeId,
    /// Bits per second.
    pub rate: f64,
    pub packet_bits: u32,
    pub start: f64,
    pub stop: f64,
}

impl FlowSpec {
    pub fn interval(&self) -> f64 {
        self.packet_bits as f64 / self.rate
    }
}

/// Everything a run needs besides the protocol's own configuration.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub topology: Topology,
    pub flows: Vec<FlowSpec>,
    pub table: CollisionTable,
    pub dcf: DcfParams,
    pub mac: MacConfig,
    pub radio: RadioModel,
    pub sizes: PacketSizes,
    pub duration: f64,
    /// Seeds the channel-loss and protocol random streams.
    pub seed: u64,
    /// Window over which nodes measure their idle fraction, seconds.
    pub idle_window: f64,
}

/// Shared, read-only (to protocols) state of the field.
#[derive(Debug, Clone)]
pub struct World {
    pub positions: Vec<Position>,
    pub in_range: Vec<Vec<NodeId>>,
    pub sink: NodeId,
    pub tx_range: f64,
    /// Nodes per km².
    pub density: f64,
    pub energy: Vec<NodeEnergy>,
    pub table: CollisionTable,
    pub dcf: DcfParams,
    pub b_no: f64,
    pub idle_window: f64,
}

impl World {
    pub fn new(topology: &Topology, table: CollisionTable, dcf: DcfParams, b_no: f64, initial_energy: f64) -> Self {
        let n = topology.len();
        Self {
            positions: topology.positions.clone(),
            in_range: topology.neighbor_lists(),
            sink: topology.sink,
            tx_range: topology.tx_range,
            density: n as f64 / (topology.field_size * topology.field_size) * crate::dcf::DENSITY_UNIT_M2,
            energy: vec![NodeEnergy::new(initial_energy); n],
            table,
            dcf,
            b_no,
            idle_window: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_alive(&self, node: NodeId) -> bool {
        !self.energy[node].is_depleted()
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        distance(self.positions[a], self.positions[b])
    }

    /// Live nodes currently within range of `node`.
    pub fn live_neighbors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_range[node].iter().copied().filter(|&v| self.is_alive(v))
    }
}

/// Merged busy intervals of the medium as seen by one node.
#[derive(Debug, Clone, Default)]
pub struct BusyTracker {
    intervals: VecDeque<(f64, f64)>,
}

impl BusyTracker {
    pub fn add(&mut self, start: f64, end: f64) {
        if let Some(last) = self.intervals.back_mut() {
            if start <= last.1 && end >= last.0 {
                last.0 = last.0.min(start);
                last.1 = last.1.max(end);
                return;
            }
        }
        self.intervals.push_back((start, end));
    }

    pub fn prune(&mut self, before: f64) {
        while self.intervals.front().is_some_and(|iv| iv.1 < before) {
            self.intervals.pop_front();
        }
    }

    /// Fraction of `[now - window, now]` during which the medium was idle.
    pub fn idle_fraction(&self, now: f64, window: f64) -> f64 {
        let from = now - window;
        let busy: f64 = self
            .intervals
            .iter()
            .map(|&(s, e)| (e.min(now) - s.max(from)).max(0.0))
            .sum();
        (1.0 - busy / window).clamp(0.0, 1.0)
    }
}

/// Side effects a protocol handler asks the engine to perform.
#[derive(Debug, Clone)]
pub enum Action<P: Protocol> {
    Send { to: Option<NodeId>, packet: P::Packet },
    Timer { delay: f64, timer: P::Timer },
    Deliver(DataPacket),
}

/// Handler context for one node at one instant.
pub struct Cx<'a, P: Protocol> {
    now: f64,
    node: NodeId,
    world: &'a World,
    busy: &'a BusyTracker,
    config: &'a P::Config,
    rng: &'a mut ChaCha8Rng,
    actions: &'a mut Vec<Action<P>>,
    log: &'a mut EventLog,
}

impl<'a, P: Protocol> Cx<'a, P> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        now: f64,
        node: NodeId,
        world: &'a World,
        busy: &'a BusyTracker,
        config: &'a P::Config,
        rng: &'a mut ChaCha8Rng,
        actions: &'a mut Vec<Action<P>>,
        log: &'a mut EventLog,
    ) -> Self {
        Self { now, node, world, busy, config, rng, actions, log }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn id(&self) -> NodeId {
        self.node
    }

    pub fn world(&self) -> &'a World {
        self.world
    }

    pub fn config(&self) -> &'a P::Config {
        self.config
    }

    pub fn position(&self) -> Position {
        self.world.positions[self.node]
    }

    pub fn sink(&self) -> NodeId {
        self.world.sink
    }

    pub fn sink_position(&self) -> Position {
        self.world.positions[self.world.sink]
    }

    pub fn is_sink(&self) -> bool {
        self.node == self.world.sink
    }

    pub fn energy(&self) -> NodeEnergy {
        self.world.energy[self.node]
    }

    pub fn local_idle_fraction(&self) -> f64 {
        self.busy.idle_fraction(self.now, self.world.idle_window)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
    }

    pub fn send(&mut self, to: NodeId, packet: P::Packet) {
        self.actions.push(Action::Send { to: Some(to), packet });
    }

    pub fn broadcast(&mut self, packet: P::Packet) {
        self.actions.push(Action::Send { to: None, packet });
    }

    pub fn set_timer(&mut self, delay: f64, timer: P::Timer) {
        self.actions.push(Action::Timer { delay: delay.max(0.0), timer });
    }

    /// Hands a data packet to the application at the sink.
    pub fn deliver(&mut self, data: DataPacket) {
        self.actions.push(Action::Deliver(data));
    }

    pub fn log(&mut self, record: Record) {
        self.log.push(self.now, self.node, record);
    }
}

/// A routing protocol instance running on one node.
pub trait Protocol: Sized {
    type Packet: WirePacket + std::fmt::Debug;
    type Timer: Clone + std::fmt::Debug;
    type Config;

    fn new(id: NodeId, world: &World, config: &Self::Config) -> Self;

    fn start(&mut self, _cx: &mut Cx<'_, Self>) {}

    fn on_timer(&mut self, timer: Self::Timer, cx: &mut Cx<'_, Self>);

    fn on_packet(&mut self, from: NodeId, packet: Self::Packet, cx: &mut Cx<'_, Self>);

    /// A locally originated flow becomes active.
    fn on_flow_start(&mut self, flow: FlowId, rate: f64, cx: &mut Cx<'_, Self>);

    /// The application at this node produced a data packet.
    fn on_originate(&mut self, data: DataPacket, cx: &mut Cx<'_, Self>);

    /// A unicast exhausted its MAC retries.
    fn on_send_failure(&mut self, _to: NodeId, _packet: Self::Packet, _cx: &mut Cx<'_, Self>) {}
}

/// Drives protocol handlers directly, without the event engine. Lets tests
/// feed a single node packets and inspect exactly what it emits.
pub struct Bench<P: Protocol> {
    pub world: World,
    pub config: P::Config,
    pub busy: BusyTracker,
    pub rng: ChaCha8Rng,
    pub log: EventLog,
}

impl<P: Protocol> Bench<P> {
    pub fn new(world: World, config: P::Config) -> Self {
        Self { world, config, busy: BusyTracker::default(), rng: ChaCha8Rng::seed_from_u64(0), log: EventLog::default() }
    }

    pub fn node(&self, id: NodeId) -> P {
        P::new(id, &self.world, &self.config)
    }

    /// Runs `f` against `node` at time `now` and returns the actions it took.
    pub fn call(&mut self, node: &mut P, id: NodeId, now: f64, f: impl FnOnce(&mut P, &mut Cx<'_, P>)) -> Vec<Action<P>> {
        let mut actions = Vec::new();
        let mut cx = Cx::new(now, id, &self.world, &self.busy, &self.config, &mut self.rng, &mut actions, &mut self.log);
        f(node, &mut cx);
        actions
    }
}
