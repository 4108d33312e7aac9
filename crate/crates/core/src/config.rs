//! Scenario configuration: a TOML document whose sections mirror the library
//! modules. Every key is optional; unknown keys are rejected.
//!
//! ```toml
//! protocol = "qgrp"          # or "aodv"
//!
//! [topology]
//! n = 100
//! field = 1000.0             # side of the square field, m
//! tx_range = 250.0
//! seed = 1
//!
//! [weights]
//! alpha = 0.7                # beta is filled in as 1 - alpha
//!
//! [[flows]]
//! rate = 500000.0            # bits/s
//! packet_bits = 2000
//! start = 5.0
//!
//! [dcf]
//! table = "published"        # or "solved" from the parameters below
//!
//! [sim]
//! duration = 100.0
//! warm_up = 5.0
//! repetitions = 10
//!
//! [experiment]
//! sizes = [90, 100, 110, 120]
//! ```
//!
//! Remaining sections: `mac`, `radio`, `retry`, `hello`, `qgrp`, `aodv`, `pkt`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aodv::{AodvConfig, AodvTuning};
use crate::dcf::{build_table, CollisionModel, CollisionTable, DcfParams, SolverSettings};
use crate::geometry::Position;
use crate::metrics::MeasureWindow;
use crate::packet::PacketSizes;
use crate::qgrp::{HelloConfig, MetricWeights, QgrpConfig, QgrpTuning, RetryConfig};
use crate::sim::{generate_topology, rng_stream, FlowSpec, MacConfig, RadioModel, SimSetup, Stream, Topology};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    #[default]
    Qgrp,
    Aodv,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Qgrp => "qgrp",
            ProtocolKind::Aodv => "aodv",
        }
    }
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub n: usize,
    pub field: f64,
    pub tx_range: f64,
    pub seed: u64,
    /// Fixed node positions instead of random placement.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    /// Fixed sink instead of a random one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sink: Option<usize>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self { n: 100, field: 1000.0, tx_range: 250.0, seed: 1, positions: None, sink: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// Bits per second.
    pub rate: f64,
    pub packet_bits: u32,
    pub start: f64,
    /// Defaults to the end of the run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    /// Fixed source node instead of a random one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<usize>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { rate: 500e3, packet_bits: 2000, start: 5.0, stop: None, source: None }
    }
}

fn default_flows() -> Vec<FlowConfig> {
    [500e3, 400e3, 200e3].into_iter().map(|rate| FlowConfig { rate, ..FlowConfig::default() }).collect()
}

/// Where the collision table used by the simulator comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableSource {
    /// The reference density × distance grid.
    #[default]
    Published,
    /// Solved from the `dcf` parameters over `densities` × `distances`.
    Solved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DcfConfig {
    pub cw_min: u32,
    pub cw_max: u32,
    pub payload_duration: f64,
    pub virtual_slot: f64,
    pub carrier_sense_radius: f64,
    pub interference_radius: f64,
    pub collision_model: CollisionModel,
    pub table: TableSource,
    /// Nodes per km².
    pub densities: Vec<f64>,
    /// Meters.
    pub distances: Vec<f64>,
}

impl Default for DcfConfig {
    fn default() -> Self {
        let p = DcfParams::default();
        let t = CollisionTable::published();
        Self {
            cw_min: p.cw_min,
            cw_max: p.cw_max,
            payload_duration: p.payload_duration,
            virtual_slot: p.virtual_slot,
            carrier_sense_radius: p.carrier_sense_radius,
            interference_radius: p.interference_radius,
            collision_model: p.collision_model,
            table: TableSource::default(),
            densities: t.densities().to_vec(),
            distances: t.distances().to_vec(),
        }
    }
}

impl DcfConfig {
    pub fn params(&self) -> DcfParams {
        DcfParams {
            cw_min: self.cw_min,
            cw_max: self.cw_max,
            payload_duration: self.payload_duration,
            virtual_slot: self.virtual_slot,
            carrier_sense_radius: self.carrier_sense_radius,
            interference_radius: self.interference_radius,
            collision_model: self.collision_model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub duration: f64,
    /// Initial interval excluded from throughput, seconds.
    pub warm_up: f64,
    /// Window over which idle fractions are measured, seconds.
    pub idle_window: f64,
    pub repetitions: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { duration: 100.0, warm_up: 5.0, idle_window: 1.0, repetitions: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Topology sizes to sweep; empty means just `topology.n`.
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub protocol: ProtocolKind,
    pub topology: TopologyConfig,
    pub weights: WeightsConfig,
    pub flows: Vec<FlowConfig>,
    pub dcf: DcfConfig,
    pub mac: MacConfig,
    pub radio: RadioModel,
    pub retry: RetryConfig,
    pub hello: HelloConfig,
    pub qgrp: QgrpTuning,
    pub aodv: AodvTuning,
    pub pkt: PacketSizes,
    pub sim: SimConfig,
    pub experiment: ExperimentConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            protocol: ProtocolKind::default(),
            topology: TopologyConfig::default(),
            weights: WeightsConfig { alpha: Some(0.7), beta: Some(0.3) },
            flows: default_flows(),
            dcf: DcfConfig::default(),
            mac: MacConfig::default(),
            radio: RadioModel::default(),
            retry: RetryConfig::default(),
            hello: HelloConfig::default(),
            qgrp: QgrpTuning::default(),
            aodv: AodvTuning::default(),
            pkt: PacketSizes::default(),
            sim: SimConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

impl ScenarioConfig {
    /// Parses, fills in defaults and validates.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
            ConfigError::Parse { line, column, message: e.message().to_string() }
        })?;
        config.normalize();
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    fn normalize(&mut self) {
        let w = &mut self.weights;
        match (w.alpha, w.beta) {
            (Some(a), None) => w.beta = Some(1.0 - a),
            (None, Some(b)) => w.alpha = Some(1.0 - b),
            (None, None) => *w = ScenarioConfig::default().weights,
            (Some(_), Some(_)) => {}
        }
    }

    pub fn metric_weights(&self) -> MetricWeights {
        let d = MetricWeights::default();
        MetricWeights { alpha: self.weights.alpha.unwrap_or(d.alpha), beta: self.weights.beta.unwrap_or(d.beta) }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |path: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(path, format!("must be positive and finite, got {v}")))
            }
        };
        let t = &self.topology;
        if t.n < 2 {
            return Err(invalid("topology.n", format!("must be at least 2, got {}", t.n)));
        }
        positive("topology.field", t.field)?;
        positive("topology.tx_range", t.tx_range)?;
        if let Some(ps) = &t.positions {
            if ps.len() != t.n {
                return Err(invalid("topology.positions", format!("has {} entries but topology.n = {}", ps.len(), t.n)));
            }
            for (i, p) in ps.iter().enumerate() {
                if !p.iter().all(|c| (0.0..=t.field).contains(c)) {
                    return Err(invalid(format!("topology.positions[{i}]"), "lies outside the field"));
                }
            }
        }
        if let Some(s) = t.sink {
            if s >= t.n {
                return Err(invalid("topology.sink", format!("must be below topology.n = {}", t.n)));
            }
        }
        for &n in &self.experiment.sizes {
            if n < 2 {
                return Err(invalid("experiment.sizes", format!("sizes must be at least 2, got {n}")));
            }
            if t.positions.is_some() && n != t.n {
                return Err(invalid("experiment.sizes", "fixed positions only allow topology.n"));
            }
        }

        self.metric_weights().validate().map_err(|e| invalid("weights", e.to_string()))?;

        let min_n = self.sizes().into_iter().min().unwrap_or(t.n);
        if self.flows.len() > min_n - 1 {
            return Err(invalid("flows", format!("{} flows need more than {min_n} nodes", self.flows.len())));
        }
        for (i, f) in self.flows.iter().enumerate() {
            positive(&format!("flows[{i}].rate"), f.rate)?;
            if f.packet_bits == 0 {
                return Err(invalid(format!("flows[{i}].packet_bits"), "must be positive"));
            }
            if !(f.start >= 0.0 && f.start.is_finite()) {
                return Err(invalid(format!("flows[{i}].start"), "must be non-negative"));
            }
            if let Some(stop) = f.stop {
                if !(stop > f.start) {
                    return Err(invalid(format!("flows[{i}].stop"), "must be after start"));
                }
            }
            if let Some(s) = f.source {
                if s >= min_n {
                    return Err(invalid(format!("flows[{i}].source"), format!("must be below {min_n}")));
                }
                if Some(s) == t.sink {
                    return Err(invalid(format!("flows[{i}].source"), "cannot be the sink"));
                }
                if self.flows[..i].iter().any(|g| g.source == Some(s)) {
                    return Err(invalid(format!("flows[{i}].source"), "already used by another flow"));
                }
            }
        }

        let dcf = self.dcf.params();
        dcf.validate().map_err(|e| invalid("dcf", e.to_string()))?;
        if self.dcf.table == TableSource::Solved && (self.dcf.densities.is_empty() || self.dcf.distances.is_empty()) {
            return Err(invalid("dcf.densities", "solved tables need non-empty axes"));
        }

        positive("mac.b_no", self.mac.b_no)?;
        if self.mac.queue_capacity == 0 {
            return Err(invalid("mac.queue_capacity", "must be at least 1"));
        }
        let r = &self.radio;
        if !(r.e_elec >= 0.0 && r.e_amp >= 0.0) {
            return Err(invalid("radio", "energy coefficients must be non-negative"));
        }
        positive("radio.initial_energy", r.initial_energy)?;
        positive("retry.rrep_wait", self.retry.rrep_wait)?;
        positive("retry.backoff", self.retry.backoff)?;
        if self.retry.buffer_capacity == 0 {
            return Err(invalid("retry.buffer_capacity", "must be at least 1"));
        }
        positive("hello.interval", self.hello.interval)?;
        if !(0.0..1.0).contains(&self.hello.jitter) {
            return Err(invalid("hello.jitter", "must lie in [0, 1)"));
        }
        positive("hello.expiry_intervals", self.hello.expiry_intervals)?;
        positive("qgrp.reservation_timeout", self.qgrp.reservation_timeout)?;
        positive("aodv.active_route_timeout", self.aodv.active_route_timeout)?;
        positive("sim.duration", self.sim.duration)?;
        if !(self.sim.warm_up >= 0.0 && self.sim.warm_up < self.sim.duration) {
            return Err(invalid("sim.warm_up", "must lie in [0, sim.duration)"));
        }
        positive("sim.idle_window", self.sim.idle_window)?;
        if self.sim.repetitions == 0 {
            return Err(invalid("sim.repetitions", "must be at least 1"));
        }
        Ok(())
    }

    /// Topology sizes this configuration sweeps.
    pub fn sizes(&self) -> Vec<usize> {
        if self.experiment.sizes.is_empty() {
            vec![self.topology.n]
        } else {
            self.experiment.sizes.clone()
        }
    }

    pub fn window(&self) -> MeasureWindow {
        MeasureWindow { warm_up: self.sim.warm_up, duration: self.sim.duration }
    }

    pub fn collision_table(&self) -> Result<CollisionTable, ConfigError> {
        match self.dcf.table {
            TableSource::Published => Ok(CollisionTable::published()),
            TableSource::Solved => {
                build_table(&self.dcf.densities, &self.dcf.distances, &self.dcf.params(), SolverSettings::default())
                    .map_err(|e| invalid("dcf", e.to_string()))
            }
        }
    }

    pub fn qgrp_config(&self) -> QgrpConfig {
        QgrpConfig {
            weights: self.metric_weights(),
            hello: self.hello.clone(),
            retry: self.retry.clone(),
            tuning: self.qgrp.clone(),
        }
    }

    pub fn aodv_config(&self) -> AodvConfig {
        AodvConfig { retry: self.retry.clone(), tuning: self.aodv.clone() }
    }

    /// Seed of repetition `repetition`; it picks the sink and the sources.
    pub fn run_seed(&self, repetition: u32) -> u64 {
        self.topology.seed.wrapping_add(repetition as u64)
    }

    /// Node placement for a sweep size. The sink is picked from `run_seed`.
    pub fn topology_for(&self, n: usize, run_seed: u64) -> Topology {
        let t = &self.topology;
        let mut topo = match &t.positions {
            Some(ps) => Topology {
                positions: ps.iter().map(|p| Position::new(p[0], p[1])).collect(),
                sink: 0,
                field_size: t.field,
                tx_range: t.tx_range,
                seed: t.seed,
            },
            None => generate_topology(n, t.field, t.tx_range, t.seed),
        };
        topo.sink = match t.sink {
            Some(s) => s,
            None => rng_stream(run_seed, Stream::Sink).gen_range(0..n),
        };
        topo
    }

    /// Everything one run needs.
    pub fn sim_setup(&self, n: usize, repetition: u32, table: &CollisionTable) -> Result<SimSetup, ConfigError> {
        let seed = self.run_seed(repetition);
        let topology = self.topology_for(n, seed);
        let sink = topology.sink;
        if self.flows.iter().any(|f| f.source == Some(sink)) {
            return Err(invalid("flows", format!("a fixed source coincides with the sink {sink}")));
        }
        let mut pool: Vec<usize> =
            (0..n).filter(|&v| v != sink && !self.flows.iter().any(|f| f.source == Some(v))).collect();
        let mut rng = rng_stream(seed, Stream::Sources);
        let mut flows = Vec::with_capacity(self.flows.len());
        for (i, f) in self.flows.iter().enumerate() {
            let source = match f.source {
                Some(s) => s,
                None => {
                    if pool.is_empty() {
                        return Err(invalid(format!("flows[{i}]"), "no node left to act as source"));
                    }
                    pool.remove(rng.gen_range(0..pool.len()))
                }
            };
            flows.push(FlowSpec {
                id: i as u32,
                source,
                rate: f.rate,
                packet_bits: f.packet_bits,
                start: f.start,
                stop: f.stop.unwrap_or(self.sim.duration).min(self.sim.duration),
            });
        }
        Ok(SimSetup {
            topology,
            flows,
            table: table.clone(),
            dcf: self.dcf.params(),
            mac: self.mac.clone(),
            radio: self.radio.clone(),
            sizes: self.pkt.clone(),
            duration: self.sim.duration,
            seed,
            idle_window: self.sim.idle_window,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        let c = ScenarioConfig::parse("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.flows.len(), 3);
        assert_eq!(c.metric_weights(), MetricWeights { alpha: 0.7, beta: 0.3 });
    }

    #[test]
    fn beta_is_filled_in() {
        let c = ScenarioConfig::parse("[weights]\nalpha = 0.6\n").unwrap();
        assert_eq!(c.weights.beta, Some(1.0 - 0.6));
        let c = ScenarioConfig::parse("[weights]\nalpha = 0.7\n").unwrap();
        assert!((c.metric_weights().beta - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bad_sum_names_the_section() {
        let err = ScenarioConfig::parse("[weights]\nalpha = 0.7\nbeta = 0.5\n").unwrap_err();
        match err {
            ConfigError::Invalid { path, .. } => assert_eq!(path, "weights"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_syntax_errors_have_positions() {
        match ScenarioConfig::parse("[sim]\nduraton = 5.0\n").unwrap_err() {
            ConfigError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match ScenarioConfig::parse("[sim]\n\nduration = = 3\n").unwrap_err() {
            ConfigError::Parse { line, column, .. } => assert_eq!((line, column), (3, 12)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_paths() {
        let path = |text: &str| match ScenarioConfig::parse(text).unwrap_err() {
            ConfigError::Invalid { path, .. } => path,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(path("[topology]\nn = 1\n"), "topology.n");
        assert_eq!(path("[[flows]]\nrate = -1.0\n"), "flows[0].rate");
        assert_eq!(path("[sim]\nwarm_up = 200.0\n"), "sim.warm_up");
        assert_eq!(path("[dcf]\ncw_max = 1000\n"), "dcf");
        assert_eq!(path("[hello]\njitter = 1.5\n"), "hello.jitter");
    }

    #[test]
    fn emit_round_trips() {
        let mut c = ScenarioConfig::parse("protocol = \"aodv\"\n[experiment]\nsizes = [90, 120]\n").unwrap();
        c.topology.sink = Some(3);
        c.flows[1].source = Some(7);
        c.flows[2].stop = Some(50.0);
        assert_eq!(ScenarioConfig::parse(&c.emit()).unwrap(), c);
    }

    #[test]
    fn sources_are_distinct_and_not_the_sink() {
        let c = ScenarioConfig::default();
        let t = CollisionTable::published();
        for rep in 0..20 {
            let s = c.sim_setup(100, rep, &t).unwrap();
            let mut ids: Vec<usize> = s.flows.iter().map(|f| f.source).collect();
            assert!(!ids.contains(&s.topology.sink));
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), 3);
        }
        // positions stay put across repetitions, the sink moves
        let a = c.sim_setup(100, 0, &t).unwrap();
        let b = c.sim_setup(100, 1, &t).unwrap();
        assert_eq!(a.topology.positions, b.topology.positions);
    }
}
