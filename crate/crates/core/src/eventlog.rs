//! Structured event log.
//!
//! Every run produces one record per observable event. The text form is one
//! line per record:
//!
//! ```text
//! time,node,kind,field,...
//! ```
//!
//! | kind          | fields after `kind`                                              |
//! |---------------|------------------------------------------------------------------|
//! | `init`        | x, y, initial_energy, is_sink (0/1)                              |
//! | `flow`        | flow, rate, packet_bits, start, stop                             |
//! | `tx`          | packet_kind, to (`*` = broadcast), bits, attempt, joules         |
//! | `rx`          | packet_kind, from, bits, joules                                  |
//! | `death`       |                                                                  |
//! | `originate`   | flow, seq                                                        |
//! | `deliver`     | flow, seq, origin_time, payload_bits, trace                      |
//! | `drop`        | reason, packet_kind, flow, seq, trace (`-` when not data)        |
//! | `rreq_fwd`    | flow, rreq_id, next, link_bw, path_bw, trace                     |
//! | `rrep_origin` | flow, rreq_id, path_bw, dest_seq, cached_bw (`-` if none), trace |
//! | `route`       | flow, rreq_id, dest, next_hop, dest_seq, path_bw, replaced (0/1) |
//! | `reserve`     | flow, next_hop, required, estimate, reserved_before              |
//! | `release`     | flow, next_hop, amount                                           |
//! | `reject`      | flow, next_hop, required, estimate, reserved                     |
//! | `admit`       | flow, rreq_id, required, path_bw                                 |
//! | `notify`      | flow, max_grantable, cause (`rejected`/`broken`)                 |
//! | `flow_failed` | flow                                                             |
//! | `loop`        | flow, packet_kind                                                |
//! | `aodv_route`  | dest, next_hop, hop_count, dest_seq                              |
//! | `final`       | residual_energy                                                  |
//!
//! Traces are node ids joined by `-`. Floats use the shortest representation
//! that parses back to the same value, so a persisted log reproduces every
//! metric exactly.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::packet::PacketKind;
use crate::{FlowId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    QueueFull,
    MacFailure,
    NoRoute,
    BufferOverflow,
    FlowFailed,
    DeadNode,
    Loop,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::QueueFull => "queue_full",
            DropReason::MacFailure => "mac_failure",
            DropReason::NoRoute => "no_route",
            DropReason::BufferOverflow => "buffer_overflow",
            DropReason::FlowFailed => "flow_failed",
            DropReason::DeadNode => "dead_node",
            DropReason::Loop => "loop",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "queue_full" => DropReason::QueueFull,
            "mac_failure" => DropReason::MacFailure,
            "no_route" => DropReason::NoRoute,
            "buffer_overflow" => DropReason::BufferOverflow,
            "flow_failed" => DropReason::FlowFailed,
            "dead_node" => DropReason::DeadNode,
            "loop" => DropReason::Loop,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotifyCause {
    Rejected,
    RouteBroken,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    NodeInit { x: f64, y: f64, energy: f64, sink: bool },
    FlowInit { flow: FlowId, rate: f64, packet_bits: u32, start: f64, stop: f64 },
    Tx { kind: PacketKind, to: Option<NodeId>, bits: u32, attempt: u32, joules: f64 },
    Rx { kind: PacketKind, from: NodeId, bits: u32, joules: f64 },
    Death,
    Originate { flow: FlowId, seq: u64 },
    Deliver { flow: FlowId, seq: u64, origin: f64, bits: u32, trace: Vec<NodeId> },
    Drop { reason: DropReason, kind: PacketKind, flow: Option<FlowId>, seq: Option<u64>, trace: Vec<NodeId> },
    RreqForward { flow: FlowId, rreq_id: u64, next: NodeId, link_bw: f64, path_bw: f64, trace: Vec<NodeId> },
    RrepOrigin { flow: FlowId, rreq_id: u64, path_bw: f64, dest_seq: u64, cached_bw: Option<f64>, trace: Vec<NodeId> },
    RouteInstall { flow: FlowId, rreq_id: u64, dest: NodeId, next_hop: NodeId, dest_seq: u64, path_bw: f64, replaced: bool },
    Reserve { flow: FlowId, next_hop: NodeId, required: f64, estimate: f64, reserved_before: f64 },
    Release { flow: FlowId, next_hop: NodeId, amount: f64 },
    Reject { flow: FlowId, next_hop: NodeId, required: f64, estimate: f64, reserved: f64 },
    Admit { flow: FlowId, rreq_id: u64, required: f64, path_bw: f64 },
    Notify { flow: FlowId, max_grantable: f64, cause: NotifyCause },
    FlowFailed { flow: FlowId },
    LoopWitness { flow: FlowId, kind: PacketKind },
    AodvRoute { dest: NodeId, next_hop: NodeId, hop_count: u32, dest_seq: u64 },
    Final { residual: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub time: f64,
    pub node: NodeId,
    pub record: Record,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub entries: Vec<LogEntry>,
}

impl EventLog {
    pub fn push(&mut self, time: f64, node: NodeId, record: Record) {
        self.entries.push(LogEntry { time, node, record });
    }

    pub fn iter(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.entries.len() * 48);
        for e in &self.entries {
            use fmt::Write;
            let _ = writeln!(out, "{e}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, LogParseError> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| l.parse::<LogEntry>().map_err(|e| e.at_line(i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { entries })
    }
}

struct Trace<'a>(&'a [NodeId]);

impl fmt::Display for Trace<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

struct Opt<T>(Option<T>);

impl<T: fmt::Display> fmt::Display for Opt<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("-"),
        }
    }
}

impl Record {
    pub fn kind_str(&self) -> &'static str {
        match self {
            Record::NodeInit { .. } => "init",
            Record::FlowInit { .. } => "flow",
            Record::Tx { .. } => "tx",
            Record::Rx { .. } => "rx",
            Record::Death => "death",
            Record::Originate { .. } => "originate",
            Record::Deliver { .. } => "deliver",
            Record::Drop { .. } => "drop",
            Record::RreqForward { .. } => "rreq_fwd",
            Record::RrepOrigin { .. } => "rrep_origin",
            Record::RouteInstall { .. } => "route",
            Record::Reserve { .. } => "reserve",
            Record::Release { .. } => "release",
            Record::Reject { .. } => "reject",
            Record::Admit { .. } => "admit",
            Record::Notify { .. } => "notify",
            Record::FlowFailed { .. } => "flow_failed",
            Record::LoopWitness { .. } => "loop",
            Record::AodvRoute { .. } => "aodv_route",
            Record::Final { .. } => "final",
        }
    }

    /// The hop trace carried by this record, if any.
    pub fn trace(&self) -> Option<&[NodeId]> {
        match self {
            Record::Deliver { trace, .. }
            | Record::Drop { trace, .. }
            | Record::RreqForward { trace, .. }
            | Record::RrepOrigin { trace, .. } => Some(trace),
            _ => None,
        }
    }

    /// Energy debited by a transmit or receive record.
    pub fn joules(&self) -> Option<f64> {
        match self {
            Record::Tx { joules, .. } | Record::Rx { joules, .. } => Some(*joules),
            _ => None,
        }
    }
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.time, self.node, self.record.kind_str())?;
        match &self.record {
            Record::NodeInit { x, y, energy, sink } => write!(f, ",{x},{y},{energy},{}", u8::from(*sink)),
            Record::FlowInit { flow, rate, packet_bits, start, stop } => {
                write!(f, ",{flow},{rate},{packet_bits},{start},{stop}")
            }
            Record::Tx { kind, to, bits, attempt, joules } => match to {
                Some(to) => write!(f, ",{},{to},{bits},{attempt},{joules}", kind.as_str()),
                None => write!(f, ",{},*,{bits},{attempt},{joules}", kind.as_str()),
            },
            Record::Rx { kind, from, bits, joules } => write!(f, ",{},{from},{bits},{joules}", kind.as_str()),
            Record::Death => Ok(()),
            Record::Originate { flow, seq } => write!(f, ",{flow},{seq}"),
            Record::Deliver { flow, seq, origin, bits, trace } => {
                write!(f, ",{flow},{seq},{origin},{bits},{}", Trace(trace))
            }
            Record::Drop { reason, kind, flow, seq, trace } => write!(
                f,
                ",{},{},{},{},{}",
                reason.as_str(),
                kind.as_str(),
                Opt(*flow),
                Opt(*seq),
                Trace(trace)
            ),
            Record::RreqForward { flow, rreq_id, next, link_bw, path_bw, trace } => {
                write!(f, ",{flow},{rreq_id},{next},{link_bw},{path_bw},{}", Trace(trace))
            }
            Record::RrepOrigin { flow, rreq_id, path_bw, dest_seq, cached_bw, trace } => write!(
                f,
                ",{flow},{rreq_id},{path_bw},{dest_seq},{},{}",
                Opt(*cached_bw),
                Trace(trace)
            ),
            Record::RouteInstall { flow, rreq_id, dest, next_hop, dest_seq, path_bw, replaced } => write!(
                f,
                ",{flow},{rreq_id},{dest},{next_hop},{dest_seq},{path_bw},{}",
                u8::from(*replaced)
            ),
            Record::Reserve { flow, next_hop, required, estimate, reserved_before } => {
                write!(f, ",{flow},{next_hop},{required},{estimate},{reserved_before}")
            }
            Record::Release { flow, next_hop, amount } => write!(f, ",{flow},{next_hop},{amount}"),
            Record::Reject { flow, next_hop, required, estimate, reserved } => {
                write!(f, ",{flow},{next_hop},{required},{estimate},{reserved}")
            }
            Record::Admit { flow, rreq_id, required, path_bw } => {
                write!(f, ",{flow},{rreq_id},{required},{path_bw}")
            }
            Record::Notify { flow, max_grantable, cause } => {
                let cause = match cause {
                    NotifyCause::Rejected => "rejected",
                    NotifyCause::RouteBroken => "broken",
                };
                write!(f, ",{flow},{max_grantable},{cause}")
            }
            Record::FlowFailed { flow } => write!(f, ",{flow}"),
            Record::LoopWitness { flow, kind } => write!(f, ",{flow},{}", kind.as_str()),
            Record::AodvRoute { dest, next_hop, hop_count, dest_seq } => {
                write!(f, ",{dest},{next_hop},{hop_count},{dest_seq}")
            }
            Record::Final { residual } => write!(f, ",{residual}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event log line {line}: {message}")]
pub struct LogParseError {
    pub line: usize,
    pub message: String,
}

impl LogParseError {
    fn new(message: impl Into<String>) -> Self {
        Self { line: 0, message: message.into() }
    }

    fn at_line(mut self, line: usize) -> Self {
        self.line = line;
        self
    }
}

struct Fields<'a> {
    parts: std::str::Split<'a, char>,
}

impl<'a> Fields<'a> {
    fn next_str(&mut self) -> Result<&'a str, LogParseError> {
        self.parts.next().ok_or_else(|| LogParseError::new("missing field"))
    }

    fn num<T: FromStr>(&mut self) -> Result<T, LogParseError> {
        let s = self.next_str()?;
        s.parse().map_err(|_| LogParseError::new(format!("bad number {s:?}")))
    }

    fn opt<T: FromStr>(&mut self) -> Result<Option<T>, LogParseError> {
        match self.next_str()? {
            "-" => Ok(None),
            s => s.parse().map(Some).map_err(|_| LogParseError::new(format!("bad value {s:?}"))),
        }
    }

    fn flag(&mut self) -> Result<bool, LogParseError> {
        match self.next_str()? {
            "0" => Ok(false),
            "1" => Ok(true),
            s => Err(LogParseError::new(format!("bad flag {s:?}"))),
        }
    }

    fn kind(&mut self) -> Result<PacketKind, LogParseError> {
        let s = self.next_str()?;
        PacketKind::parse(s).ok_or_else(|| LogParseError::new(format!("bad packet kind {s:?}")))
    }

    fn trace(&mut self) -> Result<Vec<NodeId>, LogParseError> {
        let s = self.next_str()?;
        if s == "-" {
            return Ok(Vec::new());
        }
        s.split('-')
            .map(|p| p.parse().map_err(|_| LogParseError::new(format!("bad trace {s:?}"))))
            .collect()
    }
}

impl FromStr for LogEntry {
    type Err = LogParseError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut f = Fields { parts: line.trim_end().split(',') };
        let time: f64 = f.num()?;
        let node: NodeId = f.num()?;
        let kind = f.next_str()?;
        let record = match kind {
            "init" => Record::NodeInit { x: f.num()?, y: f.num()?, energy: f.num()?, sink: f.flag()? },
            "flow" => Record::FlowInit {
                flow: f.num()?,
                rate: f.num()?,
                packet_bits: f.num()?,
                start: f.num()?,
                stop: f.num()?,
            },
            "tx" => {
                let kind = f.kind()?;
                let to = match f.next_str()? {
                    "*" => None,
                    s => Some(s.parse().map_err(|_| LogParseError::new("bad destination"))?),
                };
                Record::Tx { kind, to, bits: f.num()?, attempt: f.num()?, joules: f.num()? }
            }
            "rx" => Record::Rx { kind: f.kind()?, from: f.num()?, bits: f.num()?, joules: f.num()? },
            "death" => Record::Death,
            "originate" => Record::Originate { flow: f.num()?, seq: f.num()? },
            "deliver" => Record::Deliver {
                flow: f.num()?,
                seq: f.num()?,
                origin: f.num()?,
                bits: f.num()?,
                trace: f.trace()?,
            },
            "drop" => {
                let s = f.next_str()?;
                let reason = DropReason::parse(s).ok_or_else(|| LogParseError::new(format!("bad reason {s:?}")))?;
                Record::Drop { reason, kind: f.kind()?, flow: f.opt()?, seq: f.opt()?, trace: f.trace()? }
            }
            "rreq_fwd" => Record::RreqForward {
                flow: f.num()?,
                rreq_id: f.num()?,
                next: f.num()?,
                link_bw: f.num()?,
                path_bw: f.num()?,
                trace: f.trace()?,
            },
            "rrep_origin" => Record::RrepOrigin {
                flow: f.num()?,
                rreq_id: f.num()?,
                path_bw: f.num()?,
                dest_seq: f.num()?,
                cached_bw: f.opt()?,
                trace: f.trace()?,
            },
            "route" => Record::RouteInstall {
                flow: f.num()?,
                rreq_id: f.num()?,
                dest: f.num()?,
                next_hop: f.num()?,
                dest_seq: f.num()?,
                path_bw: f.num()?,
                replaced: f.flag()?,
            },
            "reserve" => Record::Reserve {
                flow: f.num()?,
                next_hop: f.num()?,
                required: f.num()?,
                estimate: f.num()?,
                reserved_before: f.num()?,
            },
            "release" => Record::Release { flow: f.num()?, next_hop: f.num()?, amount: f.num()? },
            "reject" => Record::Reject {
                flow: f.num()?,
                next_hop: f.num()?,
                required: f.num()?,
                estimate: f.num()?,
                reserved: f.num()?,
            },
            "admit" => Record::Admit { flow: f.num()?, rreq_id: f.num()?, required: f.num()?, path_bw: f.num()? },
            "notify" => {
                let flow = f.num()?;
                let max_grantable = f.num()?;
                let cause = match f.next_str()? {
                    "rejected" => NotifyCause::Rejected,
                    "broken" => NotifyCause::RouteBroken,
                    s => return Err(LogParseError::new(format!("bad cause {s:?}"))),
                };
                Record::Notify { flow, max_grantable, cause }
            }
            "flow_failed" => Record::FlowFailed { flow: f.num()? },
            "loop" => Record::LoopWitness { flow: f.num()?, kind: f.kind()? },
            "aodv_route" => Record::AodvRoute {
                dest: f.num()?,
                next_hop: f.num()?,
                hop_count: f.num()?,
                dest_seq: f.num()?,
            },
            "final" => Record::Final { residual: f.num()? },
            other => return Err(LogParseError::new(format!("unknown record kind {other:?}"))),
        };
        if f.parts.next().is_some() {
            return Err(LogParseError::new("trailing fields"));
        }
        Ok(LogEntry { time, node, record })
    }
}
