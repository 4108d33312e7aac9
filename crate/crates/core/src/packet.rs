//! Packet pieces shared by both routing protocols.

use serde::{Deserialize, Serialize};

use crate::{FlowId, NodeId};

/// Coarse packet class, used for airtime/energy accounting and the event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketKind {
    Hello,
    Rreq,
    Rrep,
    Notify,
    Rerr,
    Data,
}

impl PacketKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Hello => "hello",
            PacketKind::Rreq => "rreq",
            PacketKind::Rrep => "rrep",
            PacketKind::Notify => "notify",
            PacketKind::Rerr => "rerr",
            PacketKind::Data => "data",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "hello" => PacketKind::Hello,
            "rreq" => PacketKind::Rreq,
            "rrep" => PacketKind::Rrep,
            "notify" => PacketKind::Notify,
            "rerr" => PacketKind::Rerr,
            "data" => PacketKind::Data,
            _ => return None,
        })
    }
}

/// Serialized sizes in bits, used for airtime and energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PacketSizes {
    pub hello_bits: u32,
    pub rreq_bits: u32,
    pub rrep_bits: u32,
    pub notify_bits: u32,
    pub rerr_bits: u32,
    pub data_header_bits: u32,
}

impl Default for PacketSizes {
    fn default() -> Self {
        Self {
            hello_bits: 256,
            rreq_bits: 320,
            rrep_bits: 320,
            notify_bits: 192,
            rerr_bits: 192,
            data_header_bits: 160,
        }
    }
}

/// An application payload travelling from a source to the sink.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub flow_id: FlowId,
    pub source: NodeId,
    pub payload_bits: u32,
    pub origin_timestamp: f64,
    pub sequence: u64,
    /// Nodes that have forwarded this packet, starting with the source.
    pub trace: Vec<NodeId>,
}

/// What the simulator needs to know about a protocol's packets.
pub trait WirePacket: Clone {
    fn kind(&self) -> PacketKind;
    fn size_bits(&self, sizes: &PacketSizes) -> u32;
    fn data(&self) -> Option<&DataPacket>;
}
