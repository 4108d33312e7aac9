//! Bandwidth- and energy-aware geographic routing for multimedia sensor
//! networks, with the analytical 802.11 DCF model it relies on, an AODV
//! baseline and a deterministic discrete-event simulator to compare them.

pub mod aodv;
pub mod config;
pub mod dcf;
pub mod eventlog;
pub mod experiment;
pub mod geometry;
pub mod link;
pub mod metrics;
pub mod packet;
pub mod qgrp;
pub mod sim;

pub type NodeId = usize;
pub type FlowId = u32;
