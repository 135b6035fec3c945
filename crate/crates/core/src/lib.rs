//! Structured network pruning for parameter sharing in cooperative
//! multi-agent reinforcement learning.
//!
//! A single dense root network is shared by N agents. Each agent sees the
//! root through its own randomly drawn neuron mask, so agents share some
//! units, own others, and remain distinguishable even on identical
//! observations. The crate provides the network primitives, mask
//! generation, the shared-network wrapper, QMIX and multi-agent A2C
//! trainers, two desk-scale environments and an experiment harness.

pub mod envs;
mod error;
pub mod harness;
pub mod maa2c;
pub mod netcore;
pub mod pruning;
pub mod qmix;
pub mod rng;
pub mod sharednet;

pub use error::{Error, Result};
