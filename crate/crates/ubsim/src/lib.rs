//! Deterministic two-node simulator and analytical harness comparing a
//! Unified Bus style memory-semantic transport against RoCEv2 RC.

// Parameter validators write `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod congestion;
pub mod costmodel;
pub mod engine;
pub mod harness;
pub mod ordering;
pub mod rng;
pub mod stack;
pub mod state;
pub mod transport;
pub mod wire;
pub mod workloads;

pub use stack::{Family, Stack};
