//! Trace-driven SSD simulator for comparing read-reclaim policies under
//! asymmetric per-wordline read disturbance.
//!
//! The pieces are wired together by [`engine::run_simulation`]: a
//! [`config::RunConfig`] selects a geometry, a hidden ground-truth
//! [`device::Device`], a policy-visible [`disturbance::Rpt`], a reclaim policy
//! and a counter backend (both looked up by name in [`config::Registries`]),
//! and a workload.

pub mod config;
pub mod counters;
pub mod device;
pub mod disturbance;
pub mod engine;
pub mod error;
pub mod ftl;
pub mod geometry;
pub mod policy;
pub mod workload;

pub use config::{Registries, RunConfig};
pub use engine::{run_simulation, RunOutput, SimReport};
pub use error::{ConfigError, SimError, TraceError};
