//! Analytical per-frame energy, latency and accuracy model for edge-assisted
//! mobile AR object detection, a multi-client configuration and bandwidth
//! optimizer built on it, an adaptive offloading-frequency orchestrator, and a
//! scenario harness that compares both against baseline policies.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aio;
pub mod energy;
pub mod error;
pub mod harness;
pub mod leaf;
pub mod metrics;
pub mod poly;
pub mod profile;
pub mod report;
pub mod scenario;
pub mod trace;

pub use energy::{ClientSpec, Configuration, EnergyBreakdown, Gradient, LatencyBreakdown};
pub use error::{Error, Result};
pub use poly::{eval_poly, Polynomial};
pub use profile::DeviceProfile;
