//! System identification and simulation for small-scale car-like robots.
//!
//! - [`models`]: sub-model curves and kinematic/dynamic bicycle ODEs.
//! - [`sysid`]: log ingestion, dataset construction, Adam-based fitting and
//!   the staged identification pipeline.
//! - [`sim`]: fixed-step integration, actuation delays, scenarios and
//!   synthetic log generation.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod models;
pub mod sim;
pub mod sysid;
