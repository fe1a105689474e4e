//! Multi-target, multi-drone encirclement from noisy range measurements.
//!
//! The crate is organised along the processing pipeline that runs once per
//! sampling instant:
//!
//! * [`sensing`]: noisy drone-to-target ranges and the neighbour/visibility sets,
//! * [`assignment`]: the two-drones-per-target consensus auction run in the initial phase,
//! * [`estimator`]: the range-difference Kalman filter that tracks each target,
//! * [`controller`]: attractive / interaction / repulsive pseudo-forces and the
//!   acceleration command,
//! * [`model`]: the discrete double-integrator dynamics shared by all of the above,
//! * [`analysis`]: observability / controllability Gramians, bound checks and audits,
//! * [`harness`]: scenario configuration, the deterministic stepper, logging and
//!   Monte-Carlo batches.
//!
//! The `examples/` directory of this crate has one runnable program per
//! capability; `cargo run --example golden_scenario` is a good place to start.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assignment;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod model;
pub mod noise;
pub mod sensing;

pub use error::{Error, Result};
pub use model::{DroneState, Obstacle, PresetShape, SystemMatrices, TargetState};
