//! Link-level simulation and closed-form analysis of RIS-assisted MIMO
//! channel customization.
//!
//! The composite channel is built exactly from per-RIS multipath
//! subchannels; RIS phases are designed to shape it for spatial
//! multiplexing (SM), beamforming (BF) and their multi-reconfiguration
//! variants (DS, DB); Monte Carlo estimates are paired with closed-form
//! approximations and bounds.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod config;
pub mod customization;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod report;
pub mod ris;
pub mod selftest;
pub mod transceiver;

pub use config::SystemConfig;
pub use customization::{PathSelection, Scheme};
pub use error::{Error, Result};
pub use montecarlo::{Execution, SweepAxis, SweepResult, TrialPlan};
