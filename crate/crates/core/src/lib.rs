//! Hybrid interference mitigation with analog prewhitening.
//!
//! An M x M phase-shifter network (PSN) sits between the antennas and the
//! ADCs. Its phases are optimized from a covariance estimate so the ADC
//! inputs are spatially white, which keeps strong interferers from eating
//! the ADC dynamic range. After quantization a CFAR detector synchronizes
//! the preamble and a digital MMSE beamformer removes what is left.
//!
//! Modules follow the processing chain:
//! [`scenario`] → [`adc`] → [`prewhiten`] / [`psn_opt`] → [`detect`] → [`harness`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adc;
pub mod detect;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod prewhiten;
pub mod psn_opt;
pub mod rng;
pub mod scenario;

pub use error::{HimapError, Result};
