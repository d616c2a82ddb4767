//! Near-field beam training over extremely large uniform linear arrays using
//! the ordinary far-field DFT codebook.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! threads or the command line lives in the `nfbeam` companion crate.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod beamforming;
pub mod beampattern;
pub mod channel;
pub mod codebooks;
pub mod error;
pub mod estimators;
pub mod numerics;
pub mod sim;

pub use beampattern::{AlphaBeta, BeamPattern, MainAngleSet};
pub use channel::{ArrayConfig, ChannelVector, PolarPoint};
pub use codebooks::{Codeword, CodewordLabel, DftCodebook, PolarCodebook};
pub use error::{Error, Result};
pub use estimators::{EstimatorConfig, LocationEstimate, SweepResult};
pub use numerics::{ComplexScalar, NoiseModel};
pub use sim::{Experiment, Scenario, ScenarioConfig, Scheme};
