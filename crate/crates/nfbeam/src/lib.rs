//! Standard-library companion of `nfbeam-core`: config files, the parallel
//! Monte-Carlo runner, CSV/SVG output and the `nfbeam` command line.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;

pub use error::CliError;
