//! Library side of the `angio` command: configuration files, scenario
//! runs, parameter sweeps, the verification suite and rate fits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fit;
pub mod scenario;
pub mod sweep;
pub mod verify;
