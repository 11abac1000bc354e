//! Convolutional mirror descent, dual-based PID pacing for online
//! allocation, and the numerical tooling used to check both.

// NaN must fail range checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod allocation;
pub mod cmd;
pub mod error;
pub mod harness;
pub mod instance;
pub mod mirror;
pub mod oco;
pub mod offline;
pub mod pid;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
