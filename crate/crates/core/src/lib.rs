//! Global optimization by iterated Boltzmann amplification of tensor trains.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cross;
pub mod error;
pub mod ipa;
pub mod oracle;
pub mod potentials;
pub mod qtt;
mod linalg;
pub mod tt;

pub use error::{Error, Result};
pub use tt::{RoundingPolicy, TensorTrain};
