//! Two-photon ghost interference and ghost imaging: wave-optics simulation,
//! a classical correlated-source counter-model, and the estimators that turn
//! coincidence data into EPR-type uncertainty checks.

// `!(x > 0.0)` is used deliberately so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biphoton;
pub mod classical;
pub mod counting;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod optics;

pub use error::{Error, Result};
