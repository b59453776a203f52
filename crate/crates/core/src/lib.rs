//! Online debiasing for linear models fit to adaptively collected data.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod inference;
pub mod linalg;
pub mod rng;
pub mod simulators;
pub mod tuning;
pub mod weights;

pub use error::{Error, Result};
