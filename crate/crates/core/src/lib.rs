//! Single-snapshot direction-of-arrival detection from lasso and group-lasso
//! knot tests.

// `!(x > 0.0)` also rejects NaN, which is the point of those checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detector;
pub mod error;
pub mod group_lasso_path;
mod homotopy;
pub mod lasso_path;
pub mod montecarlo;
mod serde_complex;
pub mod signal_model;
pub mod stat_tests;
pub mod thresholds;
pub mod tolerance;

pub use error::{Error, Result};
