//! Data-driven predictive control from a single input/output batch.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// The benchmark output matrix holds 1.4142, which is not meant as √2.
#![allow(clippy::approx_constant)]

pub mod control;
pub mod error;
pub mod harness;
pub mod horizon;
pub mod linalg;
pub mod par;
pub mod plant;
pub mod predictor;
pub mod qp;
pub mod rng;

pub use error::{DdpcError, Result};
