// Negated comparisons below deliberately treat NaN as invalid.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod data;
pub mod hyperopt;
pub mod error;
pub mod linalg;
pub mod optimizer;
pub mod oracle;
pub mod problem;
pub mod simlab;

pub use error::{Error, Result};
