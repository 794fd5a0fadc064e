// `!(a > b)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cdf;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod manifolds;
pub mod problems;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
