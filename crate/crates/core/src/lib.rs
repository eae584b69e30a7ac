//! Joint estimation of two sparse precision matrices from paired Gaussian
//! data with a weighted fused graphical lasso.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod io;
pub mod model;
pub mod permutation;
pub mod pipeline;
pub mod screening;
pub mod simgen;
pub mod stats;
pub mod triangle;
pub mod tuning;
pub mod weights;

pub use error::{Error, Result};
