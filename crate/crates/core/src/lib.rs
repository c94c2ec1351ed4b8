// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod estimates;
pub mod integrator;
pub mod linear;
pub mod normal_form;
pub mod runner;
pub mod smoothing;
pub mod spectral;

pub use error::{Error, Result};
