#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod dissipation;
pub mod error;
pub mod linear;
pub mod noise;
pub mod operator;
pub mod parallel;
pub mod quasilinear;
pub mod spectral;
pub mod stats;
pub mod stein;

pub use error::{Error, Result};
