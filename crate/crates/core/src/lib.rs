//! Spectral and statistical-physics tools for quasi-cyclic LDPC codes.

// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embed;
pub mod error;
pub mod graph;
pub mod nishimori;
pub mod qc;
pub mod rbim;
pub mod sparse;
pub mod topo;
pub mod zeta;

pub use error::{Error, Result};
