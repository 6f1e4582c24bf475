// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abelian;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod oracle;
pub mod potential;
pub mod quadrature;
pub mod reconstruct;
pub mod surface;

pub use error::{Error, Result};
