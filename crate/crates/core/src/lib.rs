//! Quantum Bayesian estimation for Gaussian channels.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod entropy;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod linalg;
pub mod measurement;
pub mod reports;

pub use error::{Error, Result};
