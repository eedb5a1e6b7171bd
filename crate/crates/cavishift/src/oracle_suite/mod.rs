//! Independent ground-truth generators used to validate the main pipeline.

pub mod highprec;
pub mod convergence;
pub mod coupled;
pub mod inclusions;
pub mod multilayer;
pub mod radial;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("argument {0} outside the supported strip")]
    OutOfStrip(Complex64),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
