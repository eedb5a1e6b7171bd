//! Nyström discretization of the cavity volume operator
//! `K[u](x) = -int_Omega u(y) Gamma_m(x - y) dy`, its eigenvalue branches,
//! resonance search, pole-pencil data and mode evaluation.
//!
//! Resonances are the frequencies where `1 - omega^2 tau eps_c mu_m lambda_j(omega) = 0`
//! for some eigenvalue branch `lambda_j` of `K`.

mod eigen;
mod modes;
mod operator;
mod residue;
mod resonance;

pub use eigen::{eigenpairs, inverse_iteration, EigenPair};
pub use modes::{exterior_mode, mode_value_and_gradient, ExteriorMode, ModeEvaluator};
pub use operator::{assemble_k, assemble_k_derivative, bilinear_derivative, DiscreteOperator};
pub use residue::{default_probes, extract_residue, ResidueExtraction};
pub use resonance::{
    find_resonance, find_resonance_with, track_branch, BranchSample, BranchSeed, EigenBranch, ResidueRoute, ResonanceOptions,
    ResonanceRecord,
};

use crate::geometry::{GeometryError, Shape2D};
use crate::special_functions::{Medium, SpecialFnError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("invalid cavity configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Special(#[from] SpecialFnError),
    #[error("assembly failure: {0}")]
    Assembly(String),
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("near-exceptional point: bilinear norm |(v,v)| = {norm:.3e}")]
    Exceptional { norm: f64 },
    #[error("branch continuation failed: overlap {overlap:.4} below 0.9 at omega = {omega}")]
    BranchJump { overlap: f64, omega: Complex64 },
    #[error("residue is not rank one: sigma2/sigma1 = {ratio:.3e}")]
    NotRankOne { ratio: f64 },
    #[error("argument principle counts {count} zeros inside the extraction circle, expected 1")]
    Winding { count: i64 },
    #[error("point {point:?} is too close to the cavity boundary ({distance:.3e} < {required:.3e})")]
    NearBoundary {
        point: [f64; 2],
        distance: f64,
        required: f64,
    },
    #[error("point {0:?} lies on the wrong side of the cavity boundary")]
    WrongSide([f64; 2]),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

pub type Result<T> = std::result::Result<T, SpectrumError>;

/// Cavity `Omega` with permittivity `tau eps_c + eps_m` inside and `eps_m`
/// outside; permeability `mu_m` everywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityConfig {
    pub shape: Shape2D,
    pub eps_c: f64,
    pub eps_m: f64,
    pub mu_m: f64,
    pub tau: f64,
}

impl CavityConfig {
    pub fn new(shape: Shape2D, eps_c: f64, eps_m: f64, mu_m: f64, tau: f64) -> Self {
        CavityConfig {
            shape,
            eps_c,
            eps_m,
            mu_m,
            tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_c", self.eps_c),
            ("eps_m", self.eps_m),
            ("mu_m", self.mu_m),
            ("tau", self.tau),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SpectrumError::InvalidConfig(format!("{name} = {v} must be positive")));
            }
        }
        self.shape.validate()?;
        Ok(())
    }

    pub fn medium(&self) -> Medium {
        Medium::new(self.eps_m, self.mu_m)
    }

    /// `alpha(omega) = omega^2 tau eps_c mu_m`.
    pub fn alpha(&self, omega: Complex64) -> Complex64 {
        omega * omega * (self.tau * self.eps_c * self.mu_m)
    }

    pub fn alpha_deriv(&self, omega: Complex64) -> Complex64 {
        2.0 * omega * (self.tau * self.eps_c * self.mu_m)
    }

    /// Background wavenumber `k_m = omega sqrt(eps_m mu_m)`.
    pub fn wavenumber(&self, omega: Complex64) -> Complex64 {
        self.medium().wavenumber(omega)
    }

    /// Characteristic function `f(omega) = 1 - alpha(omega) lambda`.
    pub fn characteristic(&self, omega: Complex64, lambda: Complex64) -> Complex64 {
        1.0 - self.alpha(omega) * lambda
    }
}

/// Non-conjugated product `sum_i w_i a_i b_i`.
pub fn bilinear(w: &[f64], a: &[Complex64], b: &[Complex64]) -> Complex64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| *w * a * b).sum()
}
