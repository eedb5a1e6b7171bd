//! Particle-side operators for a small inclusion `D = z + delta B` with
//! permeability contrast: the Neumann–Poincaré operator of `dB`, the
//! polarization tensor, the spectrum of the magnetostatic operator on the
//! divergence-free/gradient complement `W`, Drude dispersion and the
//! coupling coefficients `(grad e, phi_j)`.

mod np;
mod polarization;
mod wspectrum;

pub use np::{assemble_np, single_layer_matrix, NPOperator};
pub use polarization::{polarization_tensor, PolarizationTensor};
pub use wspectrum::{boundary_couplings, coupling_coefficients, w_spectrum, Coupling, WCluster, WSpectrum};

use crate::cavity_spectrum::SpectrumError;
use crate::geometry::{GeometryError, Point, Shape2D};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParticleError {
    #[error("invalid particle configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("assembly failure: {0}")]
    Assembly(String),
    #[error("contrast parameter {lambda} is within {distance:.2e} of the NP eigenvalue {eigenvalue} (plasmonic resonance of B)")]
    NearSingular {
        lambda: Complex64,
        eigenvalue: f64,
        distance: f64,
    },
    #[error("Drude permeability has a pole at omega = 0")]
    DrudePole,
    #[error("coupling coefficients need an internal particle")]
    ExternalParticle,
}

pub type Result<T> = std::result::Result<T, ParticleError>;

/// Drude permeability `mu_c(omega) = mu_m (1 - omega_p^2 / omega^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrudeParams {
    pub omega_p: f64,
    pub mu_m: f64,
}

impl DrudeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_p > 0.0 && self.mu_m > 0.0) {
            return Err(ParticleError::InvalidConfig(
                "drude omega_p and mu_m must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `lambda(omega) = mu_c / (mu_m - mu_c) = omega^2 / omega_p^2 - 1`.
    pub fn lambda(&self, omega: Complex64) -> Complex64 {
        omega * omega / (self.omega_p * self.omega_p) - 1.0
    }

    pub fn lambda_deriv(&self, omega: Complex64) -> Complex64 {
        2.0 * omega / (self.omega_p * self.omega_p)
    }
}

pub fn drude_mu(omega: Complex64, p: &DrudeParams) -> Result<Complex64> {
    if omega.norm() == 0.0 {
        return Err(ParticleError::DrudePole);
    }
    Ok(p.mu_m * (1.0 - p.omega_p * p.omega_p / (omega * omega)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Permeability {
    Constant { mu_c: f64 },
    Drude(DrudeParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Internal,
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfig {
    /// Reference shape `B` of unit size, containing the origin.
    pub shape: Shape2D,
    pub delta: f64,
    pub center: Point,
    pub permeability: Permeability,
    pub position: Position,
}

impl ParticleConfig {
    pub fn new(shape: Shape2D, delta: f64, center: Point, permeability: Permeability, position: Position) -> Self {
        ParticleConfig {
            shape,
            delta,
            center,
            permeability,
            position,
        }
    }

    /// The physical inclusion `D = z + delta B`.
    pub fn domain(&self) -> Shape2D {
        self.shape.scaled_translated(self.delta, self.center)
    }

    /// Static contrast `mu_m / mu_c` (only for constant permeability).
    pub fn contrast(&self, mu_m: f64) -> Option<f64> {
        match self.permeability {
            Permeability::Constant { mu_c } => Some(mu_m / mu_c),
            Permeability::Drude(_) => None,
        }
    }

    /// Checks positivity and the separation between `D` and the cavity
    /// boundary required by the small-volume asymptotics.
    pub fn validate(&self, cavity: &Shape2D) -> Result<()> {
        self.shape.validate()?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(ParticleError::InvalidConfig("delta must be positive".into()));
        }
        if !self.shape.contains([0.0, 0.0]) {
            return Err(ParticleError::InvalidConfig(
                "reference shape must contain the origin".into(),
            ));
        }
        match self.permeability {
            Permeability::Constant { mu_c } if !(mu_c > 0.0) => {
                return Err(ParticleError::InvalidConfig("mu_c must be positive".into()))
            }
            Permeability::Drude(p) => p.validate()?,
            _ => {}
        }
        let size = self.delta * self.shape.diameter();
        let inside = cavity.contains(self.center);
        let (dist, _) = cavity.distance_to_boundary(self.center);
        match self.position {
            Position::Internal if !inside => Err(ParticleError::InvalidConfig(
                "internal particle center lies outside the cavity".into(),
            )),
            Position::External if inside => Err(ParticleError::InvalidConfig(
                "external particle center lies inside the cavity".into(),
            )),
            _ if dist <= size => Err(ParticleError::InvalidConfig(format!(
                "particle of size {size:.3e} is only {dist:.3e} from the cavity boundary"
            ))),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drude_values() {
        let p = DrudeParams { omega_p: 0.7, mu_m: 1.3 };
        assert!(drude_mu(Complex64::new(0.7, 0.0), &p).unwrap().norm() < 1e-15);
        let far = drude_mu(Complex64::new(1e8, 0.0), &p).unwrap();
        assert!((far - 1.3).norm() < 1e-12);
        let w = Complex64::new(0.7 * 2f64.sqrt(), 0.0);
        assert!((p.lambda(w) - 1.0).norm() < 1e-14);
        // lambda = mu_c / (mu_m - mu_c) from the permeability itself
        let w = Complex64::new(0.55, -0.04);
        let mu = drude_mu(w, &p).unwrap();
        assert!((mu / (p.mu_m - mu) - p.lambda(w)).norm() < 1e-13);
        assert!(drude_mu(Complex64::new(0.0, 0.0), &p).is_err());
    }

    #[test]
    fn separation_rules() {
        let cav = Shape2D::disk(1.0);
        let c = Permeability::Constant { mu_c: 0.5 };
        let ok = ParticleConfig::new(Shape2D::disk(1.0), 0.02, [0.1, 0.0], c, Position::Internal);
        assert!(ok.validate(&cav).is_ok());
        let close = ParticleConfig::new(Shape2D::disk(1.0), 0.02, [0.97, 0.0], c, Position::Internal);
        assert!(close.validate(&cav).is_err());
        let wrong = ParticleConfig::new(Shape2D::disk(1.0), 0.02, [1.5, 0.0], c, Position::Internal);
        assert!(wrong.validate(&cav).is_err());
        let ext = ParticleConfig::new(Shape2D::disk(1.0), 0.02, [1.5, 0.0], c, Position::External);
        assert!(ext.validate(&cav).is_ok());
    }
}
