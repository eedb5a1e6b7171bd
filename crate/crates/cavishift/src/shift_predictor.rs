//! Leading-order resonance shifts `omega_delta - omega_0` caused by a small
//! particle: internal and external non-dispersive particles, plasmonic
//! (Drude) particles, and the double-pole model near an exceptional point.

use crate::cavity_spectrum::{ExteriorMode, ModeEvaluator, ResonanceRecord, SpectrumError};
use crate::linalg;
use crate::particle_ops::{
    Coupling, DrudeParams, ParticleConfig, ParticleError, Permeability, PolarizationTensor, Position, WSpectrum,
};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Records with `|R(omega0) omega0|` below this are treated as exceptional.
const EXCEPTIONAL_LIMIT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ShiftError {
    #[error("resonance record is flagged exceptional (|R omega0| = {0:.3e})")]
    Exceptional(f64),
    #[error("particle position does not match the formula: {0}")]
    WrongPosition(&'static str),
    #[error("no root of the shift relation within {radius:.3e} of omega0")]
    NoRoot { radius: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Particle(#[from] ParticleError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

pub type Result<T> = std::result::Result<T, ShiftError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftCase {
    Internal,
    External,
    Plasmonic,
    Exceptional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftInputs {
    pub c: Complex64,
    pub delta: Option<f64>,
    /// `grad e(z)` (internal) or `grad g(z)` (external).
    pub gradient: Option<[Complex64; 2]>,
    pub tensor: Option<PolarizationTensor>,
    /// Cluster eigenvalue `lambda_j` and summed squared coupling.
    pub lambda_j: Option<f64>,
    pub coupling_sq: Option<Complex64>,
    pub lambda_at_omega0: Option<Complex64>,
}

impl ShiftInputs {
    fn new(c: Complex64) -> Self {
        ShiftInputs {
            c,
            delta: None,
            gradient: None,
            tensor: None,
            lambda_j: None,
            coupling_sq: None,
            lambda_at_omega0: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftPrediction {
    pub case: ShiftCase,
    pub omega0: Complex64,
    /// Offsets `omega_delta - omega_0`, sorted by modulus.
    pub roots: Vec<Complex64>,
    pub inputs: ShiftInputs,
    /// e.g. `degenerate-enhanced`, `clusters-close`.
    pub flags: Vec<String>,
}

impl ShiftPrediction {
    pub fn leading(&self) -> Complex64 {
        self.roots[0]
    }
}

/// `delta^2 c grad^T M grad` with `M` the tensor of the reference shape.
pub fn dipole_shift(c: Complex64, gradient: [Complex64; 2], tensor: &PolarizationTensor, delta: f64) -> Complex64 {
    c * tensor.scaled(delta).contract(gradient, gradient)
}

fn check_record(record: &ResonanceRecord) -> Result<()> {
    let nd = record.nondegeneracy();
    if !(nd >= EXCEPTIONAL_LIMIT) {
        return Err(ShiftError::Exceptional(nd));
    }
    Ok(())
}

/// Internal particle: `omega_delta - omega_0 = delta^2 c (grad e(z))^T M grad e(z)`.
pub fn internal_shift(
    record: &ResonanceRecord,
    particle: &ParticleConfig,
    tensor: &PolarizationTensor,
) -> Result<ShiftPrediction> {
    check_record(record)?;
    if particle.position != Position::Internal {
        return Err(ShiftError::WrongPosition("internal formula needs an internal particle"));
    }
    particle.validate(&record.cavity.shape)?;
    let (_, grad) = ModeEvaluator::new(record)?.value_and_gradient(particle.center)?;
    let mut inputs = ShiftInputs::new(record.c);
    inputs.delta = Some(particle.delta);
    inputs.gradient = Some(grad);
    inputs.tensor = Some(*tensor);
    Ok(ShiftPrediction {
        case: ShiftCase::Internal,
        omega0: record.omega0,
        roots: vec![dipole_shift(record.c, grad, tensor, particle.delta)],
        inputs,
        flags: Vec::new(),
    })
}

/// External particle: the same contraction with the outgoing continuation `g`.
pub fn external_shift(
    record: &ResonanceRecord,
    exterior: &ExteriorMode,
    particle: &ParticleConfig,
    tensor: &PolarizationTensor,
) -> Result<ShiftPrediction> {
    check_record(record)?;
    if particle.position != Position::External {
        return Err(ShiftError::WrongPosition("external formula needs an external particle"));
    }
    particle.validate(&record.cavity.shape)?;
    let (_, grad) = exterior.value_and_gradient(particle.center)?;
    let mut inputs = ShiftInputs::new(record.c);
    inputs.delta = Some(particle.delta);
    inputs.gradient = Some(grad);
    inputs.tensor = Some(*tensor);
    Ok(ShiftPrediction {
        case: ShiftCase::External,
        omega0: record.omega0,
        roots: vec![dipole_shift(record.c, grad, tensor, particle.delta)],
        inputs,
        flags: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlasmonicOptions {
    /// Cluster index in the W-spectrum; nearest to `Re lambda(omega0)` if unset.
    pub cluster: Option<usize>,
    /// `|lambda(omega0) - lambda_j|` below which the matched expansion is used.
    pub degenerate_tol: f64,
    /// Roots are kept within `neighborhood |omega0|`.
    pub neighborhood: f64,
    /// Another cluster closer than this to `Re lambda(omega0)` raises a flag.
    pub cluster_gap: f64,
}

impl Default for PlasmonicOptions {
    fn default() -> Self {
        PlasmonicOptions {
            cluster: None,
            degenerate_tol: 1e-8,
            neighborhood: 0.5,
            cluster_gap: 1e-3,
        }
    }
}

/// Roots `x = omega - omega0` of
/// `x (lambda(omega0 + x) - lambda_j) = c kappa^2` with the Drude
/// `lambda(omega) = omega^2 / omega_p^2 - 1`, i.e. the cubic
/// `x^3 + 2 omega0 x^2 + (omega0^2 - omega_p^2 (1 + lambda_j)) x - c kappa^2 omega_p^2 = 0`.
/// Sorted by modulus, restricted to `|x| <= radius`.
pub fn plasmonic_relation_roots(
    omega0: Complex64,
    c: Complex64,
    coupling_sq: Complex64,
    lambda_j: f64,
    drude: &DrudeParams,
    radius: f64,
) -> Vec<Complex64> {
    let wp2 = drude.omega_p * drude.omega_p;
    let coeffs = [
        Complex64::new(1.0, 0.0),
        2.0 * omega0,
        omega0 * omega0 - wp2 * (1.0 + lambda_j),
        -c * coupling_sq * wp2,
    ];
    let mut r: Vec<Complex64> = poly_roots(&coeffs).into_iter().filter(|x| x.norm() <= radius).collect();
    r.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    r
}

/// `x (lambda(omega0 + x) - lambda_j) - c kappa^2`.
pub fn plasmonic_residual(
    x: Complex64,
    omega0: Complex64,
    c: Complex64,
    coupling_sq: Complex64,
    lambda_j: f64,
    lambda: impl Fn(Complex64) -> Complex64,
) -> Complex64 {
    x * (lambda(omega0 + x) - lambda_j) - c * coupling_sq
}

/// Newton solve of the plasmonic relation for a general dispersion
/// `lambda(omega)` from each seed offset; converged roots, deduplicated.
pub fn plasmonic_relation_newton(
    omega0: Complex64,
    c: Complex64,
    coupling_sq: Complex64,
    lambda_j: f64,
    lambda: impl Fn(Complex64) -> Complex64,
    seeds: &[Complex64],
) -> Vec<Complex64> {
    let f = |x: Complex64| plasmonic_residual(x, omega0, c, coupling_sq, lambda_j, &lambda);
    let scale = omega0.norm().max(1e-300);
    let mut out: Vec<Complex64> = Vec::new();
    for &s in seeds {
        let mut x = s;
        let mut ok = false;
        for _ in 0..60 {
            let h = 1e-7 * scale;
            let d = (f(x + h) - f(x - h)) / (2.0 * h);
            if d.norm() == 0.0 {
                break;
            }
            let step = f(x) / d;
            x -= step;
            if step.norm() <= 1e-15 * scale {
                ok = true;
                break;
            }
        }
        if ok && out.iter().all(|r| (r - x).norm() > 1e-10 * scale) {
            out.push(x);
        }
    }
    out.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    out
}

/// Plasmonic particle with Drude permeability:
/// `(omega - omega0)(lambda(omega) - lambda_j) = c sum_{cluster} (grad e, phi_j)^2`.
/// When `lambda(omega0)` matches `lambda_j` the symmetric pair
/// `+- sqrt(c kappa^2 / lambda'(omega0))` is returned.
pub fn plasmonic_shift(
    record: &ResonanceRecord,
    particle: &ParticleConfig,
    spec: &WSpectrum,
    couplings: &[Coupling],
    opts: &PlasmonicOptions,
) -> Result<ShiftPrediction> {
    check_record(record)?;
    let drude = match particle.permeability {
        Permeability::Drude(p) => p,
        Permeability::Constant { .. } => {
            return Err(ShiftError::InvalidInput("plasmonic shift needs a Drude particle".into()))
        }
    };
    let w0 = record.omega0;
    let lam0 = drude.lambda(w0);
    let mut flags = Vec::new();
    let j = match opts.cluster {
        Some(j) if j < spec.clusters.len() => j,
        Some(j) => return Err(ShiftError::InvalidInput(format!("cluster {j} out of range"))),
        None => {
            let (j, gap) = spec
                .nearest_cluster(lam0.re)
                .ok_or_else(|| ShiftError::InvalidInput("empty W-spectrum".into()))?;
            if gap <= opts.cluster_gap {
                flags.push("clusters-close".to_string());
            }
            j
        }
    };
    let sums = spec.cluster_sums(couplings);
    let (lambda_j, kappa2) = sums[j];
    let c = record.c;
    let radius = opts.neighborhood * w0.norm();
    let roots = if (lam0 - lambda_j).norm() <= opts.degenerate_tol {
        flags.push("degenerate-enhanced".to_string());
        let s = (c * kappa2 / drude.lambda_deriv(w0)).sqrt();
        vec![s, -s]
    } else {
        plasmonic_relation_roots(w0, c, kappa2, lambda_j, &drude, radius)
    };
    if roots.is_empty() {
        return Err(ShiftError::NoRoot { radius });
    }
    let mut inputs = ShiftInputs::new(c);
    inputs.delta = Some(particle.delta);
    inputs.lambda_j = Some(lambda_j);
    inputs.coupling_sq = Some(kappa2);
    inputs.lambda_at_omega0 = Some(lam0);
    Ok(ShiftPrediction {
        case: ShiftCase::Plasmonic,
        omega0: w0,
        roots,
        inputs,
        flags,
    })
}

/// Double-pole model data, coefficients frozen at `omega0`.
/// `forms[a][b] = (L^{-1}[grad h_a], grad h_b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalData {
    pub omega0: Complex64,
    pub c1: Complex64,
    pub c2: Complex64,
    pub forms: [[Complex64; 2]; 2],
    /// Roots are kept within `neighborhood |omega0|`.
    pub neighborhood: f64,
}

impl ExceptionalData {
    /// Determinant of the 2x2 singularity condition at offset `x`.
    pub fn determinant(&self, x: Complex64) -> Complex64 {
        let f = &self.forms;
        let a11 = 1.0 - self.c1 * f[0][0] / x;
        let a12 = -self.c2 * f[1][0] / (x * x);
        let a21 = self.c1 * f[0][1] / x;
        let a22 = 1.0 - self.c2 * f[1][1] / (x * x);
        a11 * a22 - a12 * a21
    }

    /// Coefficients of `x^3 det`, highest degree first.
    pub fn cubic(&self) -> [Complex64; 4] {
        let f = &self.forms;
        [
            Complex64::new(1.0, 0.0),
            -self.c1 * f[0][0],
            -self.c2 * f[1][1],
            self.c1 * self.c2 * (f[0][0] * f[1][1] + f[1][0] * f[0][1]),
        ]
    }
}

/// Roots of `x^3 det(x)` near 0. Exact zero roots introduced by clearing
/// the denominators (e.g. `c2 = 0`) are removed: `x = 0` is a pole.
pub fn exceptional_shift(data: &ExceptionalData) -> Result<ShiftPrediction> {
    let mut coeffs: Vec<Complex64> = data.cubic().to_vec();
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() <= 1e-300 * scale.max(1.0)) {
        coeffs.pop();
    }
    let radius = data.neighborhood * data.omega0.norm();
    let mut roots: Vec<Complex64> = poly_roots(&coeffs).into_iter().filter(|x| x.norm() <= radius).collect();
    roots.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    if roots.is_empty() {
        return Err(ShiftError::NoRoot { radius });
    }
    let mut inputs = ShiftInputs::new(data.c1);
    inputs.coupling_sq = Some(data.c2);
    Ok(ShiftPrediction {
        case: ShiftCase::Exceptional,
        omega0: data.omega0,
        roots,
        inputs,
        flags: Vec::new(),
    })
}

/// Roots of `sum_k coeffs[k] x^{n-k}` (highest degree first) from the
/// companion matrix, polished by Newton on the original polynomial.
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let first = coeffs.iter().position(|c| c.norm() > 0.0);
    let coeffs = match first {
        Some(i) => &coeffs[i..],
        None => return Vec::new(),
    };
    let n = coeffs.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = coeffs[0];
    let comp = Mat::from_fn(n, n, |i, j| {
        if i == 0 {
            -coeffs[j + 1] / lead
        } else if i == j + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let roots = linalg::eig(&comp).map(|(v, _)| v).unwrap_or_default();
    let eval = |x: Complex64| {
        let mut p = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for c in coeffs {
            d = d * x + p;
            p = p * x + c;
        }
        (p, d)
    };
    roots
        .into_iter()
        .map(|mut x| {
            for _ in 0..8 {
                let (p, d) = eval(x);
                if d.norm() == 0.0 {
                    break;
                }
                let step = p / d;
                if !(step.re.is_finite() && step.im.is_finite()) {
                    break;
                }
                let before = p.norm();
                let y = x - step;
                if eval(y).0.norm() >= before {
                    break;
                }
                x = y;
            }
            x
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn polynomial_roots() {
        // (x - 1)(x + 2i)(x - 0.5 + 0.25i)
        let r = [c(1.0, 0.0), c(0.0, -2.0), c(0.5, -0.25)];
        let coeffs = [
            c(1.0, 0.0),
            -(r[0] + r[1] + r[2]),
            r[0] * r[1] + r[0] * r[2] + r[1] * r[2],
            -r[0] * r[1] * r[2],
        ];
        let got = poly_roots(&coeffs);
        for x in r {
            assert!(got.iter().any(|g| (g - x).norm() < 1e-14));
        }
    }

    #[test]
    fn exceptional_reduces_to_simple_pole() {
        let d = ExceptionalData {
            omega0: c(0.7, -0.05),
            c1: c(0.06, -0.004),
            c2: c(0.0, 0.0),
            forms: [[c(0.011, 0.002), c(0.3, 0.0)], [c(0.2, 0.1), c(0.05, 0.0)]],
            neighborhood: 0.5,
        };
        let p = exceptional_shift(&d).unwrap();
        assert_eq!(p.roots.len(), 1);
        assert!((p.roots[0] - d.c1 * d.forms[0][0]).norm() < 1e-12 * p.roots[0].norm());
    }

    #[test]
    fn exceptional_pair_without_simple_pole() {
        let d = ExceptionalData {
            omega0: c(0.7, -0.05),
            c1: c(0.0, 0.0),
            c2: c(2e-4, 1e-5),
            forms: [[c(0.0, 0.0); 2], [c(0.0, 0.0), c(0.03, 0.0)]],
            neighborhood: 0.5,
        };
        let p = exceptional_shift(&d).unwrap();
        let s = (d.c2 * d.forms[1][1]).sqrt();
        assert_eq!(p.roots.len(), 2);
        assert!(p.roots.iter().any(|r| (r - s).norm() < 1e-14));
        assert!(p.roots.iter().any(|r| (r + s).norm() < 1e-14));
    }

    #[test]
    fn plasmonic_roundtrip() {
        let drude = DrudeParams { omega_p: 0.9, mu_m: 1.0 };
        let (w0, cc, k2, lj) = (c(0.69, -0.066), c(0.064, -0.004), c(3e-4, 1e-5), 0.37);
        let roots = plasmonic_relation_roots(w0, cc, k2, lj, &drude, 0.5 * w0.norm());
        assert!(!roots.is_empty());
        for x in &roots {
            let r = plasmonic_residual(*x, w0, cc, k2, lj, |w| drude.lambda(w));
            assert!(r.norm() <= 1e-10 * (cc * k2).norm().max(1e-300) || r.norm() <= 1e-14);
        }
        // Newton on the general form agrees
        let nw = plasmonic_relation_newton(w0, cc, k2, lj, |w| drude.lambda(w), &roots);
        for (a, b) in roots.iter().zip(&nw) {
            assert!((a - b).norm() < 1e-12);
        }
        // zero coupling: the only root near omega0 is x = 0
        let z = plasmonic_relation_roots(w0, cc, c(0.0, 0.0), lj, &drude, 0.5 * w0.norm());
        assert!(z.iter().any(|x| x.norm() < 1e-15));
    }
}
