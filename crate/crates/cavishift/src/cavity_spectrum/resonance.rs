use super::eigen::{eigenpairs, inverse_iteration, start_vector, EigenPair};
use super::operator::{assemble_k, bilinear_derivative, DiscreteOperator};
use super::{CavityConfig, Result, SpectrumError};
use crate::geometry::{build_volume_quadrature_with, VolumeQuadrature};
use crate::linalg::dotu;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const MIN_OVERLAP: f64 = 0.9;

/// How an eigenvalue branch is picked at the seed frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BranchSeed {
    /// `index`-th eigenvalue in order of decreasing modulus.
    Rank { index: usize },
    /// Eigenvalue closest to `1 / alpha(seed)`, i.e. the branch that would
    /// satisfy the resonance condition at the seed.
    Nearest,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceOptions {
    /// Accept when `|1 - alpha(omega) lambda(omega)| <= tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        ResonanceOptions { tol: 1e-9, max_iter: 30 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidueRoute {
    /// `c = -lambda_0 / R(omega_0)` from the resolvent expansion.
    Analytic,
    /// Contour quadrature of the Green's function.
    Contour,
}

/// A converged, non-exceptional resonance with its pole-pencil data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceRecord {
    pub omega0: Complex64,
    pub branch: BranchSeed,
    /// Eigenvalue of `K` on the branch at `omega0`.
    pub lambda0: Complex64,
    /// `d lambda / d omega` at `omega0`.
    pub dlambda: Complex64,
    /// `|1 - alpha(omega0) lambda0|`.
    pub char_residual: f64,
    /// `R(omega0) = f'(omega0)` of the characteristic function.
    pub r_deriv: Complex64,
    /// Residue coefficient of `G - Gamma` at `omega0`.
    pub c: Complex64,
    pub c_route: ResidueRoute,
    /// Mode samples at the volume nodes, `(e, e) = 1`.
    pub mode: Vec<Complex64>,
    /// `(e, e)` as computed (certificate).
    pub normalization: Complex64,
    pub cavity: CavityConfig,
    pub radial: usize,
    pub angular: usize,
    pub iterations: usize,
}

impl ResonanceRecord {
    pub fn quadrature(&self) -> Result<VolumeQuadrature> {
        Ok(build_volume_quadrature_with(&self.cavity.shape, self.radial, self.angular)?)
    }

    /// Ratio `|R(omega0) omega0|`, the non-exceptional certificate.
    pub fn nondegeneracy(&self) -> f64 {
        (self.r_deriv * self.omega0).norm()
    }
}

/// One sample of a tracked branch.
#[derive(Clone, Debug)]
pub struct BranchSample {
    pub omega: Complex64,
    pub lambda: Complex64,
    /// Symmetric-form eigenvector with `sum v^2 = 1`.
    pub vector: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct EigenBranch {
    pub seed: BranchSeed,
    pub samples: Vec<BranchSample>,
    /// `|(v_k, v_{k+1})|` between consecutive samples.
    pub overlaps: Vec<f64>,
}

fn select(op: &DiscreteOperator, cavity: &CavityConfig, seed: BranchSeed, omega: Complex64) -> Result<EigenPair> {
    match seed {
        BranchSeed::Rank { index } => {
            let mut pairs = eigenpairs(op, index + 1)?;
            Ok(pairs.swap_remove(index))
        }
        BranchSeed::Nearest => {
            let target = 1.0 / cavity.alpha(omega);
            inverse_iteration(op, target, &start_vector(op.n()))
        }
    }
}

/// Follows the eigenpair closest to `predicted`, starting from `previous`.
fn follow(op: &DiscreteOperator, predicted: Complex64, previous: &[Complex64]) -> Result<(EigenPair, f64)> {
    // a shift that coincides with the eigenvalue would make the factorization singular
    let shift = predicted * Complex64::new(1.0 + 1e-9, 1e-9);
    let pair = inverse_iteration(op, shift, previous)?;
    let overlap = dotu(previous, &pair.vector).norm();
    if overlap < MIN_OVERLAP {
        return Err(SpectrumError::BranchJump { overlap, omega: op.omega });
    }
    Ok((pair, overlap))
}

/// Continues an eigenvalue branch of `K` along a path of frequencies by
/// inverse iteration seeded with the previous eigenvector.
pub fn track_branch(
    cavity: &CavityConfig,
    quad: &VolumeQuadrature,
    seed: BranchSeed,
    path: &[Complex64],
) -> Result<EigenBranch> {
    let first = *path
        .first()
        .ok_or_else(|| SpectrumError::InvalidRequest("empty frequency path".into()))?;
    let op = assemble_k(cavity, quad, first)?;
    let pair = select(&op, cavity, seed, first)?;
    let mut samples = vec![BranchSample {
        omega: first,
        lambda: pair.lambda,
        vector: pair.vector,
    }];
    let mut overlaps = Vec::new();
    for &omega in &path[1..] {
        let n = samples.len();
        let last = &samples[n - 1];
        let predicted = if n >= 2 && samples[n - 2].omega != last.omega {
            let prev = &samples[n - 2];
            last.lambda + (last.lambda - prev.lambda) / (last.omega - prev.omega) * (omega - last.omega)
        } else {
            last.lambda
        };
        let op = assemble_k(cavity, quad, omega)?;
        let (pair, overlap) = follow(&op, predicted, &last.vector)?;
        overlaps.push(overlap);
        samples.push(BranchSample {
            omega,
            lambda: pair.lambda,
            vector: pair.vector,
        });
    }
    Ok(EigenBranch { seed, samples, overlaps })
}

/// Newton iteration on `f(omega) = 1 - omega^2 tau eps_c mu_m lambda(omega)`
/// along one eigenvalue branch, with `lambda'` from the bilinear
/// Hellmann-Feynman formula `(v, S' v) / (v, v)`.
pub fn find_resonance(
    cavity: &CavityConfig,
    quad: &VolumeQuadrature,
    seed: Complex64,
    branch: BranchSeed,
    opts: ResonanceOptions,
) -> Result<ResonanceRecord> {
    find_resonance_with(cavity, quad, seed, branch, opts, |w| assemble_k(cavity, quad, w))
}

/// [`find_resonance`] with a caller-supplied operator source, e.g. a cache
/// in front of [`assemble_k`]. `assemble(omega)` must return the operator
/// of `cavity` on `quad`.
pub fn find_resonance_with(
    cavity: &CavityConfig,
    quad: &VolumeQuadrature,
    seed: Complex64,
    branch: BranchSeed,
    opts: ResonanceOptions,
    assemble: impl Fn(Complex64) -> Result<DiscreteOperator>,
) -> Result<ResonanceRecord> {
    let mut omega = seed;
    let mut op = assemble(omega)?;
    let mut pair = select(&op, cavity, branch, omega)?;
    let mut last_f = f64::INFINITY;
    for it in 0..opts.max_iter {
        if it > 0 {
            op = assemble(omega)?;
            let predicted = pair.lambda;
            pair = follow(&op, predicted, &pair.vector)?.0;
        }
        if pair.near_defective {
            return Err(SpectrumError::Exceptional {
                norm: pair.bilinear_norm,
            });
        }
        let lambda = pair.lambda;
        let f = cavity.characteristic(omega, lambda);
        let dlambda = bilinear_derivative(cavity, quad, &op, &pair.vector);
        let fp = -cavity.alpha_deriv(omega) * lambda - cavity.alpha(omega) * dlambda;
        last_f = f.norm();
        if last_f <= opts.tol {
            if omega.im > 0.0 {
                return Err(SpectrumError::InvalidRequest(format!(
                    "converged to {omega} in the upper half-plane, which is not a resonance"
                )));
            }
            if (fp * omega).norm() < 1e-6 {
                return Err(SpectrumError::Exceptional {
                    norm: (fp * omega).norm(),
                });
            }
            let mode = op.to_nodal(&pair.vector);
            let normalization = super::bilinear(&quad.weights, &mode, &mode);
            return Ok(ResonanceRecord {
                omega0: omega,
                branch,
                lambda0: lambda,
                dlambda,
                char_residual: last_f,
                r_deriv: fp,
                c: -lambda / fp,
                c_route: ResidueRoute::Analytic,
                mode,
                normalization,
                cavity: cavity.clone(),
                radial: quad.radial,
                angular: quad.angular,
                iterations: it,
            });
        }
        let mut step = -f / fp;
        let cap = 0.25 * omega.norm();
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        omega += step;
        pair.lambda = lambda + dlambda * step;
    }
    Err(SpectrumError::NoConvergence {
        iterations: opts.max_iter,
        residual: last_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_volume_quadrature, Shape2D};

    #[test]
    fn constant_path_and_small_loop() {
        let c = CavityConfig::new(Shape2D::ellipse(1.0, 0.8), 1.0, 1.0, 1.0, 10.0);
        let q = build_volume_quadrature(&c.shape, 12).unwrap();
        let w0 = Complex64::new(0.7, -0.05);
        let b = track_branch(&c, &q, BranchSeed::Rank { index: 1 }, &[w0, w0, w0]).unwrap();
        assert!((b.samples[0].lambda - b.samples[2].lambda).norm() < 1e-12);
        let path: Vec<Complex64> = (0..=16)
            .map(|j| w0 + 0.02 * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / 16.0))
            .collect();
        let b = track_branch(&c, &q, BranchSeed::Nearest, &path).unwrap();
        let (a, z) = (b.samples[0].lambda, b.samples[16].lambda);
        assert!((a - z).norm() < 1e-9, "{a} {z}");
        assert!(b.overlaps.iter().all(|o| *o >= 0.9));
    }

    #[test]
    fn disk_resonance_is_reproducible() {
        let c = CavityConfig::new(Shape2D::disk(1.0), 1.0, 1.0, 1.0, 10.0);
        let q = build_volume_quadrature(&c.shape, 12).unwrap();
        let seed = Complex64::new(0.25, -0.12);
        let a = find_resonance(&c, &q, seed, BranchSeed::Nearest, Default::default()).unwrap();
        let b = find_resonance(&c, &q, seed, BranchSeed::Nearest, Default::default()).unwrap();
        assert_eq!(a.omega0, b.omega0);
        assert!(a.char_residual <= 1e-9);
        assert!(a.omega0.im < 0.0);
        assert!((a.normalization - 1.0).norm() < 1e-8);
        assert!((a.omega0 - Complex64::new(0.2506875395, -0.1217541103)).norm() < 5e-3);
    }
}
