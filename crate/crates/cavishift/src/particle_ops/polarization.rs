use super::np::{assemble_np, NPOperator};
use super::{ParticleError, Result};
use crate::geometry::BoundaryQuadrature;
use crate::linalg::{CMat, Lu};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Distance below which `lambda(k)` counts as hitting the NP spectrum.
const NEAR_SINGULAR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarizationTensor {
    pub m: [[Complex64; 2]; 2],
    /// Contrast `k = mu_m / mu_c` used.
    pub contrast: Complex64,
}

impl PolarizationTensor {
    pub fn zero(contrast: Complex64) -> Self {
        PolarizationTensor {
            m: [[Complex64::new(0.0, 0.0); 2]; 2],
            contrast,
        }
    }

    /// Tensor of `delta B` in two dimensions.
    pub fn scaled(&self, delta: f64) -> Self {
        let s = delta * delta;
        PolarizationTensor {
            m: [[self.m[0][0] * s, self.m[0][1] * s], [self.m[1][0] * s, self.m[1][1] * s]],
            contrast: self.contrast,
        }
    }

    /// Non-conjugated contraction `a^T M b`.
    pub fn contract(&self, a: [Complex64; 2], b: [Complex64; 2]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for p in 0..2 {
            for q in 0..2 {
                s += a[p] * self.m[p][q] * b[q];
            }
        }
        s
    }

    pub fn asymmetry(&self) -> f64 {
        (self.m[0][1] - self.m[1][0]).norm()
    }

    /// Real part as a plain matrix (the static case has zero imaginary part).
    pub fn real(&self) -> [[f64; 2]; 2] {
        [[self.m[0][0].re, self.m[0][1].re], [self.m[1][0].re, self.m[1][1].re]]
    }

    /// Eigen-decomposition of the symmetrized real part: eigenvalues
    /// (descending) and unit eigenvectors.
    pub fn principal_axes(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let r = self.real();
        let (a, b, d) = (r[0][0], 0.5 * (r[0][1] + r[1][0]), r[1][1]);
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let theta = 0.5 * (2.0 * b).atan2(a - d);
        let (s, c) = theta.sin_cos();
        ([mean + rad, mean - rad], [[c, s], [-s, c]])
    }
}

/// `M_pq = oint xi_p ((lambda I - K*)^{-1} [nu_q]) dsigma` with
/// `lambda = (k + 1) / (2 (k - 1))`, `k = mu_m / mu_c`.
pub fn polarization_tensor(bq: &BoundaryQuadrature, contrast: Complex64) -> Result<PolarizationTensor> {
    assemble_np(bq)?.polarization(contrast)
}

impl NPOperator {
    pub fn polarization(&self, contrast: Complex64) -> Result<PolarizationTensor> {
        if contrast == Complex64::new(1.0, 0.0) {
            return Ok(PolarizationTensor::zero(contrast));
        }
        if !(contrast.re.is_finite() && contrast.im.is_finite()) {
            return Err(ParticleError::InvalidConfig(format!("contrast {contrast} is not finite")));
        }
        let lambda = (contrast + 1.0) / (2.0 * (contrast - 1.0));
        if let Some((ev, dist)) = self
            .eigenvalues()
            .iter()
            .map(|&e| (e, (lambda - e).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
        {
            if dist < NEAR_SINGULAR {
                return Err(ParticleError::NearSingular {
                    lambda,
                    eigenvalue: ev,
                    distance: dist,
                });
            }
        }
        let q = &self.quad;
        let n = q.len();
        let mut a: CMat = Mat::from_fn(n, n, |i, j| Complex64::new(-self.matrix[(i, j)], 0.0));
        for i in 0..n {
            a[(i, i)] += lambda;
        }
        let rhs: CMat = Mat::from_fn(n, 2, |i, c| Complex64::new(q.normals[i][c], 0.0));
        let x = Lu::new(&a).solve_mat(&rhs);
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (p, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (0..n).map(|i| q.weights[i] * q.nodes[i][p] * x[(i, c)]).sum();
            }
        }
        Ok(PolarizationTensor { m, contrast })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_boundary_quadrature, Shape2D};
    use std::f64::consts::PI;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn no_contrast_is_zero() {
        let bq = build_boundary_quadrature(&Shape2D::ellipse(1.0, 0.5), 64).unwrap();
        let m = polarization_tensor(&bq, c(1.0)).unwrap();
        assert_eq!(m.m, [[c(0.0); 2]; 2]);
    }

    #[test]
    fn ellipse_closed_form() {
        // M = (k - 1) |B| diag((a + b) / (a + k b), (a + b) / (b + k a))
        let (a, b, k) = (1.0, 0.45, 3.5);
        let bq = build_boundary_quadrature(&Shape2D::ellipse(a, b), 256).unwrap();
        let m = polarization_tensor(&bq, c(k)).unwrap().real();
        let area = PI * a * b;
        assert!((m[0][0] - (k - 1.0) * area * (a + b) / (a + k * b)).abs() < 1e-10);
        assert!((m[1][1] - (k - 1.0) * area * (a + b) / (b + k * a)).abs() < 1e-10);
        assert!(m[0][1].abs() < 1e-12);
    }

    #[test]
    fn plasmonic_contrast_is_rejected_on_circle() {
        // circle NP spectrum is {1/2, 0}; lambda(k) = 0 at k = -1
        let bq = build_boundary_quadrature(&Shape2D::disk(1.0), 64).unwrap();
        assert!(matches!(
            polarization_tensor(&bq, c(-1.0)),
            Err(ParticleError::NearSingular { .. })
        ));
        let m = polarization_tensor(&bq, Complex64::new(-1.2, 0.1)).unwrap();
        assert!(m.asymmetry() < 1e-12);
    }
}
