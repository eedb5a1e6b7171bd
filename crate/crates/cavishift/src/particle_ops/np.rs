use super::{ParticleError, Result};
use crate::geometry::BoundaryQuadrature;
use crate::linalg;
use faer::Mat;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nyström matrix of `K*[phi](x) = (1/2pi) oint <x - y, nu_x> / |x - y|^2 phi(y) dsigma(y)`
/// on a trapezoid boundary rule: `(K* phi)_i = sum_j A_ij phi_j`.
#[derive(Clone, Debug)]
pub struct NPOperator {
    pub matrix: Mat<f64>,
    pub quad: BoundaryQuadrature,
    spectrum: OnceLock<Vec<f64>>,
}

pub fn assemble_np(bq: &BoundaryQuadrature) -> Result<NPOperator> {
    let n = bq.len();
    for i in 0..n {
        let j = (i + 1) % n;
        let d = (bq.nodes[i][0] - bq.nodes[j][0]).hypot(bq.nodes[i][1] - bq.nodes[j][1]);
        if !(d > 0.0) || !(bq.speed[i] > 0.0) {
            return Err(ParticleError::Assembly(format!("degenerate boundary at node {i}")));
        }
    }
    let matrix = Mat::from_fn(n, n, |i, j| {
        if i == j {
            bq.weights[i] * bq.curvature[i] / (4.0 * PI)
        } else {
            let d = [bq.nodes[i][0] - bq.nodes[j][0], bq.nodes[i][1] - bq.nodes[j][1]];
            let r2 = d[0] * d[0] + d[1] * d[1];
            bq.weights[j] * (d[0] * bq.normals[i][0] + d[1] * bq.normals[i][1]) / (2.0 * PI * r2)
        }
    });
    Ok(NPOperator {
        matrix,
        quad: bq.clone(),
        spectrum: OnceLock::new(),
    })
}

impl NPOperator {
    pub fn len(&self) -> usize {
        self.quad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quad.is_empty()
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * phi[j]).sum())
            .collect()
    }

    /// Real parts of the eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.get_or_init(|| {
            let mut v: Vec<f64> = linalg::eig_real(&self.matrix)
                .map(|(vals, _)| vals.iter().map(|z| z.re).collect())
                .unwrap_or_default();
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
    }

    /// `K[1]` at the nodes, i.e. the adjoint applied to the constant density
    /// (Gauss's identity gives `1/2`).
    pub fn adjoint_on_constant(&self) -> Vec<f64> {
        let n = self.len();
        let w = &self.quad.weights;
        (0..n)
            .map(|j| (0..n).map(|i| w[i] * self.matrix[(i, j)]).sum::<f64>() / w[j])
            .collect()
    }

    /// Relative defect of the Calderón identity `S K* = K S`, i.e. of the
    /// self-adjointness of `K*` in the single-layer inner product.
    pub fn calderon_defect(&self) -> f64 {
        let s = single_layer_matrix(&self.quad);
        let n = self.len();
        let w = &self.quad.weights;
        let sa = &s * &self.matrix;
        let ka = Mat::from_fn(n, n, |i, j| self.matrix[(j, i)] * w[j] / w[i]);
        let ks = &ka * &s;
        let mut big: f64 = 0.0;
        let mut diff: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                big = big.max(sa[(i, j)].abs());
                diff = diff.max((sa[(i, j)] - ks[(i, j)]).abs());
            }
        }
        diff / big
    }
}

/// Kress product-quadrature matrix of the Laplace single layer
/// `S[psi](x) = (1/2pi) oint log|x - y| psi(y) dsigma(y)` at the nodes.
pub fn single_layer_matrix(bq: &BoundaryQuadrature) -> Mat<f64> {
    let n = bq.len();
    let m = n / 2;
    let h = 2.0 * PI / n as f64;
    // R_l = weight of the log(4 sin^2) part for index offset l
    let r: Vec<f64> = (0..n)
        .map(|l| {
            let d = l as f64 * h;
            let mut s = 0.0;
            for k in 1..m {
                s += (k as f64 * d).cos() / k as f64;
            }
            -(2.0 * PI / m as f64) * s - PI / (m * m) as f64 * (m as f64 * d).cos()
        })
        .collect();
    Mat::from_fn(n, n, |i, j| {
        let l = (i + n - j) % n;
        let smooth = if i == j {
            (bq.speed[i] * bq.speed[i]).ln()
        } else {
            let dx = bq.nodes[i][0] - bq.nodes[j][0];
            let dy = bq.nodes[i][1] - bq.nodes[j][1];
            let s2 = (0.5 * (bq.params[i] - bq.params[j])).sin();
            ((dx * dx + dy * dy) / (4.0 * s2 * s2)).ln()
        };
        (r[l] + h * smooth) * bq.speed[j] / (4.0 * PI)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_boundary_quadrature, Shape2D};

    #[test]
    fn circle_is_rank_one_averaging() {
        let bq = build_boundary_quadrature(&Shape2D::disk(1.7), 64).unwrap();
        let np = assemble_np(&bq).unwrap();
        let total: f64 = bq.weights.iter().sum();
        for i in 0..64 {
            for j in 0..64 {
                assert!((np.matrix[(i, j)] - bq.weights[j] / (2.0 * total)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_layer_on_circle_harmonics() {
        let rad = 1.3f64;
        let bq = build_boundary_quadrature(&Shape2D::disk(rad), 64).unwrap();
        let s = single_layer_matrix(&bq);
        for k in [1usize, 3, 7] {
            let psi: Vec<f64> = bq.params.iter().map(|t| (k as f64 * t).cos()).collect();
            for i in 0..64 {
                let v: f64 = (0..64).map(|j| s[(i, j)] * psi[j]).sum();
                let exact = -rad * psi[i] / (2.0 * k as f64);
                assert!((v - exact).abs() < 1e-13, "k {k}: {v} vs {exact}");
            }
        }
        // constant density on a circle of radius R: R log R
        let v: f64 = (0..64).map(|j| s[(0, j)]).sum();
        assert!((v - rad * rad.ln()).abs() < 1e-13);
    }

    #[test]
    fn gauss_identity_and_calderon() {
        let shape = Shape2D::star(1.0, vec![0.0, 0.0, 0.15], vec![0.0, 0.05]);
        let bq = build_boundary_quadrature(&shape, 128).unwrap();
        let np = assemble_np(&bq).unwrap();
        for v in np.adjoint_on_constant() {
            assert!((v - 0.5).abs() < 1e-10);
        }
        assert!(np.calderon_defect() < 1e-10);
        let ev = np.eigenvalues();
        assert!((ev[0] - 0.5).abs() < 1e-10);
        assert!(ev[1..].iter().all(|l| l.abs() < 0.5));
    }
}
