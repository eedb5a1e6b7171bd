use super::{CavityConfig, Result, SpectrumError};
use crate::geometry::{BoundaryIntegrator, BoundarySample, Point, Shape2D, VolumeQuadrature};
use crate::special_functions::{area_potential_profile, gamma2d_radial};
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

const COLUMN_BLOCK: usize = 128;

/// Nyström matrix of `K` at a fixed frequency.
///
/// The matrix is stored in the symmetrized form `S = W^{1/2} A W^{-1/2}`,
/// where `A_ml = -w_l Gamma(x_m - x_l)` off the diagonal. `S` is complex
/// symmetric and has the same eigenvalues as `A`; an eigenvector `v` of `S`
/// corresponds to nodal samples `e = v / sqrt(w)`, and the weighted
/// bilinear product `sum w e e` becomes the plain product `sum v v`.
///
/// The weakly singular self-interaction is handled by subtracting the
/// value at the target node: `K[u](x_m) = -sum_{l != m} w_l Gamma_ml (u_l - u_m)
/// - u_m I(x_m)`, with `I(x) = int_Omega Gamma(x - y) dy` computed as a smooth
/// boundary integral.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub matrix: Mat<Complex64>,
    pub sqrt_w: Vec<f64>,
    pub omega: Complex64,
    pub k: Complex64,
    /// `I(x_m)` and `dI/dk (x_m)` at the nodes.
    pub area_potential: Vec<Complex64>,
    pub area_potential_dk: Vec<Complex64>,
}

impl DiscreteOperator {
    pub fn n(&self) -> usize {
        self.sqrt_w.len()
    }

    /// `S v`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        matvec(&self.matrix, v)
    }

    /// Entry of the unsymmetrized Nyström matrix acting on nodal values.
    pub fn nodal_entry(&self, m: usize, l: usize) -> Complex64 {
        self.matrix[(m, l)] * (self.sqrt_w[l] / self.sqrt_w[m])
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..j {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).norm());
            }
        }
        worst
    }

    /// Nodal samples `e = v / sqrt(w)` from a symmetric-form vector.
    pub fn to_nodal(&self, v: &[Complex64]) -> Vec<Complex64> {
        v.iter().zip(&self.sqrt_w).map(|(v, s)| v / *s).collect()
    }

    pub fn from_nodal(&self, e: &[Complex64]) -> Vec<Complex64> {
        e.iter().zip(&self.sqrt_w).map(|(e, s)| e * *s).collect()
    }
}

pub(crate) fn matvec(m: &Mat<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let n = m.nrows();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (j, vj) in v.iter().enumerate() {
        let col = m.col_as_slice(j);
        for (o, c) in out.iter_mut().zip(col) {
            *o += c * vj;
        }
    }
    out
}

fn check_inputs(cavity: &CavityConfig, quad: &VolumeQuadrature, omega: Complex64) -> Result<()> {
    cavity.validate()?;
    if omega.norm() == 0.0 || !omega.re.is_finite() || !omega.im.is_finite() {
        return Err(SpectrumError::InvalidRequest(format!("frequency {omega} must be finite and nonzero")));
    }
    if quad.shape != cavity.shape {
        return Err(SpectrumError::InvalidRequest(
            "volume quadrature was built for a different shape".into(),
        ));
    }
    Ok(())
}

/// `I(x)` and `dI/dk` for a list of points, by adaptive boundary quadrature.
pub(crate) fn area_potentials(shape: &Shape2D, points: &[Point], k: Complex64) -> Vec<(Complex64, Complex64)> {
    let bi = BoundaryIntegrator::new(shape);
    points
        .par_iter()
        .map(|x| {
            let v = bi.integrate(*x, &|b: &BoundarySample| {
                let d = [b.pos[0] - x[0], b.pos[1] - x[1]];
                let r2 = d[0] * d[0] + d[1] * d[1];
                let (g, dg) = area_potential_profile(k, r2.sqrt());
                let s = (d[0] * b.normal[0] + d[1] * b.normal[1]) / r2;
                [g * s, dg * s]
            });
            (v[0], v[1])
        })
        .collect()
}

/// Fills a symmetric `n x n` matrix column block by column block; `f(i, j)`
/// is evaluated for `i >= j` only.
fn symmetric_fill(n: usize, f: impl Fn(usize, usize) -> Complex64 + Sync) -> Mat<Complex64> {
    let mut m = Mat::<Complex64>::zeros(n, n);
    let mut start = 0;
    while start < n {
        let end = (start + COLUMN_BLOCK).min(n);
        let cols: Vec<Vec<Complex64>> = (start..end)
            .into_par_iter()
            .map(|j| (j..n).map(|i| f(i, j)).collect())
            .collect();
        for (off, col) in cols.into_iter().enumerate() {
            let j = start + off;
            for (t, v) in col.into_iter().enumerate() {
                let i = j + t;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        start = end;
    }
    m
}

fn check_distinct(nodes: &[Point]) -> Result<()> {
    let mut sorted: Vec<(f64, f64, usize)> = nodes.iter().enumerate().map(|(i, p)| (p[0], p[1], i)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for w in sorted.windows(2) {
        if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
            return Err(SpectrumError::Assembly(format!(
                "nodes {} and {} coincide",
                w[0].2, w[1].2
            )));
        }
    }
    Ok(())
}

/// Assembles the symmetrized Nyström matrix of `K` at frequency `omega`.
pub fn assemble_k(cavity: &CavityConfig, quad: &VolumeQuadrature, omega: Complex64) -> Result<DiscreteOperator> {
    check_inputs(cavity, quad, omega)?;
    check_distinct(&quad.nodes)?;
    let k = cavity.wavenumber(omega);
    let nodes = &quad.nodes;
    let w = &quad.weights;
    let n = nodes.len();
    let sqrt_w: Vec<f64> = w.iter().map(|w| w.sqrt()).collect();
    let gamma = symmetric_fill(n, |i, j| {
        if i == j {
            return Complex64::new(0.0, 0.0);
        }
        let r = (nodes[i][0] - nodes[j][0]).hypot(nodes[i][1] - nodes[j][1]);
        gamma2d_radial(k, r).0
    });
    let pots = area_potentials(&cavity.shape, nodes, k);
    let mut matrix = gamma;
    let diag: Vec<Complex64> = (0..n)
        .map(|m| {
            let col = matrix.col_as_slice(m);
            let s: Complex64 = col.iter().zip(w).map(|(g, w)| g * *w).sum();
            s - pots[m].0
        })
        .collect();
    for j in 0..n {
        let sj = sqrt_w[j];
        let col = matrix.col_as_slice_mut(j);
        for (i, v) in col.iter_mut().enumerate() {
            *v = -(*v) * (sqrt_w[i] * sj);
        }
        col[j] = diag[j];
    }
    if matrix.col_as_slice(0).iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(SpectrumError::Assembly("non-finite kernel values".into()));
    }
    Ok(DiscreteOperator {
        matrix,
        sqrt_w,
        omega,
        k,
        area_potential: pots.iter().map(|p| p.0).collect(),
        area_potential_dk: pots.iter().map(|p| p.1).collect(),
    })
}

/// `dS/domega` in the same symmetrized form as [`assemble_k`].
pub fn assemble_k_derivative(
    cavity: &CavityConfig,
    quad: &VolumeQuadrature,
    omega: Complex64,
) -> Result<Mat<Complex64>> {
    check_inputs(cavity, quad, omega)?;
    let k = cavity.wavenumber(omega);
    let dk = (cavity.eps_m * cavity.mu_m).sqrt();
    let nodes = &quad.nodes;
    let w = &quad.weights;
    let n = nodes.len();
    let sqrt_w: Vec<f64> = w.iter().map(|w| w.sqrt()).collect();
    let mut d = symmetric_fill(n, |i, j| {
        if i == j {
            return Complex64::new(0.0, 0.0);
        }
        let r = (nodes[i][0] - nodes[j][0]).hypot(nodes[i][1] - nodes[j][1]);
        gamma_dk(k, r)
    });
    let pots = area_potentials(&cavity.shape, nodes, k);
    let diag: Vec<Complex64> = (0..n)
        .map(|m| {
            let s: Complex64 = d.col_as_slice(m).iter().zip(w).map(|(g, w)| g * *w).sum();
            (s - pots[m].1) * dk
        })
        .collect();
    for j in 0..n {
        let sj = sqrt_w[j];
        let col = d.col_as_slice_mut(j);
        for (i, v) in col.iter_mut().enumerate() {
            *v = -(*v) * (sqrt_w[i] * sj * dk);
        }
        col[j] = diag[j];
    }
    Ok(d)
}

/// `dGamma/dk = (i/4) r H_1(k r)`.
#[inline]
fn gamma_dk(k: Complex64, r: f64) -> Complex64 {
    gamma2d_radial(k, r).1 * (r / k)
}

/// `v^T (dS/domega) v` without forming the derivative matrix.
///
/// With nodal values `e = v / sqrt(w)` the quadratic form collapses to
/// `k'(omega) [sum_{i<j} w_i w_j dGamma_ij (e_i - e_j)^2 - sum_i w_i e_i^2 dI_i]`,
/// so only the upper triangle of kernel derivatives is evaluated.
pub fn bilinear_derivative(
    cavity: &CavityConfig,
    quad: &VolumeQuadrature,
    op: &DiscreteOperator,
    v: &[Complex64],
) -> Complex64 {
    let k = op.k;
    let dk = (cavity.eps_m * cavity.mu_m).sqrt();
    let nodes = &quad.nodes;
    let w = &quad.weights;
    let e = op.to_nodal(v);
    let n = nodes.len();
    let rows: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = Complex64::new(0.0, 0.0);
            for j in (i + 1)..n {
                let r = (nodes[i][0] - nodes[j][0]).hypot(nodes[i][1] - nodes[j][1]);
                let de = e[i] - e[j];
                s += (w[j] * gamma_dk(k, r)) * (de * de);
            }
            w[i] * s - w[i] * e[i] * e[i] * op.area_potential_dk[i]
        })
        .collect();
    rows.iter().sum::<Complex64>() * dk
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_volume_quadrature, Shape2D};
    use crate::special_functions::{bessel_j, hankel1};

    fn disk_cavity() -> CavityConfig {
        CavityConfig::new(Shape2D::disk(1.0), 1.0, 1.0, 1.0, 10.0)
    }

    #[test]
    fn area_potential_matches_disk_closed_form() {
        // int_{|y|<1} Gamma(x - y) dy = 1/k^2 - (i pi / 2k) J_0(k|x|) H_1(k)
        let k = Complex64::new(0.7, -0.07);
        let s = Shape2D::disk(1.0);
        let pts = [[0.0, 0.0], [0.3, 0.4], [0.0, 0.95], [0.99999, 0.0], [0.6, -0.6]];
        let got = area_potentials(&s, &pts, k);
        for (p, (v, _)) in pts.iter().zip(&got) {
            let r = p[0].hypot(p[1]);
            let exact = 1.0 / (k * k)
                - Complex64::new(0.0, std::f64::consts::PI / 2.0) / k
                    * bessel_j(0, k * r).unwrap()
                    * hankel1(1, k).unwrap();
            assert!((v - exact).norm() < 1e-11, "{p:?} {v} {exact}");
        }
    }

    #[test]
    fn symmetric_and_finite() {
        let c = disk_cavity();
        let q = build_volume_quadrature(&c.shape, 12).unwrap();
        let op = assemble_k(&c, &q, Complex64::new(0.7, -0.05)).unwrap();
        assert!(op.max_asymmetry() <= 1e-12);
        assert!(assemble_k(&c, &q, Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn derivative_matches_differences() {
        let c = CavityConfig::new(Shape2D::ellipse(1.0, 0.7), 1.0, 1.3, 1.1, 5.0);
        let q = build_volume_quadrature(&c.shape, 10).unwrap();
        let w = Complex64::new(0.9, -0.1);
        let h = 1e-5;
        let a = assemble_k(&c, &q, w + h).unwrap();
        let b = assemble_k(&c, &q, w - h).unwrap();
        let d = assemble_k_derivative(&c, &q, w).unwrap();
        let n = q.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let fd = (a.matrix[(i, j)] - b.matrix[(i, j)]) / (2.0 * h);
                worst = worst.max((fd - d[(i, j)]).norm());
            }
        }
        assert!(worst < 1e-8, "{worst}");
        let op = assemble_k(&c, &q, w).unwrap();
        let v: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64 * 0.37).sin(), 0.1 * i as f64 / n as f64)).collect();
        let dv = matvec(&d, &v);
        let direct: Complex64 = v.iter().zip(&dv).map(|(a, b)| a * b).sum();
        let fast = bilinear_derivative(&c, &q, &op, &v);
        assert!((direct - fast).norm() < 1e-11 * direct.norm(), "{direct} {fast}");
    }
}
