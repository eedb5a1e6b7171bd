//! Thin wrappers over faer dense factorizations, working on plain slices.

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;

pub type CMat = Mat<Complex64>;

/// Partial-pivoting LU factorization of a square complex matrix.
pub struct Lu {
    inner: faer::linalg::solvers::PartialPivLu<Complex64>,
    n: usize,
}

impl Lu {
    pub fn new(a: &CMat) -> Self {
        Lu {
            inner: a.partial_piv_lu(),
            n: a.nrows(),
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.inner.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        self.inner.solve(b)
    }

    /// `ln det A`, with the imaginary part reduced to `(-pi, pi]`.
    pub fn log_det(&self) -> Complex64 {
        let u = self.inner.U();
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..self.n {
            s += u[(i, i)].ln();
        }
        if permutation_is_odd(self.inner.P().arrays().0) {
            s += Complex64::new(0.0, std::f64::consts::PI);
        }
        Complex64::new(s.re, Complex64::from_polar(1.0, s.im).arg())
    }

    /// Smallest `|U_ii|` relative to the largest, a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        let u = self.inner.U();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..self.n {
            let v = u[(i, i)].norm();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        lo / hi
    }
}

fn permutation_is_odd(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    let mut transpositions = 0usize;
    for i in 0..p.len() {
        if seen[i] {
            continue;
        }
        let mut j = i;
        let mut len = 0;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        transpositions += len - 1;
    }
    transpositions % 2 == 1
}

/// Dense eigendecomposition: eigenvalues and right eigenvectors as columns.
pub fn eig(a: &CMat) -> Option<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    let e = a.eigen().ok()?;
    let n = a.nrows();
    let s = e.S();
    let u = e.U();
    let vals = (0..n).map(|i| s[i]).collect();
    let vecs = (0..n).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Some((vals, vecs))
}

/// Dense eigendecomposition of a real matrix.
pub fn eig_real(a: &Mat<f64>) -> Option<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    let e = a.eigen().ok()?;
    let n = a.nrows();
    let s = e.S();
    let u = e.U();
    let vals = (0..n).map(|i| s[i]).collect();
    let vecs = (0..n).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Some((vals, vecs))
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: &CMat) -> Option<Vec<f64>> {
    a.singular_values().ok()
}

/// Thin SVD `(U, s, V)` with `A = U diag(s) V^H`.
pub fn svd(a: &CMat) -> Option<(CMat, Vec<f64>, CMat)> {
    let d = a.thin_svd().ok()?;
    let s = d.S();
    let k = a.nrows().min(a.ncols());
    let sv = (0..k).map(|i| s[i].re).collect();
    Some((d.U().to_owned(), sv, d.V().to_owned()))
}

/// Solves a small dense system; `None` if the matrix is singular to
/// working precision.
pub fn solve_small(a: &CMat, b: &[Complex64]) -> Option<Vec<Complex64>> {
    let lu = Lu::new(a);
    if lu.pivot_ratio() < 1e-15 {
        return None;
    }
    Some(lu.solve(b))
}

pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian inner product `sum conj(a) b`.
pub fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(a, b)| a.conj() * b).sum()
}

/// Non-conjugated product `sum a b`.
pub fn dotu(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_det_and_solve() {
        let a = Mat::from_fn(3, 3, |i, j| {
            Complex64::new([[0.0, 2.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 3.0]][i][j], 0.0)
        });
        let lu = Lu::new(&a);
        // det = -(2*3 - 1*1) = -5
        let ld = lu.log_det();
        assert!((ld.re - 5f64.ln()).abs() < 1e-14);
        assert!((ld.im.abs() - std::f64::consts::PI).abs() < 1e-14);
        let x = lu.solve(&[Complex64::new(1.0, 0.0); 3]);
        let b = crate::cavity_spectrum::DiscreteOperator {
            matrix: a.clone(),
            sqrt_w: vec![1.0; 3],
            omega: Complex64::new(1.0, 0.0),
            k: Complex64::new(1.0, 0.0),
            area_potential: vec![],
            area_potential_dk: vec![],
        }
        .apply(&x);
        for v in b {
            assert!((v - 1.0).norm() < 1e-14);
        }
    }
}
