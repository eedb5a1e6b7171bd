use super::operator::DiscreteOperator;
use super::{Result, SpectrumError};
use crate::linalg::{self, dotc, dotu, norm2, CMat, Lu};
use faer::Mat;
use num_complex::Complex64;

/// Matrices up to this size use a dense eigendecomposition; larger ones use
/// thick-restart Arnoldi.
const DENSE_LIMIT: usize = 1200;
const NEAR_DEFECTIVE: f64 = 1e-6;
const CLUSTER_TOL: f64 = 1e-8;

/// Eigenpair of the symmetrized operator. `vector` is in symmetric form and,
/// unless `near_defective`, satisfies `sum v_i^2 = 1`, i.e. the nodal samples
/// `e = v / sqrt(w)` satisfy `(e, e) = 1` under the weighted bilinear product.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub lambda: Complex64,
    pub vector: Vec<Complex64>,
    /// `|(v, v)|` for the 2-norm normalized vector.
    pub bilinear_norm: f64,
    pub near_defective: bool,
    /// `||S v - lambda v|| / ||v||`.
    pub residual: f64,
}

impl EigenPair {
    pub fn nodal(&self, op: &DiscreteOperator) -> Vec<Complex64> {
        op.to_nodal(&self.vector)
    }
}

/// The `count` eigenpairs of largest modulus, sorted by decreasing `|lambda|`.
pub fn eigenpairs(op: &DiscreteOperator, count: usize) -> Result<Vec<EigenPair>> {
    let n = op.n();
    if count == 0 || count > n {
        return Err(SpectrumError::InvalidRequest(format!(
            "requested {count} eigenpairs of a {n} x {n} operator"
        )));
    }
    let mut raw = if n <= DENSE_LIMIT {
        let (vals, vecs) = linalg::eig(&op.matrix)
            .ok_or_else(|| SpectrumError::Assembly("dense eigensolver failed".into()))?;
        let mut pairs: Vec<(Complex64, Vec<Complex64>)> = vals.into_iter().zip(vecs).collect();
        pairs.sort_by(|a, b| b.0.norm().total_cmp(&a.0.norm()));
        pairs.truncate(count);
        pairs
    } else {
        arnoldi_largest(op, count)?
    };
    // bilinear Gram-Schmidt inside clusters of (numerically) equal eigenvalues
    let scale = raw.first().map(|p| p.0.norm()).unwrap_or(1.0);
    let mut start = 0;
    while start < raw.len() {
        let mut end = start + 1;
        while end < raw.len() && (raw[end].0 - raw[start].0).norm() <= CLUSTER_TOL * scale {
            end += 1;
        }
        for i in start..end {
            for j in start..i {
                let vj = raw[j].1.clone();
                let njj = dotu(&vj, &vj);
                if njj.norm() > NEAR_DEFECTIVE {
                    let c = dotu(&vj, &raw[i].1) / njj;
                    for (a, b) in raw[i].1.iter_mut().zip(&vj) {
                        *a -= c * b;
                    }
                }
            }
        }
        start = end;
    }
    Ok(raw.into_iter().map(|(l, v)| finalize(op, l, v)).collect())
}

/// Normalizes, fixes the sign gauge and computes the residual.
fn finalize(op: &DiscreteOperator, lambda: Complex64, mut v: Vec<Complex64>) -> EigenPair {
    let nrm = norm2(&v);
    for x in v.iter_mut() {
        *x /= nrm;
    }
    let b = dotu(&v, &v);
    let near_defective = b.norm() < NEAR_DEFECTIVE;
    if !near_defective {
        let s = b.sqrt();
        for x in v.iter_mut() {
            *x /= s;
        }
    }
    let big = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if v[big].re < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    let sv = op.apply(&v);
    let r: Vec<Complex64> = sv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect();
    let residual = norm2(&r) / norm2(&v);
    EigenPair {
        lambda,
        vector: v,
        bilinear_norm: b.norm(),
        near_defective,
        residual,
    }
}

/// Deterministic smooth start vector.
pub(crate) fn start_vector(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            let t = i as f64 + 1.0;
            Complex64::new(1.0 + 0.5 * (0.7 * t).sin() + 0.25 * (1.3 * t).cos(), 0.0)
        })
        .collect()
}

fn orthogonalize(basis: &[Vec<Complex64>], w: &mut [Complex64], coef: &mut [Complex64]) {
    // classical Gram-Schmidt, applied twice
    for _ in 0..2 {
        for (j, b) in basis.iter().enumerate() {
            let c = dotc(b, w);
            coef[j] += c;
            for (x, y) in w.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
}

/// Thick-restart Arnoldi for the eigenvalues of largest modulus.
fn arnoldi_largest(op: &DiscreteOperator, count: usize) -> Result<Vec<(Complex64, Vec<Complex64>)>> {
    let n = op.n();
    let m = (2 * count + 30).max(40).min(n);
    let keep = (count + 8).min(m / 2).max(count);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
    let mut v0 = start_vector(n);
    let nv = norm2(&v0);
    v0.iter_mut().for_each(|x| *x /= nv);
    basis.push(v0);
    // h[(i, j)]: projected matrix, (m + 1) x m
    let mut h = Mat::<Complex64>::zeros(m + 1, m);
    let mut kept = 0;
    let tol = 1e-12;
    for _restart in 0..200 {
        let mut size = m;
        for j in kept..m {
            let mut w = op.apply(&basis[j]);
            let mut coef = vec![Complex64::new(0.0, 0.0); j + 1];
            orthogonalize(&basis[..=j], &mut w, &mut coef);
            for (i, c) in coef.iter().enumerate() {
                h[(i, j)] = *c;
            }
            let beta = norm2(&w);
            h[(j + 1, j)] = Complex64::new(beta, 0.0);
            if beta <= 1e-14 * h[(0, 0)].norm().max(1e-300) {
                // invariant subspace found
                size = j + 1;
                break;
            }
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(w);
        }
        let hm = Mat::from_fn(size, size, |i, j| h[(i, j)]);
        let (vals, vecs) =
            linalg::eig(&hm).ok_or_else(|| SpectrumError::Assembly("projected eigensolver failed".into()))?;
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| vals[b].norm().total_cmp(&vals[a].norm()));
        let beta = if size < m || size == n { 0.0 } else { h[(size, size - 1)].norm() };
        let top = vals[order[0]].norm();
        let converged = order.iter().take(count).all(|&i| {
            let y = &vecs[i];
            beta * y[size - 1].norm() / norm2(y) <= tol * top
        });
        if converged || size < m {
            return Ok(order
                .iter()
                .take(count)
                .map(|&i| {
                    let y = &vecs[i];
                    let mut x = vec![Complex64::new(0.0, 0.0); n];
                    for (b, c) in basis.iter().zip(y) {
                        for (xi, bi) in x.iter_mut().zip(b) {
                            *xi += c * bi;
                        }
                    }
                    (vals[i], x)
                })
                .collect());
        }
        // restart with the `keep` leading Ritz vectors, orthonormalized
        let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(keep);
        for &i in order.iter().take(keep) {
            let mut y = vecs[i].clone();
            let mut coef = vec![Complex64::new(0.0, 0.0); q.len()];
            orthogonalize(&q, &mut y, &mut coef);
            let ny = norm2(&y);
            if ny < 1e-10 {
                continue;
            }
            y.iter_mut().for_each(|x| *x /= ny);
            q.push(y);
        }
        let kk = q.len();
        let qm = CMat::from_fn(m, kk, |i, j| q[j][i]);
        let hq = &hm * &qm;
        let mut new_h = Mat::<Complex64>::zeros(m + 1, m);
        for a in 0..kk {
            for b in 0..kk {
                new_h[(a, b)] = dotc(&q[a], &(0..m).map(|i| hq[(i, b)]).collect::<Vec<_>>());
            }
        }
        for b in 0..kk {
            new_h[(kk, b)] = h[(m, m - 1)] * q[b][m - 1];
        }
        let last = basis[m].clone();
        let mut new_basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        for qj in &q {
            let mut x = vec![Complex64::new(0.0, 0.0); n];
            for (b, c) in basis.iter().take(m).zip(qj) {
                for (xi, bi) in x.iter_mut().zip(b) {
                    *xi += c * bi;
                }
            }
            new_basis.push(x);
        }
        new_basis.push(last);
        basis = new_basis;
        h = new_h;
        kept = kk;
    }
    Err(SpectrumError::NoConvergence {
        iterations: 200,
        residual: f64::NAN,
    })
}

/// Inverse iteration with a fixed shift: converges to the eigenpair whose
/// eigenvalue is closest to `shift`.
pub fn inverse_iteration(op: &DiscreteOperator, shift: Complex64, start: &[Complex64]) -> Result<EigenPair> {
    let n = op.n();
    let mut a = op.matrix.clone();
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let lu = Lu::new(&a);
    drop(a);
    let mut x = start.to_vec();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut last = f64::INFINITY;
    for it in 0..40 {
        let mut y = lu.solve(&x);
        let ny = norm2(&y);
        if !ny.is_finite() {
            return Err(SpectrumError::Assembly("singular shifted operator".into()));
        }
        y.iter_mut().for_each(|v| *v /= ny);
        x = y;
        let sx = op.apply(&x);
        let xx = dotu(&x, &x);
        let lambda = if xx.norm() > NEAR_DEFECTIVE {
            dotu(&x, &sx) / xx
        } else {
            dotc(&x, &sx)
        };
        let r: Vec<Complex64> = sx.iter().zip(&x).map(|(a, b)| a - lambda * b).collect();
        let res = norm2(&r);
        last = res;
        if res <= 1e-13 * lambda.norm().max(1e-300) || (it > 4 && res <= 1e-11 * lambda.norm()) {
            return Ok(finalize(op, lambda, x));
        }
    }
    Err(SpectrumError::NoConvergence {
        iterations: 40,
        residual: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity_spectrum::{assemble_k, CavityConfig};
    use crate::geometry::{build_volume_quadrature, Shape2D};

    #[test]
    fn dense_pairs_are_accurate_and_decay() {
        let c = CavityConfig::new(Shape2D::disk(1.0), 1.0, 1.0, 1.0, 10.0);
        let q = build_volume_quadrature(&c.shape, 16).unwrap();
        let op = assemble_k(&c, &q, Complex64::new(0.69, 0.0)).unwrap();
        let pairs = eigenpairs(&op, 12).unwrap();
        for w in pairs.windows(2) {
            assert!(w[0].lambda.norm() >= w[1].lambda.norm());
        }
        for p in &pairs {
            assert!(p.residual <= 1e-10, "{}", p.residual);
            assert!(!p.near_defective);
            assert!((dotu(&p.vector, &p.vector) - 1.0).norm() < 1e-10);
            // outgoing radiation makes every eigenvalue non-real at real omega
            assert!(p.lambda.im.abs() > 1e-8, "{}", p.lambda);
        }
        for i in 0..pairs.len() {
            for j in 0..i {
                let o = dotu(&pairs[i].vector, &pairs[j].vector).norm();
                assert!(o <= 1e-8, "({i},{j}) {o}");
            }
        }
    }

    #[test]
    fn arnoldi_matches_dense() {
        let c = CavityConfig::new(Shape2D::ellipse(1.0, 0.8), 1.0, 1.0, 1.0, 10.0);
        let q = build_volume_quadrature(&c.shape, 20).unwrap();
        let op = assemble_k(&c, &q, Complex64::new(0.6, -0.05)).unwrap();
        let dense = eigenpairs(&op, 6).unwrap();
        let kry = arnoldi_largest(&op, 6).unwrap();
        for (d, (l, _)) in dense.iter().zip(&kry) {
            assert!((d.lambda - l).norm() < 1e-11 * d.lambda.norm(), "{} {}", d.lambda, l);
        }
        let target = dense[2].lambda * Complex64::new(1.0 + 1e-3, 1e-3);
        let ii = inverse_iteration(&op, target, &start_vector(op.n())).unwrap();
        assert!((ii.lambda - dense[2].lambda).norm() < 1e-12);
        assert!(ii.residual < 1e-10);
    }
}
