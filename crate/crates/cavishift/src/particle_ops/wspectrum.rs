use super::np::{assemble_np, single_layer_matrix};
use super::{ParticleConfig, ParticleError, Position, Result};
use crate::cavity_spectrum::{ModeEvaluator, ResonanceRecord};
use crate::geometry::{BoundaryQuadrature, Point};
use crate::linalg;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// NP eigenvalues closer than this are one cluster.
const CLUSTER_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WCluster {
    pub lambda: f64,
    pub indices: Vec<usize>,
}

/// Eigenpairs of `N_D^0` restricted to `W` on the reference shape `B`.
///
/// `phi_j = grad S_B[psi_j]` in `B`, with `psi_j` an eigen-density of `K*`
/// for `lambda_j - 1/2` and `||phi_j||_{L^2(B)} = 1`. Within a cluster the
/// `phi_j` are orthonormalized by their Gram matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WSpectrum {
    pub eigenvalues: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
    /// `||grad S[psi]||` of the unit-l2 eigenvector before normalization.
    pub norms: Vec<f64>,
    pub clusters: Vec<WCluster>,
    /// The excluded `1/2` eigenvalue of `K*` (equilibrium density).
    pub equilibrium: f64,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

pub fn w_spectrum(bq: &BoundaryQuadrature, count: usize) -> Result<WSpectrum> {
    let n = bq.len();
    if count == 0 || count > n / 2 {
        return Err(ParticleError::InvalidConfig(format!(
            "W-spectrum count {count} must lie in 1..={}",
            n / 2
        )));
    }
    let np = assemble_np(bq)?;
    let (vals, vecs) =
        linalg::eig_real(&np.matrix).ok_or_else(|| ParticleError::Assembly("NP eigensolver failed".into()))?;
    let eq = (0..n)
        .min_by(|&a, &b| (vals[a].re - 0.5).abs().total_cmp(&(vals[b].re - 0.5).abs()))
        .unwrap_or(0);
    let mut order: Vec<usize> = (0..n).filter(|&i| i != eq).collect();
    order.sort_by(|&a, &b| vals[b].re.total_cmp(&vals[a].re).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(g) if (vals[g[0]].re - vals[i].re).abs() <= CLUSTER_TOL => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let mean = |g: &[usize]| g.iter().map(|&i| vals[i].re).sum::<f64>() / g.len() as f64;
    groups.sort_by(|a, b| mean(b).abs().total_cmp(&mean(a).abs()).then(mean(b).total_cmp(&mean(a))));

    let s = single_layer_matrix(bq);
    let w = &bq.weights;
    let mut out = WSpectrum {
        eigenvalues: Vec::new(),
        densities: Vec::new(),
        norms: Vec::new(),
        clusters: Vec::new(),
        equilibrium: vals[eq].re,
        nodes: bq.nodes.clone(),
        weights: w.clone(),
    };
    for g in groups {
        if out.eigenvalues.len() >= count {
            break;
        }
        let mu = mean(&g);
        // real basis of the cluster span, orthonormal in weighted l2
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(g.len());
        for &i in &g {
            for part in [0, 1] {
                if basis.len() == g.len() {
                    break;
                }
                let mut v: Vec<f64> = vecs[i].iter().map(|z| if part == 0 { z.re } else { z.im }).collect();
                let before = wnorm(w, &v);
                for b in &basis {
                    let d = wdot(w, b, &v);
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
                }
                let after = wnorm(w, &v);
                if after > 1e-6 * before.max(1e-300) {
                    v.iter_mut().for_each(|x| *x /= after);
                    basis.push(v);
                }
            }
        }
        if basis.len() != g.len() {
            return Err(ParticleError::Assembly(format!(
                "cluster at {mu:.6} spans {} real directions, expected {}",
                basis.len(),
                g.len()
            )));
        }
        // Gram matrix of grad S[psi] in L^2(B): (mu - 1/2) oint S[psi_a] psi_b
        let sb: Vec<Vec<f64>> = basis
            .iter()
            .map(|b| (0..n).map(|i| (0..n).map(|j| s[(i, j)] * b[j]).sum()).collect())
            .collect();
        let m = basis.len();
        let mut gram = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in 0..m {
                let x = (mu - 0.5) * 0.5 * (wdot(w, &sb[a], &basis[b]) + wdot(w, &sb[b], &basis[a]));
                gram[a][b] = x;
            }
        }
        let l = cholesky(&gram).ok_or_else(|| {
            ParticleError::Assembly(format!("W Gram matrix at {mu:.6} is not positive definite"))
        })?;
        // psi~ = psi L^{-T}: forward substitution row by row
        let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(m);
        for a in 0..m {
            let mut v = basis[a].clone();
            for (b, ob) in ortho.iter().enumerate() {
                v.iter_mut().zip(ob).for_each(|(x, y)| *x -= l[a][b] * y);
            }
            v.iter_mut().for_each(|x| *x /= l[a][a]);
            ortho.push(v);
        }
        let start = out.eigenvalues.len();
        for (a, mut v) in ortho.into_iter().enumerate() {
            let imax = (0..n).max_by(|&p, &q| v[p].abs().total_cmp(&v[q].abs())).unwrap_or(0);
            if v[imax] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            out.eigenvalues.push(0.5 + mu);
            out.norms.push(l[a][a]);
            out.densities.push(v);
        }
        out.clusters.push(WCluster {
            lambda: 0.5 + mu,
            indices: (start..out.eigenvalues.len()).collect(),
        });
    }
    Ok(out)
}

fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

fn wnorm(w: &[f64], a: &[f64]) -> f64 {
    wdot(w, a, a).sqrt()
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// `(grad e, phi_j)_{L^2(D)}` for one W-eigenfunction, with `phi_j`
/// unit-normalized on `D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub index: usize,
    pub lambda: f64,
    pub value: Complex64,
}

impl WSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Sum of squared couplings over each cluster, `(lambda, sum value^2)`;
    /// invariant under the choice of basis inside a cluster.
    pub fn cluster_sums(&self, couplings: &[Coupling]) -> Vec<(f64, Complex64)> {
        self.clusters
            .iter()
            .map(|c| {
                let s = couplings
                    .iter()
                    .filter(|k| c.indices.contains(&k.index))
                    .map(|k| k.value * k.value)
                    .sum();
                (c.lambda, s)
            })
            .collect()
    }

    /// Index of the cluster nearest to `lambda`, and the gap to the next one.
    pub fn nearest_cluster(&self, lambda: f64) -> Option<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .clusters
            .iter()
            .enumerate()
            .map(|(i, c)| (i, (c.lambda - lambda).abs()))
            .collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1));
        let first = *d.first()?;
        Some((first.0, d.get(1).map_or(f64::INFINITY, |s| s.1)))
    }
}

/// Boundary reduction `int_D grad e . phi_j = oint_{dD} e (phi_j . nu) dsigma`
/// for `D = center + delta B`, where `phi_j . nu = (lambda_j - 1) psi_j` from
/// inside. The result does not depend on `delta` except through `e`.
pub fn boundary_couplings<E>(spec: &WSpectrum, delta: f64, center: Point, e: E) -> Result<Vec<Coupling>>
where
    E: Fn(Point) -> Result<Complex64>,
{
    let vals: Vec<Complex64> = spec
        .nodes
        .iter()
        .map(|x| e([center[0] + delta * x[0], center[1] + delta * x[1]]))
        .collect::<Result<_>>()?;
    Ok((0..spec.len())
        .map(|j| {
            let s: Complex64 = spec.densities[j]
                .iter()
                .zip(&spec.weights)
                .zip(&vals)
                .map(|((p, w), v)| v * (p * w))
                .sum();
            Coupling {
                index: j,
                lambda: spec.eigenvalues[j],
                value: s * (spec.eigenvalues[j] - 1.0),
            }
        })
        .collect())
}

/// Couplings of the resonant mode of `record` with the W-eigenfunctions of
/// an internal particle.
pub fn coupling_coefficients(
    record: &ResonanceRecord,
    particle: &ParticleConfig,
    spec: &WSpectrum,
) -> Result<Vec<Coupling>> {
    if particle.position != Position::Internal {
        return Err(ParticleError::ExternalParticle);
    }
    particle.validate(&record.cavity.shape)?;
    let ev = ModeEvaluator::new(record)?;
    boundary_couplings(spec, particle.delta, particle.center, |x| Ok(ev.value_and_gradient(x)?.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_boundary_quadrature, build_volume_quadrature, Shape2D};

    #[test]
    fn disk_spectrum_is_one_half() {
        let bq = build_boundary_quadrature(&Shape2D::disk(1.0), 64).unwrap();
        let sp = w_spectrum(&bq, 4).unwrap();
        // the whole degenerate cluster is returned
        assert_eq!(sp.len(), 63);
        assert_eq!(sp.clusters.len(), 1);
        assert!(sp.eigenvalues.iter().all(|l| (l - 0.5).abs() < 1e-8));
        assert!((sp.equilibrium - 0.5).abs() < 1e-12);
    }

    /// Volume cross-check on the unit disk. A band-limited density is
    /// expanded in the (degenerate) cluster basis; its field
    /// `grad S[psi]` is known in closed form (`S[e^{ik t}] = -z^k / (2k)`
    /// inside) and is integrated against `grad e` on a volume rule.
    #[test]
    fn boundary_reduction_matches_volume_quadrature() {
        let n = 64;
        let bq = build_boundary_quadrature(&Shape2D::disk(1.0), n).unwrap();
        let sp = w_spectrum(&bq, 1).unwrap();
        let s = single_layer_matrix(&bq);
        let (delta, z) = (0.1, [0.3, -0.2]);
        let kx = Complex64::new(0.8, 0.1);
        let ky = Complex64::new(-0.3, 0.4);
        let e = |x: Point| (Complex64::i() * (kx * x[0] + ky * x[1])).exp();
        let grad_e = |x: Point| [Complex64::i() * kx * e(x), Complex64::i() * ky * e(x)];
        let vq = build_volume_quadrature(&Shape2D::disk(1.0), 48).unwrap();
        let bc = boundary_couplings(&sp, delta, z, |x| Ok(e(x))).unwrap();
        // psi = cos 2t + 0.3 sin 5t - 0.7 cos 9t  =  Re sum c_k e^{ikt}
        let coef = [(2usize, Complex64::new(1.0, 0.0)), (5, Complex64::new(0.0, -0.3)), (9, Complex64::new(-0.7, 0.0))];
        let psi: Vec<f64> = bq
            .params
            .iter()
            .map(|&t| coef.iter().map(|(k, c)| (c * Complex64::from_polar(1.0, *k as f64 * t)).re).sum())
            .collect();
        let spsi: Vec<f64> = (0..n).map(|i| (0..n).map(|j| s[(i, j)] * psi[j]).sum()).collect();
        // Gram coordinates a_j = (grad S psi, grad S psi_j) = -(1/2) oint S[psi] psi_j
        let a: Vec<f64> = sp.densities.iter().map(|d| -0.5 * wdot(&sp.weights, &spsi, d)).collect();
        let a_norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let reduced: Complex64 = a.iter().zip(&bc).map(|(x, c)| c.value * *x).sum::<Complex64>() / a_norm;
        // grad Re f(z) = (Re f', -Im f') with f = -sum c_k z^k / (2k)
        let phi = |x: Point| {
            let zz = Complex64::new(x[0], x[1]);
            let d: Complex64 = coef.iter().map(|(k, c)| -c * zz.powu(*k as u32 - 1) * 0.5).sum();
            [d.re, -d.im]
        };
        let norm: f64 = vq
            .nodes
            .iter()
            .zip(&vq.weights)
            .map(|(x, w)| {
                let f = phi(*x);
                w * (f[0] * f[0] + f[1] * f[1])
            })
            .sum::<f64>()
            .sqrt();
        assert!((norm - a_norm).abs() < 1e-10 * norm, "{norm} {a_norm}");
        // int_D grad e . phi_D with phi_D(X) = phi((X - z)/delta) / delta
        let vol: Complex64 = vq
            .nodes
            .iter()
            .zip(&vq.weights)
            .map(|(x, w)| {
                let xx = [z[0] + delta * x[0], z[1] + delta * x[1]];
                let g = grad_e(xx);
                let f = phi(*x);
                (g[0] * f[0] + g[1] * f[1]) * (w * delta)
            })
            .sum::<Complex64>()
            / norm;
        assert!((vol - reduced).norm() < 1e-6 * vol.norm(), "{vol} {reduced}");
        // a constant e does not couple
        let flat = boundary_couplings(&sp, delta, z, |_| Ok(Complex64::new(2.0, 1.0))).unwrap();
        assert!(flat.iter().all(|c| c.value.norm() < 1e-12));
    }

    #[test]
    fn couplings_scale_like_delta() {
        let bq = build_boundary_quadrature(&Shape2D::ellipse(1.0, 0.6), 96).unwrap();
        let sp = w_spectrum(&bq, 2).unwrap();
        let e = |x: Point| (Complex64::new(0.0, 1.0) * (0.9 * x[0] + 0.4 * x[1])).exp();
        let deltas = [0.08, 0.04, 0.02, 0.01];
        let logs: Vec<(f64, f64)> = deltas
            .iter()
            .map(|&d| {
                let c = boundary_couplings(&sp, d, [0.2, 0.1], |x| Ok(e(x))).unwrap();
                let s: f64 = c.iter().map(|k| k.value.norm_sqr()).sum::<f64>().sqrt();
                (d.ln(), s.ln())
            })
            .collect();
        let m = logs.len() as f64;
        let (sx, sy) = logs.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / m, sy / m);
        let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - 1.0).abs() < 0.2, "slope {slope}");
    }
}
