use super::operator::{assemble_k, matvec};
use super::resonance::ResonanceRecord;
use super::{Result, SpectrumError};
use crate::geometry::VolumeQuadrature;
use crate::linalg::{self, CMat, Lu};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Rank-one tolerance for the probe residue matrix.
const RANK_ONE_LIMIT: f64 = 1e-2;

/// Result of contour extraction of the pole term `c e(x) e(y) / (omega - omega0)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidueExtraction {
    pub c_contour: Complex64,
    pub c_analytic: Complex64,
    /// `|c_contour - c_analytic| / |c_analytic|`.
    pub agreement: f64,
    /// `sigma_2 / sigma_1` of the probe residue matrix.
    pub sigma_ratio: f64,
    /// `max |Res - Res^T| / max |Res|` on the probe block.
    pub asymmetry: f64,
    /// Zero count of `det(I - alpha S)` inside the circle.
    pub winding: i64,
    /// Largest `||remainder|| / ||pole term||` over the contour points.
    pub remainder_ratio: f64,
    pub probes: Vec<usize>,
    pub radius: f64,
    pub points: usize,
    /// Residue matrix on probe pairs.
    pub probe_residue: Vec<Vec<Complex64>>,
    /// Mode at all nodes, from the contour residue, `(e, e) = 1`.
    pub mode: Vec<Complex64>,
}

/// Eight well-separated interior nodes at varying radii and angles.
pub fn default_probes(quad: &VolumeQuadrature, count: usize) -> Vec<usize> {
    let fractions = [0.35, 0.55, 0.7];
    let mut out: Vec<usize> = Vec::with_capacity(count);
    for i in 0..count {
        let target = fractions[i % fractions.len()];
        let ir = (0..quad.radial)
            .min_by(|&a, &b| {
                let ra = (quad.rho[a * quad.angular] - target).abs();
                let rb = (quad.rho[b * quad.angular] - target).abs();
                ra.total_cmp(&rb)
            })
            .unwrap_or(0);
        let theta = 2.0 * PI * (i as f64 + 0.3) / count as f64;
        let it = ((theta / (2.0 * PI) * quad.angular as f64 - 0.5).round() as usize) % quad.angular;
        let mut idx = ir * quad.angular + it;
        while out.contains(&idx) {
            idx = ir * quad.angular + (idx + 1) % quad.angular;
        }
        out.push(idx);
    }
    out
}

/// Residue of `G - Gamma` at `record.omega0` by `points`-point trapezoidal
/// quadrature on the circle `|omega - omega0| = radius`.
///
/// On the discrete level `G - Gamma = -alpha K (I - alpha K)^{-1} K`, which is
/// evaluated for all nodes against the probe columns. The residue columns are
/// proportional to the mode, which yields `e` with `(e, e) = 1` and then `c`
/// without using any eigenvector or derivative information. The zero count
/// of `det(I - alpha S)` along the same circle certifies isolation.
pub fn extract_residue(
    record: &ResonanceRecord,
    radius: f64,
    points: usize,
    probes: &[usize],
) -> Result<ResidueExtraction> {
    let cavity = &record.cavity;
    let quad = record.quadrature()?;
    let n = quad.len();
    let p = probes.len();
    if points < 8 || p < 2 || probes.iter().any(|&i| i >= n) || !(radius > 0.0) {
        return Err(SpectrumError::InvalidRequest(
            "residue extraction needs >= 8 contour points, >= 2 valid probes and a positive radius".into(),
        ));
    }
    let w0 = record.omega0;
    let sqrt_w: Vec<f64> = quad.weights.iter().map(|w| w.sqrt()).collect();
    let mut residue = vec![vec![Complex64::new(0.0, 0.0); p]; n];
    let mut blocks: Vec<(Complex64, Vec<Vec<Complex64>>)> = Vec::with_capacity(points);
    let mut phases: Vec<f64> = Vec::with_capacity(points);
    for j in 0..points {
        let shift = Complex64::from_polar(radius, 2.0 * PI * j as f64 / points as f64);
        let omega = w0 + shift;
        let op = assemble_k(cavity, &quad, omega)?;
        let alpha = cavity.alpha(omega);
        let mut b: CMat = Mat::from_fn(n, n, |r, c| -alpha * op.matrix[(r, c)]);
        for i in 0..n {
            b[(i, i)] += 1.0;
        }
        let lu = Lu::new(&b);
        drop(b);
        phases.push(lu.log_det().im);
        let cols = Mat::from_fn(n, p, |r, c| op.matrix[(r, probes[c])]);
        let z = lu.solve_mat(&cols);
        let mut block = vec![vec![Complex64::new(0.0, 0.0); p]; p];
        for c in 0..p {
            let zc: Vec<Complex64> = (0..n).map(|r| z[(r, c)]).collect();
            let y = matvec(&op.matrix, &zc);
            let sb = sqrt_w[probes[c]];
            for (a, ya) in y.iter().enumerate() {
                let kernel = -alpha * ya / (sqrt_w[a] * sb);
                residue[a][c] += kernel * shift / points as f64;
            }
            for (a, &pa) in probes.iter().enumerate() {
                block[a][c] = -alpha * y[pa] / (sqrt_w[pa] * sb);
            }
        }
        blocks.push((shift, block));
    }
    let mut total = 0.0;
    for j in 0..points {
        let d = phases[(j + 1) % points] - phases[j];
        total += d - 2.0 * PI * (d / (2.0 * PI)).round();
    }
    let winding = (total / (2.0 * PI)).round() as i64;

    let probe_residue: Vec<Vec<Complex64>> = probes.iter().map(|&a| residue[a].clone()).collect();
    let pm = Mat::from_fn(p, p, |a, b| probe_residue[a][b]);
    let sv = linalg::singular_values(&pm).ok_or_else(|| SpectrumError::Assembly("svd failed".into()))?;
    let sigma_ratio = sv[1] / sv[0];
    let mut big: f64 = 0.0;
    let mut asym: f64 = 0.0;
    for a in 0..p {
        for b in 0..p {
            big = big.max(probe_residue[a][b].norm());
            asym = asym.max((probe_residue[a][b] - probe_residue[b][a]).norm());
        }
    }
    if sigma_ratio > RANK_ONE_LIMIT {
        return Err(SpectrumError::NotRankOne { ratio: sigma_ratio });
    }
    if winding != 1 {
        return Err(SpectrumError::Winding { count: winding });
    }

    // column with the largest norm is c e(x) e(x_b): normalize it to (e, e) = 1
    let bstar = (0..p)
        .max_by(|&a, &b| {
            let na: f64 = residue.iter().map(|r| r[a].norm_sqr()).sum();
            let nb: f64 = residue.iter().map(|r| r[b].norm_sqr()).sum();
            na.total_cmp(&nb)
        })
        .unwrap_or(0);
    let col: Vec<Complex64> = residue.iter().map(|r| r[bstar]).collect();
    let s2: Complex64 = col.iter().zip(&quad.weights).map(|(v, w)| v * v * *w).sum();
    let s = s2.sqrt();
    let mut mode: Vec<Complex64> = col.iter().map(|v| v / s).collect();
    let imax = (0..n)
        .max_by(|&a, &b| mode[a].norm().total_cmp(&mode[b].norm()))
        .unwrap_or(0);
    if mode[imax].re < 0.0 {
        mode.iter_mut().for_each(|v| *v = -*v);
    }
    // c e_b = sum_a w_a e_a Res_ab
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for (b, &pb) in probes.iter().enumerate() {
        let ce: Complex64 = (0..n).map(|a| quad.weights[a] * mode[a] * residue[a][b]).sum();
        num += ce * mode[pb];
        den += mode[pb] * mode[pb];
    }
    let c_contour = num / den;

    let mut remainder_ratio: f64 = 0.0;
    for (shift, block) in &blocks {
        let mut rem = 0.0;
        let mut pole = 0.0;
        for a in 0..p {
            for b in 0..p {
                let pt = c_contour * mode[probes[a]] * mode[probes[b]] / shift;
                rem += (block[a][b] - pt).norm_sqr();
                pole += pt.norm_sqr();
            }
        }
        remainder_ratio = remainder_ratio.max((rem / pole).sqrt());
    }
    let c_analytic = record.c;
    Ok(ResidueExtraction {
        c_contour,
        c_analytic,
        agreement: (c_contour - c_analytic).norm() / c_analytic.norm(),
        sigma_ratio,
        asymmetry: asym / big,
        winding,
        remainder_ratio,
        probes: probes.to_vec(),
        radius,
        points,
        probe_residue,
        mode,
    })
}
