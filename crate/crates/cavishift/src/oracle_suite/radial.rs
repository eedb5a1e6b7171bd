//! Separation of variables for the cavity volume operator on a disk.
//!
//! An eigenfunction of `K` on the disk of radius `R` with angular order `n`
//! is `J_n(q r)` inside, continued by the outgoing `H_n(k r)`, where
//! `q^2 = k^2 + 1/lambda`. Matching logarithmic derivatives at `r = R` gives
//! `q J_n'(q R) H_n(k R) - k H_n'(k R) J_n(q R) = 0`.

use super::OracleError;
use crate::special_functions::{bessel_j, bessel_j_deriv, hankel1, hankel1_deriv};
use num_complex::Complex64;
use std::f64::consts::PI;

fn sf(r: crate::special_functions::Result<Complex64>) -> Result<Complex64, OracleError> {
    r.map_err(|e| OracleError::Numerical(format!("{e}")))
}

fn matching(n: i32, k: Complex64, radius: f64, lambda: Complex64) -> Result<Complex64, OracleError> {
    let q = (k * k + 1.0 / lambda).sqrt();
    Ok(q * sf(bessel_j_deriv(n, q * radius))? * sf(hankel1(n, k * radius))?
        - k * sf(hankel1_deriv(n, k * radius))? * sf(bessel_j(n, q * radius))?)
}

/// Eigenvalue of `K` on the disk with angular order `n` at wavenumber `k`,
/// found by Newton iteration from `seed`.
pub fn disk_operator_eigenvalue(n: i32, k: Complex64, radius: f64, seed: Complex64) -> Result<Complex64, OracleError> {
    let mut lam = seed;
    for _ in 0..100 {
        let h = 1e-7 * lam.norm();
        let f = matching(n, k, radius, lam)?;
        let d = (matching(n, k, radius, lam + h)? - matching(n, k, radius, lam - h)?) / (2.0 * h);
        let step = f / d;
        lam -= step;
        if step.norm() <= 1e-15 * lam.norm() {
            return Ok(lam);
        }
    }
    let f = matching(n, k, radius, lam)?;
    if f.norm() < 1e-10 {
        Ok(lam)
    } else {
        Err(OracleError::Numerical(format!("eigenvalue iteration stalled at {lam}")))
    }
}

/// Pole-pencil data of a disk resonance from the radial reduction.
#[derive(Clone, Debug)]
pub struct DiskPoleData {
    pub lambda0: Complex64,
    pub dlambda: Complex64,
    pub r_deriv: Complex64,
    /// `c = -lambda0 / R(omega0)`.
    pub c: Complex64,
    /// Interior wavenumber `q` at the resonance.
    pub q: Complex64,
    /// `C^2` in `e = C J_n(q r) cos(n theta)` with `(e, e) = 1`.
    pub amplitude_sq: Complex64,
    /// `grad e(0) . grad e(0)` (non-conjugated); zero unless `n = 1`.
    pub center_gradient_sq: Complex64,
}

/// Radial-route pole data for the disk cavity `(tau eps_c + eps_m, mu_m)`
/// in background `(eps_m, mu_m)` at its resonance `omega0` of order `n`.
pub fn disk_pole_data(
    n: i32,
    omega0: Complex64,
    radius: f64,
    eps_m: f64,
    mu_m: f64,
    tau_eps_c: f64,
) -> Result<DiskPoleData, OracleError> {
    let beta = tau_eps_c * mu_m;
    let km = (eps_m * mu_m).sqrt();
    let lam_at = |w: Complex64, seed: Complex64| disk_operator_eigenvalue(n, w * km, radius, seed);
    let lambda0 = lam_at(omega0, 1.0 / (omega0 * omega0 * beta))?;
    let h = 1e-5 * omega0.norm();
    let lp = lam_at(omega0 + h, lambda0)?;
    let lm = lam_at(omega0 - h, lambda0)?;
    let lp2 = lam_at(omega0 + 2.0 * h, lambda0)?;
    let lm2 = lam_at(omega0 - 2.0 * h, lambda0)?;
    let dlambda = (8.0 * (lp - lm) - (lp2 - lm2)) / (12.0 * h);
    let r_deriv = -2.0 * omega0 * beta * lambda0 - omega0 * omega0 * beta * dlambda;
    let k = omega0 * km;
    let q = (k * k + 1.0 / lambda0).sqrt();
    // int_0^R J_n(q r)^2 r dr = (R^2/2) [J_n'(qR)^2 + (1 - n^2/(qR)^2) J_n(qR)^2]
    let qr = q * radius;
    let jn = sf(bessel_j(n, qr))?;
    let jp = sf(bessel_j_deriv(n, qr))?;
    let radial = 0.5 * radius * radius * (jp * jp + (1.0 - (n * n) as f64 / (qr * qr)) * jn * jn);
    let angular = if n == 0 { 2.0 * PI } else { PI };
    let amplitude_sq = 1.0 / (angular * radial);
    let center_gradient_sq = if n == 1 {
        amplitude_sq * q * q / 4.0
    } else {
        Complex64::new(0.0, 0.0)
    };
    Ok(DiskPoleData {
        lambda0,
        dlambda,
        r_deriv,
        c: -lambda0 / r_deriv,
        q,
        amplitude_sq,
        center_gradient_sq,
    })
}
