//! Integer-order cylinder functions of complex argument and the free-space
//! outgoing Green's function of the Helmholtz operator.
//!
//! Time dependence is `exp(-i omega t)`, so outgoing waves behave like
//! `exp(+i k r)` and Hankel functions of the first kind appear. The Green's
//! function satisfies `(Laplacian + k^2) Gamma = delta`.
//!
//! Evaluation strategy for `J_n` and `H_n^(1)`:
//! * `|z| <= 4`: ascending series in `f64` (cancellation is mild),
//! * `4 < |z| <= 20`: ascending series in double-double arithmetic,
//! * `|z| > 20`: Hankel asymptotic expansion, continued into the left
//!   half-plane with the standard rotation formulas.
//!
//! Higher Hankel orders come from forward recurrence, which is stable for
//! `H^(1)`. Derivatives use the three-term recurrence.

mod dd;

use dd::{Cdd, Dd};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use thiserror::Error;

const I: Complex64 = Complex64::new(0.0, 1.0);
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest |Im z| accepted; beyond this `exp(|Im z|)` overflows.
pub const MAX_IMAG: f64 = 700.0;
const SMALL_ARG: f64 = 4.0;
const SERIES_ARG: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialFnError {
    #[error("argument {0} outside the supported strip |Im z| <= 700")]
    Overflow(Complex64),
    #[error("domain error: {0}")]
    Domain(&'static str),
}

pub type Result<T> = std::result::Result<T, SpecialFnError>;

/// Homogeneous background medium.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Medium {
    pub eps: f64,
    pub mu: f64,
}

impl Medium {
    pub fn new(eps: f64, mu: f64) -> Self {
        Medium { eps, mu }
    }

    /// `k = omega * sqrt(eps * mu)`.
    pub fn wavenumber(&self, omega: Complex64) -> Complex64 {
        omega * (self.eps * self.mu).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dim {
    Two,
    Three,
}

fn check_arg(z: Complex64) -> Result<()> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(SpecialFnError::Domain("non-finite argument"));
    }
    if z.im.abs() > MAX_IMAG {
        return Err(SpecialFnError::Overflow(z));
    }
    Ok(())
}

fn sign_pow(n: i32) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Bessel function of the first kind `J_n(z)`.
pub fn bessel_j(n: i32, z: Complex64) -> Result<Complex64> {
    check_arg(z)?;
    if n < 0 {
        return Ok(sign_pow(n) * bessel_j(-n, z)?);
    }
    if z.re < 0.0 {
        return Ok(sign_pow(n) * bessel_j(n, -z)?);
    }
    let az = z.norm();
    if az <= SMALL_ARG {
        Ok(jn_series_f64(n as u32, z))
    } else if az <= SERIES_ARG {
        Ok(jn_series_dd(n as u32, z))
    } else if (n as f64) < 0.5 * az {
        let h1 = hankel1_large(n as u32, z);
        let h2 = hankel1_large(n as u32, z.conj()).conj();
        Ok(0.5 * (h1 + h2))
    } else {
        Ok(jn_miller(n as u32, z))
    }
}

/// Hankel function of the first kind `H_n^(1)(z)`, principal branch with
/// the cut along the negative real axis.
pub fn hankel1(n: i32, z: Complex64) -> Result<Complex64> {
    check_arg(z)?;
    if z == Complex64::new(0.0, 0.0) {
        return Err(SpecialFnError::Domain("Hankel function is singular at z = 0"));
    }
    if n < 0 {
        return Ok(sign_pow(n) * hankel1(-n, z)?);
    }
    let n = n as u32;
    let az = z.norm();
    if az > SERIES_ARG {
        if z.re >= 0.0 {
            return Ok(hankel1_large(n, z));
        }
        // z = w e^{+i pi} (upper half) or w e^{-i pi} (lower half), Re w > 0.
        let w = -z;
        let s = sign_pow(n as i32);
        let h1 = hankel1_large(n, w);
        let h2 = hankel1_large(n, w.conj()).conj();
        return Ok(if z.im >= 0.0 { -s * h2 } else { s * (2.0 * h1 + h2) });
    }
    let (h0, h1) = if az <= SMALL_ARG {
        h01_series_f64(z)
    } else {
        h01_series_dd(z)
    };
    Ok(recur_up(n, z, h0, h1))
}

/// `(H_0^(1)(z), H_1^(1)(z))`, the pair needed by the 2D kernel and its
/// gradient.
pub fn hankel1_01(z: Complex64) -> Result<(Complex64, Complex64)> {
    check_arg(z)?;
    if z == Complex64::new(0.0, 0.0) {
        return Err(SpecialFnError::Domain("Hankel function is singular at z = 0"));
    }
    Ok(h01_unchecked(z))
}

#[inline]
fn h01_unchecked(z: Complex64) -> (Complex64, Complex64) {
    let az = z.norm();
    if az <= SMALL_ARG {
        h01_series_f64(z)
    } else if az <= SERIES_ARG {
        h01_series_dd(z)
    } else {
        (hankel1(0, z).unwrap_or_default(), hankel1(1, z).unwrap_or_default())
    }
}

/// `J_n'(z)` from the recurrence `J_n' = (J_{n-1} - J_{n+1}) / 2`.
pub fn bessel_j_deriv(n: i32, z: Complex64) -> Result<Complex64> {
    Ok(0.5 * (bessel_j(n - 1, z)? - bessel_j(n + 1, z)?))
}

/// `H_n^(1)'(z)` from the recurrence.
pub fn hankel1_deriv(n: i32, z: Complex64) -> Result<Complex64> {
    Ok(0.5 * (hankel1(n - 1, z)? - hankel1(n + 1, z)?))
}

fn recur_up(n: u32, z: Complex64, h0: Complex64, h1: Complex64) -> Complex64 {
    match n {
        0 => h0,
        1 => h1,
        _ => {
            let (mut a, mut b) = (h0, h1);
            for m in 1..n {
                let c = (2.0 * m as f64) / z * b - a;
                a = b;
                b = c;
            }
            b
        }
    }
}

fn jn_series_f64(n: u32, z: Complex64) -> Complex64 {
    let h = 0.5 * z;
    let q = -h * h;
    let mut t = Complex64::new(1.0, 0.0);
    for k in 1..=n {
        t = t * h / k as f64;
    }
    let mut sum = t;
    for k in 1..200u32 {
        t = t * q / (k as f64 * (n + k) as f64);
        sum += t;
        if t.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

fn jn_series_dd(n: u32, z: Complex64) -> Complex64 {
    let zd = Cdd::from_c64(z);
    let h = zd.scale_f64(0.5);
    let q = -(h * h);
    let mut t = Cdd::ONE;
    for k in 1..=n {
        t = (t * h).div_f64(k as f64);
    }
    let mut sum = t;
    for k in 1..400u32 {
        t = (t * q).div_f64(k as f64 * (n + k) as f64);
        sum = sum + t;
        if k as f64 > 0.5 * z.norm() && t.norm1() <= 1e-34 * sum.norm1() {
            break;
        }
    }
    sum.to_c64()
}

/// Ascending series for H_0 and H_1 in plain floating point.
fn h01_series_f64(z: Complex64) -> (Complex64, Complex64) {
    let h = 0.5 * z;
    let q = -h * h;
    let ln_h = h.ln();
    // J0 terms t0_k = q^k/(k!)^2, J1 terms t1_k = q^k/(k!(k+1)!)
    let mut t0 = Complex64::new(1.0, 0.0);
    let mut t1 = Complex64::new(1.0, 0.0);
    let mut j0 = t0;
    let mut s1 = t1;
    let mut y0s = Complex64::new(0.0, 0.0);
    // psi(k+1) + psi(k+2) = -2 gamma + H_k + H_{k+1}
    let mut hk = 0.0;
    let mut y1s = t1 * (-2.0 * EULER_GAMMA + 1.0);
    for k in 1..100u32 {
        let kf = k as f64;
        t0 = t0 * q / (kf * kf);
        t1 = t1 * q / (kf * (kf + 1.0));
        hk += 1.0 / kf;
        j0 += t0;
        s1 += t1;
        y0s += hk * t0;
        y1s += (-2.0 * EULER_GAMMA + 2.0 * hk + 1.0 / (kf + 1.0)) * t1;
        if t0.norm() <= 1e-17 * j0.norm() && t1.norm() <= 1e-17 * s1.norm() {
            break;
        }
    }
    let j1 = h * s1;
    let y0 = (2.0 / PI) * ((ln_h + EULER_GAMMA) * j0 - y0s);
    let y1 = -2.0 / (PI * z) + (2.0 / PI) * ln_h * j1 - h * y1s / PI;
    (j0 + I * y0, j1 + I * y1)
}

/// Same series as [`h01_series_f64`] carried out in double-double.
fn h01_series_dd(z: Complex64) -> (Complex64, Complex64) {
    let zd = Cdd::from_c64(z);
    let h = zd.scale_f64(0.5);
    let q = -(h * h);
    let ln_h = h.ln();
    let gamma = Dd {
        hi: dd::EULER_GAMMA.hi,
        lo: dd::EULER_GAMMA.lo,
    };
    let mut t0 = Cdd::ONE;
    let mut t1 = Cdd::ONE;
    let mut j0 = t0;
    let mut s1 = t1;
    let mut y0s = Cdd::ZERO;
    let mut hk = Dd::ZERO;
    let two_gamma = gamma.mul_f64(2.0);
    let mut y1s = t1.scale(Dd::ONE - two_gamma);
    let half_az = 0.5 * z.norm();
    for k in 1..400u32 {
        let kf = k as f64;
        t0 = (t0 * q).div_f64(kf * kf);
        t1 = (t1 * q).div_f64(kf * (kf + 1.0));
        hk = hk + Dd::ONE.div_f64(kf);
        j0 = j0 + t0;
        s1 = s1 + t1;
        y0s = y0s + t0.scale(hk);
        let coef = hk.mul_f64(2.0) + Dd::ONE.div_f64(kf + 1.0) - two_gamma;
        y1s = y1s + t1.scale(coef);
        if kf > half_az && t0.norm1() <= 1e-34 * j0.norm1() && t1.norm1() <= 1e-34 * s1.norm1() {
            break;
        }
    }
    let pi = dd::PI;
    let two_over_pi = Dd::new(2.0).div(pi);
    let one_over_pi = Dd::ONE.div(pi);
    let j1 = h * s1;
    let lg = ln_h + Cdd::new(gamma, Dd::ZERO);
    let y0 = (lg * j0 - y0s).scale(two_over_pi);
    let y1 = (zd.recip().scale(-two_over_pi)) + (ln_h * j1).scale(two_over_pi)
        - (h * y1s).scale(one_over_pi);
    ((j0 + y0.mul_i()).to_c64(), (j1 + y1.mul_i()).to_c64())
}

/// Hankel asymptotic expansion of `H_n^(1)(z)` for `|z| > 20`, `Re z >= 0`.
fn hankel1_large(n: u32, z: Complex64) -> Complex64 {
    let nu2 = 4.0 * (n as f64) * (n as f64);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for k in 1..200u32 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = term * I * (nu2 - odd * odd) / (kf * 8.0 * z);
        let size = next.norm();
        if size > last {
            break;
        }
        term = next;
        sum += term;
        last = size;
        if size <= 1e-17 * sum.norm() {
            break;
        }
    }
    let phase = z - (n as f64) * FRAC_PI_2 - FRAC_PI_4;
    (2.0 / (PI * z)).sqrt() * (I * phase).exp() * sum
}

/// Backward (Miller) recurrence for `J_n` when `n >= |z|/2` and `|z| > 20`,
/// normalized against the Hankel value at a lower order.
fn jn_miller(n: u32, z: Complex64) -> Complex64 {
    let az = z.norm();
    let m = (0.5 * az).floor() as u32;
    let top = n + 60 + (az.sqrt() as u32) * 4;
    let mut above = Complex64::new(0.0, 0.0);
    let mut cur = Complex64::new(1e-30, 0.0);
    let mut at_n = if top == n { cur } else { Complex64::new(0.0, 0.0) };
    let mut k = top;
    while k > m {
        let below = (2.0 * k as f64) / z * cur - above;
        above = cur;
        cur = below;
        k -= 1;
        if k == n {
            at_n = cur;
        }
        let s = cur.norm();
        if s > 1e200 {
            above /= s;
            cur /= s;
            at_n /= s;
        }
    }
    let h1 = hankel1_large(m, z);
    let h2 = hankel1_large(m, z.conj()).conj();
    let jm = 0.5 * (h1 + h2);
    at_n * (jm / cur)
}

/// 2D outgoing kernel `-(i/4) H_0^(1)(k r)` and its radial derivative
/// `(i k / 4) H_1^(1)(k r)`, for `r > 0`. No argument checking; intended for
/// assembly loops.
#[inline]
pub fn gamma2d_radial(k: Complex64, r: f64) -> (Complex64, Complex64) {
    let (h0, h1) = h01_unchecked(k * r);
    (-0.25 * I * h0, 0.25 * I * k * h1)
}

/// Value of the 2D kernel only.
#[inline]
pub fn gamma2d(k: Complex64, r: f64) -> Complex64 {
    gamma2d_radial(k, r).0
}

/// Radial profile `G(r) = r F'(r)`, where `F` is the radial solution of
/// `Laplacian F = Gamma` without a point source at the origin, together
/// with `dG/dk`.
///
/// By the divergence theorem, for `x` not on the boundary,
/// `int_Omega Gamma(x - y) dy = oint G(|y - x|) (y - x).nu / |y - x|^2 dsigma(y)`,
/// which turns the area potential of a constant into a smooth boundary
/// integral. `G(r) = -(i / 4k^2) (k r H_1(k r) + 2i/pi)` is summed from its
/// ascending series for `|k r| < 2` to avoid the cancellation at small `r`.
pub fn area_potential_profile(k: Complex64, r: f64) -> (Complex64, Complex64) {
    let z = k * r;
    if z.norm() < 2.0 {
        let h = 0.5 * z;
        let q = -h * h;
        let ln_h = h.ln();
        // T_m = (-h^2)^m / (m! (m+1)!), psi(m+1) + psi(m+2) = -2 gamma + H_m + H_{m+1}
        let mut t = Complex64::new(1.0, 0.0);
        let mut s_j = t;
        let mut s_psi = t * (1.0 - 2.0 * EULER_GAMMA);
        // d/dk of h^(2m): 2m/k, collected as sum m T_m
        let mut s_jm = Complex64::new(0.0, 0.0);
        let mut s_psim = Complex64::new(0.0, 0.0);
        let mut hm = 0.0;
        for m in 1..60u32 {
            let mf = m as f64;
            t = t * q / (mf * (mf + 1.0));
            hm += 1.0 / mf;
            let psi = -2.0 * EULER_GAMMA + 2.0 * hm + 1.0 / (mf + 1.0);
            s_j += t;
            s_psi += psi * t;
            s_jm += mf * t;
            s_psim += mf * psi * t;
            if t.norm() < 1e-18 * s_j.norm() {
                break;
            }
        }
        let pref = -I * r * r / 16.0;
        let g = pref * (2.0 * s_j + I * (2.0 / PI) * (2.0 * ln_h * s_j - s_psi));
        // d/dk: ln h -> 1/k, T_m -> 2m T_m / k
        let dg = pref / k
            * (4.0 * s_jm + I * (2.0 / PI) * (2.0 * s_j + 4.0 * ln_h * s_jm - 2.0 * s_psim));
        (g, dg)
    } else {
        let (h0, h1) = h01_unchecked(z);
        let g = -I / (4.0 * k * k) * (z * h1 + 2.0 * I / PI);
        let dg = -2.0 * g / k - I * r * r / (4.0 * k) * h0;
        (g, dg)
    }
}

fn separation(x: &[f64], y: &[f64], dim: Dim) -> Result<(Vec<f64>, f64)> {
    let d = match dim {
        Dim::Two => 2,
        Dim::Three => 3,
    };
    if x.len() != d || y.len() != d {
        return Err(SpecialFnError::Domain("point dimension does not match"));
    }
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let r = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(SpecialFnError::Domain("kernel evaluated on the diagonal x = y"));
    }
    Ok((diff, r))
}

/// Outgoing fundamental solution `Gamma_m(x - y)` of `Laplacian + k^2` with
/// `k = omega sqrt(eps mu)`.
pub fn gamma_m(x: &[f64], y: &[f64], omega: Complex64, medium: Medium, dim: Dim) -> Result<Complex64> {
    let (_, r) = separation(x, y, dim)?;
    let k = medium.wavenumber(omega);
    match dim {
        Dim::Two => {
            check_arg(k * r)?;
            Ok(-0.25 * I * hankel1(0, k * r)?)
        }
        Dim::Three => {
            check_arg(k * r)?;
            Ok(-(I * k * r).exp() / (4.0 * PI * r))
        }
    }
}

/// Gradient of `Gamma_m(x - y)` with respect to `x`.
pub fn grad_gamma_m(
    x: &[f64],
    y: &[f64],
    omega: Complex64,
    medium: Medium,
    dim: Dim,
) -> Result<Vec<Complex64>> {
    let (diff, r) = separation(x, y, dim)?;
    let k = medium.wavenumber(omega);
    check_arg(k * r)?;
    let dr = match dim {
        Dim::Two => 0.25 * I * k * hankel1(1, k * r)?,
        Dim::Three => -(I * k * r).exp() * (I * k * r - 1.0) / (4.0 * PI * r * r),
    };
    Ok(diff.iter().map(|d| dr * (d / r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn trivial_values() {
        assert_eq!(bessel_j(0, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(bessel_j(1, c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert!(matches!(hankel1(0, c(0.0, 0.0)), Err(SpecialFnError::Domain(_))));
        assert!(matches!(bessel_j(0, c(1.0, 800.0)), Err(SpecialFnError::Overflow(_))));
    }

    #[test]
    fn known_real_values() {
        // Standard tabulated values.
        let j0 = bessel_j(0, c(2.0, 0.0)).unwrap();
        assert!((j0.re - 0.223_890_779_141_235_7).abs() < 1e-15);
        let h = hankel1(0, c(1.0, 0.0)).unwrap();
        assert!((h.re - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((h.im - 0.088_256_964_215_676_96).abs() < 1e-15);
        let h = hankel1(1, c(30.0, 0.0)).unwrap();
        // J1(30), Y1(30)
        assert!((h.re - (-0.118_751_062_616_623_05)).abs() < 1e-14, "{h}");
        assert!((h.im - 0.084_425_570_661_747_13).abs() < 1e-14, "{h}");
    }

    #[test]
    fn regimes_agree_at_crossovers() {
        // Each pair of neighbouring evaluation methods agrees on the
        // crossover circle.
        for k in 0..16 {
            let t = -PI + (k as f64 + 0.5) * PI / 8.0;
            let z = Complex64::from_polar(SMALL_ARG, t);
            let (a0, a1) = h01_series_f64(z);
            let (b0, b1) = h01_series_dd(z);
            assert!((a0 - b0).norm() <= 1e-12 * b0.norm(), "t={t} {}", (a0 - b0).norm() / b0.norm());
            assert!((a1 - b1).norm() <= 1e-12 * b1.norm(), "t={t}");
            for n in 0..4 {
                let a = jn_series_f64(n, z);
                let b = jn_series_dd(n, z);
                assert!((a - b).norm() <= 1e-13 * b.norm());
            }
            if t.cos() >= 0.0 {
                let z = Complex64::from_polar(SERIES_ARG, t);
                let (b0, b1) = h01_series_dd(z);
                let a0 = hankel1_large(0, z);
                let a1 = hankel1_large(1, z);
                assert!((a0 - b0).norm() <= 1e-11 * b0.norm(), "t={t} {a0} {b0}");
                assert!((a1 - b1).norm() <= 1e-11 * b1.norm(), "t={t}");
                for n in 0..4u32 {
                    let a = 0.5 * (hankel1_large(n, z) + hankel1_large(n, z.conj()).conj());
                    let b = jn_series_dd(n, z);
                    assert!((a - b).norm() <= 1e-11 * b.norm(), "n={n} t={t}");
                }
            }
        }
    }

    #[test]
    fn outgoing_decay_upper_half_plane() {
        for &y in &[5.0, 10.0, 20.0, 40.0] {
            let z = c(0.0, y);
            let h = hankel1(0, z).unwrap().norm();
            let model = (2.0 / (PI * y)).sqrt() * (-y).exp();
            assert!((h / model - 1.0).abs() < 0.05, "y={y}");
        }
    }

    #[test]
    fn wronskian_spot() {
        let z = c(2.0, 1.0);
        for n in 0..4 {
            let w = bessel_j(n, z).unwrap() * hankel1_deriv(n, z).unwrap()
                - bessel_j_deriv(n, z).unwrap() * hankel1(n, z).unwrap();
            let expect = 2.0 * I / (PI * z);
            assert!((w - expect).norm() <= 1e-12 * expect.norm());
        }
    }

    #[test]
    fn reflection_orders() {
        let z = c(3.3, -0.7);
        for n in 1..5 {
            let s = sign_pow(n);
            assert!((bessel_j(-n, z).unwrap() - s * bessel_j(n, z).unwrap()).norm() < 1e-15);
            assert!((hankel1(-n, z).unwrap() - s * hankel1(n, z).unwrap()).norm() < 1e-13);
        }
    }

    #[test]
    fn kernel_symmetry_and_limits() {
        let m = Medium::new(1.0, 1.0);
        let w = c(0.7, -0.05);
        let x = [0.3, -0.2];
        let y = [-0.4, 0.5];
        let a = gamma_m(&x, &y, w, m, Dim::Two).unwrap();
        let b = gamma_m(&y, &x, w, m, Dim::Two).unwrap();
        assert_eq!(a, b);
        let ga = grad_gamma_m(&x, &y, w, m, Dim::Two).unwrap();
        let gb = grad_gamma_m(&y, &x, w, m, Dim::Two).unwrap();
        for i in 0..2 {
            assert!((ga[i] + gb[i]).norm() < 1e-15);
        }
        let g3 = gamma_m(&[0.0, 0.0, 0.0], &[0.0, 0.0, 2.0], c(1e-9, 0.0), m, Dim::Three).unwrap();
        assert!((g3 - c(-1.0 / (8.0 * PI), 0.0)).norm() < 1e-9);
        assert!(gamma_m(&x, &x, w, m, Dim::Two).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = Medium::new(2.0, 1.0);
        let w = c(0.9, -0.1);
        let y = [0.1, 0.2];
        let x = [0.1 + 0.8, 0.2 + 0.6];
        let g = grad_gamma_m(&x, &y, w, m, Dim::Two).unwrap();
        let h = 1e-5;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (gamma_m(&xp, &y, w, m, Dim::Two).unwrap() - gamma_m(&xm, &y, w, m, Dim::Two).unwrap())
                / (2.0 * h);
            assert!((fd - g[i]).norm() < 1e-6);
        }
    }

    #[test]
    fn near_field_log_derivative() {
        let m = Medium::new(1.0, 1.0);
        let r = 1e-6;
        let g = grad_gamma_m(&[r, 0.0], &[0.0, 0.0], c(1.0, 0.0), m, Dim::Two).unwrap();
        let mag = (g[0].norm_sqr() + g[1].norm_sqr()).sqrt();
        assert!((mag * 2.0 * PI * r - 1.0).abs() < 1e-6);
    }

    #[test]
    fn helmholtz_stencil() {
        let m = Medium::new(1.0, 1.0);
        let w = c(1.3, -0.2);
        let k = m.wavenumber(w);
        let y = [0.0, 0.0];
        let x = [0.7, 0.4];
        let h = 1e-3;
        let f = |dx: f64, dy: f64| gamma_m(&[x[0] + dx, x[1] + dy], &y, w, m, Dim::Two).unwrap();
        let lap = (f(h, 0.0) + f(-h, 0.0) + f(0.0, h) + f(0.0, -h) - 4.0 * f(0.0, 0.0)) / (h * h);
        let res = lap + k * k * f(0.0, 0.0);
        assert!(res.norm() < 1e-5, "{res}");
    }

    #[test]
    fn area_potential_profile_branches_agree() {
        // Series and Hankel forms at the switch point, and dG/dk by differences.
        for &k in &[c(0.7, -0.05), c(2.5, -0.3), c(1.0, 0.0)] {
            let r = 2.0 / k.norm();
            let (gs, dgs) = area_potential_profile(k, r * (1.0 - 1e-12));
            let (gh, dgh) = area_potential_profile(k, r * (1.0 + 1e-12));
            assert!((gs - gh).norm() < 1e-11 * gh.norm(), "{gs} {gh}");
            assert!((dgs - dgh).norm() < 1e-10 * dgh.norm(), "{dgs} {dgh}");
            for &rr in &[0.3 * r, 1.7 * r] {
                let h = 1e-5;
                let fd = (area_potential_profile(k + h, rr).0 - area_potential_profile(k - h, rr).0) / (2.0 * h);
                let an = area_potential_profile(k, rr).1;
                assert!((fd - an).norm() < 1e-8 * an.norm().max(1e-3), "{fd} {an}");
            }
        }
        // r d/dr (G / r^2 * r^2 ...) : G = r F', and (1/r)(r F')' = Gamma
        let k = c(0.9, -0.1);
        let r = 0.8;
        let h = 1e-4;
        let dg = (area_potential_profile(k, r + h).0 - area_potential_profile(k, r - h).0) / (2.0 * h);
        let gamma = gamma2d(k, r);
        assert!((dg / r - gamma).norm() < 1e-7, "{} {}", dg / r, gamma);
    }
}
