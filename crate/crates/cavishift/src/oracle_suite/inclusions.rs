//! Separation-of-variables references for single inclusions: the NP
//! spectrum of an ellipse in elliptic coordinates and polarization tensors
//! of disks and ellipses.

use std::f64::consts::PI;

/// Harmonic of an ellipse NP eigenfunction `cos(m eta) / h` or `sin(m eta) / h`,
/// `h = |x'(eta)|` for `x = (a cos eta, b sin eta)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EllipseHarmonic {
    Cos(u32),
    Sin(u32),
}

/// Nonconstant NP eigenvalues of the ellipse with semi-axes `a > b`:
/// `cos(m eta)/h -> +rho^m / 2`, `sin(m eta)/h -> -rho^m / 2`,
/// `rho = (a - b) / (a + b)`, for `m = 1..=m_max`.
pub fn ellipse_np_spectrum(a: f64, b: f64, m_max: u32) -> Vec<(f64, EllipseHarmonic)> {
    let rho = (a - b) / (a + b);
    let mut out = Vec::with_capacity(2 * m_max as usize);
    for m in 1..=m_max {
        let v = 0.5 * rho.powi(m as i32);
        out.push((v, EllipseHarmonic::Cos(m)));
        out.push((-v, EllipseHarmonic::Sin(m)));
    }
    out
}

/// Density of an ellipse eigenfunction at parameter `eta`.
pub fn ellipse_density(a: f64, b: f64, h: EllipseHarmonic, eta: f64) -> f64 {
    let speed = (a * a * eta.sin().powi(2) + b * b * eta.cos().powi(2)).sqrt();
    match h {
        EllipseHarmonic::Cos(m) => (m as f64 * eta).cos() / speed,
        EllipseHarmonic::Sin(m) => (m as f64 * eta).sin() / speed,
    }
}

/// Polarization tensor of the disk of radius `r` with contrast `k` from
/// harmonic matching. For the incident field `x_1 = rho cos(theta)` only the
/// first harmonic is excited: `u = C rho cos` inside and
/// `u = (rho + B / rho) cos` outside, with continuity of `u` and of
/// `(conductivity) du/drho` giving `B = r^2 (k - 1) / (k + 1)`. The far field
/// `B cos / rho = (1/2pi) M x . x / |x|^2` then yields `M = 2 pi B I`.
pub fn disk_polarization(k: f64, r: f64) -> [[f64; 2]; 2] {
    // C r = r + B / r  and  k C = 1 - B / r^2
    let c = 2.0 / (k + 1.0);
    let b = r * r * (1.0 - c);
    let m = 2.0 * PI * b;
    [[m, 0.0], [0.0, m]]
}

/// Closed form for the ellipse aligned with the axes:
/// `M = (k - 1) pi a b diag((a + b)/(a + k b), (a + b)/(b + k a))`.
pub fn ellipse_polarization(k: f64, a: f64, b: f64) -> [[f64; 2]; 2] {
    let area = PI * a * b;
    [
        [(k - 1.0) * area * (a + b) / (a + k * b), 0.0],
        [0.0, (k - 1.0) * area * (a + b) / (b + k * a)],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `K*` applied to the oracle densities by a fine trapezoid rule at
    /// off-node targets (the kernel is smooth on a smooth curve).
    #[test]
    fn ellipse_eigenrelation_holds() {
        let (a, b) = (2.0, 1.0);
        let n = 2000;
        let h = 2.0 * PI / n as f64;
        for (val, harm) in ellipse_np_spectrum(a, b, 4) {
            for &eta in &[0.37f64, 1.9, 4.4] {
                let x = [a * eta.cos(), b * eta.sin()];
                let tan = [-a * eta.sin(), b * eta.cos()];
                let sp = (tan[0] * tan[0] + tan[1] * tan[1]).sqrt();
                let nu = [tan[1] / sp, -tan[0] / sp];
                let mut s = 0.0;
                for j in 0..n {
                    let t = (j as f64 + 0.5) * h;
                    let y = [a * t.cos(), b * t.sin()];
                    let speed = (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
                    let d = [x[0] - y[0], x[1] - y[1]];
                    let r2 = d[0] * d[0] + d[1] * d[1];
                    s += (d[0] * nu[0] + d[1] * nu[1]) / (2.0 * PI * r2) * ellipse_density(a, b, harm, t) * speed * h;
                }
                let lhs = s;
                let rhs = val * ellipse_density(a, b, harm, eta);
                assert!((lhs - rhs).abs() < 1e-10, "{harm:?} at {eta}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn disk_is_ellipse_limit() {
        let d = disk_polarization(2.0, 1.0);
        assert!((d[0][0] - 2.0 * PI / 3.0).abs() < 1e-15);
        let e = ellipse_polarization(2.0, 1.0, 1.0);
        assert!((e[0][0] - d[0][0]).abs() < 1e-14 && (e[1][1] - d[1][1]).abs() < 1e-14);
    }
}
