//! Resonances of concentric layered disks from the angular-order-`n`
//! transfer relation.
//!
//! In each layer the field is `a J_n(k r) + b H_n(k r)` times `e^{i n theta}`;
//! `u` and `(1/mu) du/dr` are continuous across each interface. Starting from
//! the regular solution `(a, b) = (1, 0)` in the core, the outer `J_n`
//! coefficient vanishes exactly at a resonance (no incoming wave).

use super::OracleError;
use crate::special_functions::{bessel_j, bessel_j_deriv, hankel1, hankel1_deriv, Medium};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Outer radius of the layer.
    pub radius: f64,
    pub eps: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialLayerStack {
    /// Layers from the core outwards, strictly increasing radii.
    pub layers: Vec<Layer>,
    pub outer: Medium,
    pub order: i32,
}

/// Rectangle `[re_min, re_max] x [im_min, im_max]` in the frequency plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl SearchWindow {
    pub fn contains(&self, w: Complex64) -> bool {
        w.re > self.re_min && w.re < self.re_max && w.im > self.im_min && w.im < self.im_max
    }

    pub fn around(center: Complex64, half_re: f64, half_im: f64) -> Self {
        SearchWindow {
            re_min: center.re - half_re,
            re_max: center.re + half_re,
            im_min: center.im - half_im,
            im_max: center.im + half_im,
        }
    }
}

impl RadialLayerStack {
    /// Homogeneous disk of radius `radius` inside a background medium.
    pub fn disk(radius: f64, eps: f64, mu: f64, outer: Medium, order: i32) -> Self {
        RadialLayerStack {
            layers: vec![Layer { radius, eps, mu }],
            outer,
            order,
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.layers.is_empty() {
            return Err(OracleError::Numerical("layer stack is empty".into()));
        }
        let mut prev = 0.0;
        for l in &self.layers {
            if !(l.radius > prev && l.eps > 0.0 && l.mu > 0.0) {
                return Err(OracleError::Numerical(
                    "layers need increasing radii and positive constants".into(),
                ));
            }
            prev = l.radius;
        }
        if !(self.outer.eps > 0.0 && self.outer.mu > 0.0) {
            return Err(OracleError::Numerical("outer medium constants must be positive".into()));
        }
        Ok(())
    }

    /// Outer `J_n` coefficient for unit core amplitude.
    pub fn determinant(&self, omega: Complex64) -> Result<Complex64, OracleError> {
        let n = self.order;
        let (mut a, mut b) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        let media: Vec<(f64, f64)> = self
            .layers
            .iter()
            .map(|l| (l.eps, l.mu))
            .chain(std::iter::once((self.outer.eps, self.outer.mu)))
            .collect();
        let sf = |r: Result<Complex64, _>| r.map_err(|e| OracleError::Numerical(format!("{e}")));
        for (i, l) in self.layers.iter().enumerate() {
            let r = l.radius;
            let (e0, m0) = media[i];
            let (e1, m1) = media[i + 1];
            let k0 = omega * (e0 * m0).sqrt();
            let k1 = omega * (e1 * m1).sqrt();
            let u = a * sf(bessel_j(n, k0 * r))? + b * sf(hankel1(n, k0 * r))?;
            let du = (a * k0 * sf(bessel_j_deriv(n, k0 * r))? + b * k0 * sf(hankel1_deriv(n, k0 * r))?) / m0;
            let j1 = sf(bessel_j(n, k1 * r))?;
            let h1 = sf(hankel1(n, k1 * r))?;
            let dj1 = k1 * sf(bessel_j_deriv(n, k1 * r))? / m1;
            let dh1 = k1 * sf(hankel1_deriv(n, k1 * r))? / m1;
            // Wronskian: j1 dh1 - dj1 h1 = 2i / (pi mu1 r)
            let det = Complex64::new(0.0, 2.0 / (PI * m1 * r));
            a = (u * dh1 - h1 * du) / det;
            b = (j1 * du - u * dj1) / det;
        }
        Ok(a)
    }

    fn derivative(&self, omega: Complex64) -> Result<Complex64, OracleError> {
        let h = 1e-6 * omega.norm().max(1e-3);
        Ok((self.determinant(omega + h)? - self.determinant(omega - h)?) / (2.0 * h))
    }

    /// Newton polish of a root; returns `(root, |D(root)|)`.
    pub fn polish(&self, seed: Complex64) -> Result<(Complex64, f64), OracleError> {
        let mut w = seed;
        for _ in 0..80 {
            let d = self.determinant(w)?;
            let dp = self.derivative(w)?;
            if dp.norm() == 0.0 || !dp.re.is_finite() {
                break;
            }
            let step = d / dp;
            let cap = 0.2 * w.norm();
            w -= if step.norm() > cap { step * (cap / step.norm()) } else { step };
            if step.norm() <= 1e-15 * w.norm() {
                break;
            }
        }
        let res = self.determinant(w)?.norm();
        if !res.is_finite() {
            return Err(OracleError::Numerical(format!("Newton diverged from {seed}")));
        }
        Ok((w, res))
    }

    /// Number of zeros of the determinant inside the window (argument
    /// principle with adaptive sampling of the boundary).
    pub fn count_zeros(&self, win: &SearchWindow) -> Result<i64, OracleError> {
        let corners = [
            Complex64::new(win.re_min, win.im_min),
            Complex64::new(win.re_max, win.im_min),
            Complex64::new(win.re_max, win.im_max),
            Complex64::new(win.re_min, win.im_max),
        ];
        let mut total = 0.0;
        for s in 0..4 {
            let (a, b) = (corners[s], corners[(s + 1) % 4]);
            total += self.arg_change(a, b, self.determinant(a)?, self.determinant(b)?, 0)?;
        }
        Ok((total / (2.0 * PI)).round() as i64)
    }

    fn arg_change(
        &self,
        a: Complex64,
        b: Complex64,
        fa: Complex64,
        fb: Complex64,
        depth: u32,
    ) -> Result<f64, OracleError> {
        let d = (fb / fa).arg();
        if depth >= 24 || (d.abs() < PI / 8.0 && depth >= 3) {
            return Ok(d);
        }
        let m = 0.5 * (a + b);
        let fm = self.determinant(m)?;
        Ok(self.arg_change(a, m, fa, fm, depth + 1)? + self.arg_change(m, b, fm, fb, depth + 1)?)
    }
}

/// All resonances of the stack inside `win`, sorted by real part. The
/// number of returned roots is checked against the argument-principle count.
pub fn multilayer_disk_resonances(stack: &RadialLayerStack, win: &SearchWindow) -> Result<Vec<Complex64>, OracleError> {
    stack.validate()?;
    let count = stack.count_zeros(win)?;
    if count < 0 {
        return Err(OracleError::Numerical(format!("negative zero count {count}: window encloses a pole")));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let scale = win.re_max.abs().max(win.re_min.abs()).max(1.0);
    let mut roots: Vec<Complex64> = Vec::new();
    for level in 0..5 {
        let nx = 4usize << level;
        let ny = 2usize << level;
        for i in 0..nx {
            for j in 0..ny {
                let seed = Complex64::new(
                    win.re_min + (win.re_max - win.re_min) * (i as f64 + 0.5) / nx as f64,
                    win.im_min + (win.im_max - win.im_min) * (j as f64 + 0.5) / ny as f64,
                );
                if let Ok((w, res)) = stack.polish(seed) {
                    if win.contains(w) && res <= 1e-10 && roots.iter().all(|r| (r - w).norm() > 1e-8 * scale) {
                        roots.push(w);
                    }
                }
            }
        }
        if roots.len() as i64 >= count {
            break;
        }
    }
    if roots.len() as i64 != count {
        return Err(OracleError::Numerical(format!(
            "found {} roots but the argument principle counts {count}",
            roots.len()
        )));
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re));
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cavity(order: i32) -> RadialLayerStack {
        RadialLayerStack::disk(1.0, 11.0, 1.0, Medium::new(1.0, 1.0), order)
    }

    #[test]
    fn free_space_has_no_resonances() {
        let s = RadialLayerStack::disk(1.0, 1.0, 1.0, Medium::new(1.0, 1.0), 1);
        let win = SearchWindow {
            re_min: 0.2,
            re_max: 2.0,
            im_min: -0.5,
            im_max: -0.01,
        };
        assert!(multilayer_disk_resonances(&s, &win).unwrap().is_empty());
    }

    #[test]
    fn dipole_and_monopole_roots() {
        let win = SearchWindow::around(Complex64::new(0.69, -0.07), 0.1, 0.05);
        let r = multilayer_disk_resonances(&unit_cavity(1), &win).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - Complex64::new(0.688_490_713_572_393_1, -0.066_158_096_133_913_73)).norm() < 1e-12);
        let (w, res) = unit_cavity(1).polish(r[0]).unwrap();
        assert!(res <= 1e-12 && w.im < 0.0);
        let win = SearchWindow::around(Complex64::new(0.25, -0.12), 0.1, 0.06);
        let r = multilayer_disk_resonances(&unit_cavity(0), &win).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - Complex64::new(0.250_687_539_510_739_74, -0.121_754_110_326_425_64)).norm() < 1e-12);
    }

    #[test]
    fn counts_several_roots() {
        let win = SearchWindow {
            re_min: 0.3,
            re_max: 2.6,
            im_min: -0.2,
            im_max: -0.005,
        };
        let s = unit_cavity(1);
        let roots = multilayer_disk_resonances(&s, &win).unwrap();
        assert_eq!(roots.len() as i64, s.count_zeros(&win).unwrap());
        assert!(roots.len() >= 2);
    }
}
