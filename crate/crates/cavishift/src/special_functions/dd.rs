//! Double-double arithmetic (about 32 significant digits).
//!
//! Used where the ascending Bessel series cancels heavily, i.e. for
//! moderate arguments where the terms are much larger than the sum.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

pub const PI: Dd = Dd {
    hi: 3.141592653589793,
    lo: 1.2246467991473532e-16,
};
pub const EULER_GAMMA: Dd = Dd {
    hi: 0.5772156649015329,
    lo: -4.942915152430645e-18,
};
const LN2: Dd = Dd {
    hi: 0.6931471805599453,
    lo: 2.3190468138462996e-17,
};
const FRAC_PI_2: Dd = Dd {
    hi: 1.5707963267948966,
    lo: 6.123233995736766e-17,
};

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div(self, b: Dd) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }

    pub fn div_f64(self, b: f64) -> Self {
        self.div(Dd::new(b))
    }

    pub fn ldexp(self, e: i32) -> Self {
        let s = 2f64.powi(e);
        Dd {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    /// e^x by halving reduction and Taylor series.
    pub fn exp(self) -> Self {
        if self.hi == 0.0 {
            return Dd::ONE;
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2.mul_f64(k);
        // exp(r) = exp(r / 2^5)^(2^5)
        let r = r.ldexp(-5);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for i in 1..=20 {
            term = (term * r).div_f64(i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..5 {
            sum = sum * sum;
        }
        sum.ldexp(k as i32)
    }

    /// Natural log of a positive number: one Newton step on exp.
    #[cfg(test)]
    pub fn ln(self) -> Self {
        let y0 = Dd::new(self.hi.ln());
        y0 + self * (-y0).exp() - Dd::ONE
    }

    /// (sin x, cos x) for |x| <= pi.
    pub fn sin_cos(self) -> (Self, Self) {
        let q = (self.hi / FRAC_PI_2.hi).round();
        let r = self - FRAC_PI_2.mul_f64(q);
        let r2 = r * r;
        let mut s = r;
        let mut c = Dd::ONE;
        let mut ts = r;
        let mut tc = Dd::ONE;
        for i in 1..=14 {
            let i = i as f64;
            ts = (ts * r2).div_f64(-(2.0 * i) * (2.0 * i + 1.0));
            tc = (tc * r2).div_f64(-(2.0 * i - 1.0) * (2.0 * i));
            s = s + ts;
            c = c + tc;
        }
        match (q as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let e = e + t;
        let (s, e) = quick_two_sum(s, e);
        let e = e + f;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

/// Complex double-double.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cdd {
    pub re: Dd,
    pub im: Dd,
}

impl Cdd {
    pub const ZERO: Cdd = Cdd {
        re: Dd::ZERO,
        im: Dd::ZERO,
    };
    pub const ONE: Cdd = Cdd {
        re: Dd::ONE,
        im: Dd::ZERO,
    };

    pub fn new(re: Dd, im: Dd) -> Self {
        Cdd { re, im }
    }

    pub fn from_c64(z: Complex64) -> Self {
        Cdd {
            re: Dd::new(z.re),
            im: Dd::new(z.im),
        }
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn norm1(self) -> f64 {
        self.re.hi.abs() + self.im.hi.abs()
    }

    pub fn scale(self, s: Dd) -> Self {
        Cdd {
            re: self.re * s,
            im: self.im * s,
        }
    }

    pub fn scale_f64(self, s: f64) -> Self {
        Cdd {
            re: self.re.mul_f64(s),
            im: self.im.mul_f64(s),
        }
    }

    pub fn div_f64(self, s: f64) -> Self {
        Cdd {
            re: self.re.div_f64(s),
            im: self.im.div_f64(s),
        }
    }

    pub fn mul_i(self) -> Self {
        Cdd {
            re: -self.im,
            im: self.re,
        }
    }

    pub fn recip(self) -> Self {
        let d = self.re * self.re + self.im * self.im;
        Cdd {
            re: self.re.div(d),
            im: (-self.im).div(d),
        }
    }

    /// Principal complex logarithm, refined from the f64 value by one
    /// Newton step on exp.
    pub fn ln(self) -> Self {
        let w0 = self.to_c64().ln();
        let mag = Dd::new(-w0.re).exp();
        let (s, c) = Dd::new(w0.im).sin_cos();
        // z * exp(-w0) - 1
        let e = Cdd::new(c * mag, -(s * mag));
        let r = self * e - Cdd::ONE;
        Cdd::from_c64(w0) + r
    }
}

impl Add for Cdd {
    type Output = Cdd;
    #[inline]
    fn add(self, b: Cdd) -> Cdd {
        Cdd {
            re: self.re + b.re,
            im: self.im + b.im,
        }
    }
}

impl Sub for Cdd {
    type Output = Cdd;
    #[inline]
    fn sub(self, b: Cdd) -> Cdd {
        Cdd {
            re: self.re - b.re,
            im: self.im - b.im,
        }
    }
}

impl Neg for Cdd {
    type Output = Cdd;
    fn neg(self) -> Cdd {
        Cdd {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Mul for Cdd {
    type Output = Cdd;
    #[inline]
    fn mul(self, b: Cdd) -> Cdd {
        Cdd {
            re: self.re * b.re - self.im * b.im,
            im: self.re * b.im + self.im * b.re,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_ln_roundtrip() {
        for &x in &[0.3, 1.0, 2.5, 17.0, 1e-3] {
            let d = Dd::new(x);
            let back = d.ln().exp();
            let err = ((back - d).to_f64() / x).abs();
            assert!(err < 1e-30, "{x} {err}");
        }
        let e = Dd::ONE.exp();
        assert_eq!(e.hi, std::f64::consts::E);
        assert!((e.lo - 1.4456468917292502e-16).abs() < 2e-30);
    }

    #[test]
    fn sin_cos_identity() {
        for &x in &[0.1, 1.2, -2.9, 3.1] {
            let (s, c) = Dd::new(x).sin_cos();
            let one = s * s + c * c;
            assert!((one - Dd::ONE).to_f64().abs() < 1e-31);
            assert!((s.to_f64() - x.sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn complex_ln() {
        let z = Cdd::from_c64(Complex64::new(-3.0, 0.25));
        let w = z.ln();
        let w64 = Complex64::new(-3.0, 0.25).ln();
        assert!((w.to_c64() - w64).norm() < 1e-15);
        // exp(w) == z at double-double level
        let mag = w.re.exp();
        let (s, c) = w.im.sin_cos();
        let back = Cdd::new(c * mag, s * mag);
        assert!((back - z).norm1() < 1e-30, "{}", (back - z).norm1());
    }
}
