//! Arbitrary-precision reference values for `J_n`, `Y_n` and `H_n^(1)`.
//!
//! Ascending power series (plus the logarithmic series for `Y_n`) summed in
//! 320-bit binary floating point. The working precision leaves more than 60
//! decimal digits after the worst cancellation in the strip `|z| <= 50`,
//! `|Im z| <= 20`, so the returned values carry at least 30 correct digits.

use super::OracleError;
use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use num_complex::Complex64;

const PREC: usize = 320;
const RM: RoundingMode = RoundingMode::ToEven;
const EULER_GAMMA_DIGITS: &str =
    "0.57721566490153286060651209008240243104215933593992359880576723488486772677766467";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HpFunction {
    BesselJ(i32),
    BesselY(i32),
    Hankel1(i32),
}

/// Complex number with arbitrary-precision parts.
#[derive(Clone, Debug)]
pub struct HpComplex {
    pub re: BigFloat,
    pub im: BigFloat,
}

fn bf(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PREC)
}

fn bf_to_f64(x: &BigFloat, cc: &mut Consts) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    x.format(Radix::Dec, RM, cc)
        .ok()
        .and_then(|s| s.parse::<f64>().ok())
        .unwrap_or(f64::NAN)
}

impl HpComplex {
    fn zero() -> Self {
        HpComplex { re: bf(0.0), im: bf(0.0) }
    }

    fn real(x: BigFloat) -> Self {
        HpComplex { re: x, im: bf(0.0) }
    }

    fn from_c64(z: Complex64) -> Self {
        HpComplex { re: bf(z.re), im: bf(z.im) }
    }

    fn add(&self, b: &Self) -> Self {
        HpComplex {
            re: self.re.add(&b.re, PREC, RM),
            im: self.im.add(&b.im, PREC, RM),
        }
    }

    fn sub(&self, b: &Self) -> Self {
        HpComplex {
            re: self.re.sub(&b.re, PREC, RM),
            im: self.im.sub(&b.im, PREC, RM),
        }
    }

    fn mul(&self, b: &Self) -> Self {
        let rr = self.re.mul(&b.re, PREC, RM);
        let ii = self.im.mul(&b.im, PREC, RM);
        let ri = self.re.mul(&b.im, PREC, RM);
        let ir = self.im.mul(&b.re, PREC, RM);
        HpComplex {
            re: rr.sub(&ii, PREC, RM),
            im: ri.add(&ir, PREC, RM),
        }
    }

    fn scale(&self, s: &BigFloat) -> Self {
        HpComplex {
            re: self.re.mul(s, PREC, RM),
            im: self.im.mul(s, PREC, RM),
        }
    }

    fn div_real(&self, s: &BigFloat) -> Self {
        HpComplex {
            re: self.re.div(s, PREC, RM),
            im: self.im.div(s, PREC, RM),
        }
    }

    fn recip(&self) -> Self {
        let d = self
            .re
            .mul(&self.re, PREC, RM)
            .add(&self.im.mul(&self.im, PREC, RM), PREC, RM);
        HpComplex {
            re: self.re.div(&d, PREC, RM),
            im: self.im.neg().div(&d, PREC, RM),
        }
    }

    fn mul_i(&self) -> Self {
        HpComplex {
            re: self.im.neg(),
            im: self.re.clone(),
        }
    }

    /// Cheap magnitude estimate (|re| + |im| as f64), adequate for
    /// convergence tests.
    fn mag(&self, cc: &mut Consts) -> f64 {
        bf_to_f64(&self.re, cc).abs() + bf_to_f64(&self.im, cc).abs()
    }

    pub fn to_c64(&self) -> Complex64 {
        let mut cc = Consts::new().expect("constant cache");
        Complex64::new(bf_to_f64(&self.re, &mut cc), bf_to_f64(&self.im, &mut cc))
    }

    /// Decimal rendering of both parts with the full working precision.
    pub fn to_decimal_strings(&self) -> (String, String) {
        let mut cc = Consts::new().expect("constant cache");
        (
            self.re.format(Radix::Dec, RM, &mut cc).unwrap_or_default(),
            self.im.format(Radix::Dec, RM, &mut cc).unwrap_or_default(),
        )
    }
}

/// Principal logarithm of a nonzero complex number.
fn ln_complex(z: &HpComplex, cc: &mut Consts) -> HpComplex {
    let r2 = z.re.mul(&z.re, PREC, RM).add(&z.im.mul(&z.im, PREC, RM), PREC, RM);
    let ln_r = r2.ln(PREC, RM, cc).div(&bf(2.0), PREC, RM);
    let pi = cc.pi(PREC, RM);
    let x = bf_to_f64(&z.re, cc);
    let y = bf_to_f64(&z.im, cc);
    let arg = if x.abs() >= y.abs() {
        let t = z.im.div(&z.re, PREC, RM).atan(PREC, RM, cc);
        if x > 0.0 {
            t
        } else if y >= 0.0 {
            t.add(&pi, PREC, RM)
        } else {
            t.sub(&pi, PREC, RM)
        }
    } else {
        // arg = sign(y) * pi/2 - atan(x/y)
        let t = z.re.div(&z.im, PREC, RM).atan(PREC, RM, cc);
        let half_pi = pi.div(&bf(2.0), PREC, RM);
        if y > 0.0 {
            half_pi.sub(&t, PREC, RM)
        } else {
            half_pi.neg().sub(&t, PREC, RM)
        }
    };
    HpComplex { re: ln_r, im: arg }
}

fn check_strip(z: Complex64) -> Result<(), OracleError> {
    if !(z.norm() <= 60.0 && z.im.abs() <= 25.0) {
        return Err(OracleError::OutOfStrip(z));
    }
    Ok(())
}

/// Terms of the J_n series: `t_k = (z/2)^n q^k / (k! (n+k)!)`, q = -z^2/4.
/// Calls `visit(k, t_k)` until the terms are negligible.
fn series_terms(n: u32, z: &HpComplex, cc: &mut Consts, mut visit: impl FnMut(u32, &HpComplex)) {
    let half = bf(0.5);
    let h = z.scale(&half);
    let q = h.mul(&h).scale(&bf(-1.0));
    let mut t = HpComplex::real(bf(1.0));
    for k in 1..=n {
        t = h.mul(&t).div_real(&bf(k as f64));
    }
    let zabs = bf_to_f64(&z.re, cc).hypot(bf_to_f64(&z.im, cc));
    let mut peak = t.mag(cc).max(1e-300);
    visit(0, &t);
    for k in 1..2000u32 {
        t = t.mul(&q).div_real(&bf(k as f64 * (n + k) as f64));
        visit(k, &t);
        let m = t.mag(cc);
        peak = peak.max(m);
        // Past the peak, term ratios are < 1/2 so the tail is bounded by the
        // last term; stop once it is far below the working precision.
        if k as f64 > zabs && m < 1e-80 * peak {
            break;
        }
    }
}

fn bessel_j_hp(n: u32, z: &HpComplex, cc: &mut Consts) -> HpComplex {
    let mut sum = HpComplex::zero();
    series_terms(n, z, cc, |_, t| sum = sum.add(t));
    sum
}

fn bessel_y_hp(n: u32, z: &HpComplex, cc: &mut Consts) -> HpComplex {
    let pi = cc.pi(PREC, RM);
    let gamma = BigFloat::parse(EULER_GAMMA_DIGITS, Radix::Dec, PREC, RM, cc);
    let half = bf(0.5);
    let h = z.scale(&half);
    let ln_h = ln_complex(&h, cc);
    let jn = bessel_j_hp(n, z, cc);

    // Finite part: -(1/pi) sum_{k<n} (n-k-1)!/k! (z/2)^{2k-n}
    let mut finite = HpComplex::zero();
    if n > 0 {
        let h_inv = h.recip();
        let h2 = h.mul(&h);
        // start with k = 0: (n-1)! (z/2)^{-n}
        let mut fact = bf(1.0);
        for m in 1..n {
            fact = fact.mul(&bf(m as f64), PREC, RM);
        }
        let mut pw = HpComplex::real(bf(1.0));
        for _ in 0..n {
            pw = pw.mul(&h_inv);
        }
        let mut term = pw.scale(&fact);
        finite = finite.add(&term);
        for k in 1..n {
            // (n-k-1)!/k! = previous * 1/((n-k) k), power gains (z/2)^2
            term = term.mul(&h2).div_real(&bf(((n - k) * k) as f64));
            finite = finite.add(&term);
        }
    }

    // psi(m+1) = -gamma + H_m
    let harmonic = |m: u32| -> BigFloat {
        let mut s = bf(0.0);
        for j in 1..=m {
            s = s.add(&bf(1.0).div(&bf(j as f64), PREC, RM), PREC, RM);
        }
        s
    };
    let mut h_k = bf(0.0);
    let mut h_nk = harmonic(n);
    let two_gamma = gamma.mul(&bf(2.0), PREC, RM);
    let mut psi_sum = HpComplex::zero();
    series_terms(n, z, cc, |k, t| {
        if k > 0 {
            h_k = h_k.add(&bf(1.0).div(&bf(k as f64), PREC, RM), PREC, RM);
            h_nk = h_nk.add(&bf(1.0).div(&bf((n + k) as f64), PREC, RM), PREC, RM);
        }
        let coef = h_k.add(&h_nk, PREC, RM).sub(&two_gamma, PREC, RM);
        psi_sum = psi_sum.add(&t.scale(&coef));
    });

    let two = bf(2.0);
    let log_part = ln_h.mul(&jn).scale(&two);
    log_part.sub(&finite).sub(&psi_sum).div_real(&pi)
}

/// High-precision value of the requested cylinder function.
pub fn highprec_reference(f: HpFunction, z: Complex64) -> Result<HpComplex, OracleError> {
    check_strip(z)?;
    let mut cc = Consts::new().map_err(|_| OracleError::Numerical("constant cache".into()))?;
    let zh = HpComplex::from_c64(z);
    let (n, sign) = match f {
        HpFunction::BesselJ(n) | HpFunction::BesselY(n) | HpFunction::Hankel1(n) => {
            (n.unsigned_abs(), if n < 0 && n % 2 != 0 { -1.0 } else { 1.0 })
        }
    };
    let needs_y = !matches!(f, HpFunction::BesselJ(_));
    if needs_y && z == Complex64::new(0.0, 0.0) {
        return Err(OracleError::Numerical("Y_n is singular at z = 0".into()));
    }
    let val = match f {
        HpFunction::BesselJ(_) => bessel_j_hp(n, &zh, &mut cc),
        HpFunction::BesselY(_) => bessel_y_hp(n, &zh, &mut cc),
        HpFunction::Hankel1(_) => {
            let j = bessel_j_hp(n, &zh, &mut cc);
            let y = bessel_y_hp(n, &zh, &mut cc);
            j.add(&y.mul_i())
        }
    };
    Ok(val.scale(&bf(sign)))
}

/// Wronskian residual `J_n H_n' - J_n' H_n - 2i/(pi z)` in high precision,
/// returned as a magnitude relative to `|2/(pi z)|`.
pub fn wronskian_residual(n: i32, z: Complex64) -> Result<f64, OracleError> {
    let j = |m: i32| highprec_reference(HpFunction::BesselJ(m), z);
    let h = |m: i32| highprec_reference(HpFunction::Hankel1(m), z);
    let half = bf(0.5);
    let jn = j(n)?;
    let hn = h(n)?;
    let jd = j(n - 1)?.sub(&j(n + 1)?).scale(&half);
    let hd = h(n - 1)?.sub(&h(n + 1)?).scale(&half);
    let mut cc = Consts::new().map_err(|_| OracleError::Numerical("constant cache".into()))?;
    let pi = cc.pi(PREC, RM);
    let zh = HpComplex::from_c64(z);
    let expect = zh.recip().scale(&bf(2.0)).div_real(&pi).mul_i();
    let w = jn.mul(&hd).sub(&jd.mul(&hn));
    let diff = w.sub(&expect);
    // relative magnitude computed in big precision, then rounded
    let num = diff.re.mul(&diff.re, PREC, RM).add(&diff.im.mul(&diff.im, PREC, RM), PREC, RM);
    let den = expect
        .re
        .mul(&expect.re, PREC, RM)
        .add(&expect.im.mul(&expect.im, PREC, RM), PREC, RM);
    let ratio = num.div(&den, PREC, RM);
    Ok(bf_to_f64(&ratio, &mut cc).abs().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_at_zero_is_one() {
        let v = highprec_reference(HpFunction::BesselJ(0), Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(v.to_c64(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn j0_of_two_leading_digits() {
        let v = highprec_reference(HpFunction::BesselJ(0), Complex64::new(2.0, 0.0)).unwrap();
        let (re, _) = v.to_decimal_strings();
        assert!(re.starts_with("2.238907791412356680518274546499486258251544822186076031"), "{re}");
    }

    #[test]
    fn wronskian_at_three() {
        let r = wronskian_residual(0, Complex64::new(3.0, 0.0)).unwrap();
        assert!(r < 1e-25, "{r}");
        let r = wronskian_residual(2, Complex64::new(3.0, -1.5)).unwrap();
        assert!(r < 1e-25, "{r}");
    }

    #[test]
    fn rejects_out_of_strip() {
        assert!(highprec_reference(HpFunction::BesselJ(0), Complex64::new(0.0, 40.0)).is_err());
    }
}
