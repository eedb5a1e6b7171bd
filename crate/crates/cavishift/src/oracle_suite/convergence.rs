//! Prediction-vs-oracle sweeps over the particle size with a log-log fit.

use super::OracleError;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

/// Errors at or below this are treated as exact agreement.
pub const FLAT_ERROR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub delta: f64,
    pub predicted: Complex64,
    pub oracle: Complex64,
    pub error: f64,
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in natural-log units.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// `None` when every error is at or below [`FLAT_ERROR`].
    pub fit: Option<LogLogFit>,
}

#[derive(Debug, Error)]
pub enum ConvergenceError {
    #[error("need at least 4 geometrically spaced delta values: {0}")]
    BadDeltas(String),
    #[error("oracle failed at delta = {delta}: {source}")]
    Oracle {
        delta: f64,
        /// Rows for the deltas processed before the failure.
        partial: ConvergenceTable,
        source: OracleError,
    },
}

/// Least-squares line through `(ln x, ln y)`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Option<LogLogFit> {
    if x.len() < 2 || x.len() != y.len() || y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Some(LogLogFit { slope, intercept, residual })
}

fn check_deltas(deltas: &[f64]) -> Result<(), ConvergenceError> {
    if deltas.len() < 4 {
        return Err(ConvergenceError::BadDeltas(format!("{} given", deltas.len())));
    }
    if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(ConvergenceError::BadDeltas("values must be positive".into()));
    }
    // ratios within a factor 2 of their geometric mean
    let ratios: Vec<f64> = deltas.windows(2).map(|w| w[1] / w[0]).collect();
    let mean = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
    if (mean - 1.0).abs() < 1e-12 || ratios.iter().any(|r| (r / mean).ln().abs() > 2f64.ln()) {
        return Err(ConvergenceError::BadDeltas(format!("ratios {ratios:?} are not geometric")));
    }
    Ok(())
}

/// Runs `prediction(delta)` and `oracle(delta)` for every delta (in
/// parallel, collected in input order) and fits `ln error` against `ln delta`.
pub fn convergence_study<P, O>(prediction: P, oracle: O, deltas: &[f64]) -> Result<ConvergenceTable, ConvergenceError>
where
    P: Fn(f64) -> Complex64 + Sync,
    O: Fn(f64) -> Result<Complex64, OracleError> + Sync,
{
    check_deltas(deltas)?;
    let results: Vec<(f64, Complex64, Result<Complex64, OracleError>)> = deltas
        .par_iter()
        .map(|&d| (d, prediction(d), oracle(d)))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for (delta, predicted, oracle) in results {
        match oracle {
            Ok(oracle) => {
                let error = (predicted - oracle).norm();
                rows.push(ConvergenceRow {
                    delta,
                    predicted,
                    oracle,
                    error,
                    relative: error / oracle.norm(),
                });
            }
            Err(source) => {
                let fit = fit_rows(&rows);
                return Err(ConvergenceError::Oracle {
                    delta,
                    partial: ConvergenceTable { rows, fit },
                    source,
                });
            }
        }
    }
    let fit = fit_rows(&rows);
    Ok(ConvergenceTable { rows, fit })
}

fn fit_rows(rows: &[ConvergenceRow]) -> Option<LogLogFit> {
    if rows.iter().all(|r| r.error <= FLAT_ERROR) {
        return None;
    }
    let x: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.error.max(FLAT_ERROR)).collect();
    log_log_fit(&x, &y)
}

impl ConvergenceTable {
    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.error).fold(0.0, f64::max)
    }

    pub fn row(&self, delta: f64) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| (r.delta - delta).abs() <= 1e-12 * delta)
    }

    /// CSV with a header line; 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,re_shift,im_shift,oracle_re_shift,oracle_im_shift,relative_error\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.delta, r.predicted.re, r.predicted.im, r.oracle.re, r.oracle.im, r.relative
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DELTAS: [f64; 5] = [0.05, 0.035, 0.02, 0.014, 0.01];

    #[test]
    fn identical_closures_are_flat() {
        let f = |d: f64| Complex64::new(d * d, -0.3 * d * d);
        let t = convergence_study(f, |d| Ok(f(d)), &DELTAS).unwrap();
        assert!(t.fit.is_none());
        assert!(t.max_error() <= 1e-12);
    }

    #[test]
    fn planted_power_law() {
        let t = convergence_study(
            |d| Complex64::new(d * d, 0.0),
            |d| Ok(Complex64::new(d * d + 3.0 * d.powf(2.5), 0.0)),
            &DELTAS,
        )
        .unwrap();
        let fit = t.fit.clone().unwrap();
        assert!((fit.slope - 2.5).abs() < 1e-12 && fit.residual < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert_eq!(t.to_csv().lines().count(), 6);
    }

    #[test]
    fn failure_keeps_partial_rows() {
        let err = convergence_study(
            |d| Complex64::new(d, 0.0),
            |d| {
                if d < 0.015 {
                    Err(OracleError::Numerical("no root".into()))
                } else {
                    Ok(Complex64::new(2.0 * d, 0.0))
                }
            },
            &DELTAS,
        )
        .unwrap_err();
        match err {
            ConvergenceError::Oracle { delta, partial, .. } => {
                assert_eq!(delta, 0.014);
                assert_eq!(partial.rows.len(), 3);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn rejects_short_or_irregular_lists() {
        let f = |d: f64| Complex64::new(d, 0.0);
        assert!(convergence_study(f, |d| Ok(f(d)), &[0.1, 0.05, 0.025]).is_err());
        assert!(convergence_study(f, |d| Ok(f(d)), &[0.1, 0.09, 0.01, 0.009]).is_err());
    }
}
