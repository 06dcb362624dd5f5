//! Least-squares slope of log-log data with a Student-t confidence interval.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least two points with positive values, got {0}")]
    TooFewPoints(usize),
    #[error("abscissae are all equal")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval; `None` with two points.
    pub ci95: Option<f64>,
}

/// Fits `log y = slope * log x + intercept`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<SlopeFit, FitError> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    linear_fit(&pts)
}

pub fn linear_fit(pts: &[(f64, f64)]) -> Result<SlopeFit, FitError> {
    let n = pts.len();
    if n < 2 {
        return Err(FitError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(FitError::Degenerate);
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ci95 = if n > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let se = (rss / (nf - 2.0) / sxx).sqrt();
        let q = StudentsT::new(0.0, 1.0, nf - 2.0)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::NAN);
        Some(q * se)
    } else {
        None
    };
    Ok(SlopeFit { slope, intercept, ci95 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x = [0.1, 0.05, 0.025, 0.0125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        let f = loglog_slope(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!(f.ci95.unwrap() < 1e-6);
    }

    #[test]
    fn degenerate() {
        assert_eq!(loglog_slope(&[0.1, 0.1], &[1.0, 2.0]).unwrap_err(), FitError::Degenerate);
        assert!(matches!(loglog_slope(&[0.1], &[1.0]), Err(FitError::TooFewPoints(1))));
    }
}
