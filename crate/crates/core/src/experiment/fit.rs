use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub sse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    /// R ≈ slope·ln T + intercept
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// R(T_max)/ln T_max
    pub ratio: f64,
    /// R ≈ slope·T + intercept, for comparison
    pub linear: LineFit,
    /// The linear model leaves smaller residuals than the log model.
    pub super_log: bool,
}

/// Least squares y ≈ a·x + b. A flat series has r² = 1.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("abscissae are not distinct".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let sst: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    Ok(LineFit { slope, intercept, r2, sse })
}

pub fn fit_log_curve(points: &[(f64, f64)]) -> Result<LogFit> {
    if points.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {}", points.len())));
    }
    if points.iter().any(|&(t, r)| !(t > 0.0 && t.is_finite() && r.is_finite())) {
        return Err(Error::Fit("horizons must be positive and regrets finite".into()));
    }
    let mut ts: Vec<f64> = points.iter().map(|p| p.0).collect();
    ts.sort_by(f64::total_cmp);
    if ts.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Fit("horizons are not distinct".into()));
    }
    let t: Vec<f64> = points.iter().map(|p| p.0).collect();
    let r: Vec<f64> = points.iter().map(|p| p.1).collect();
    let lt: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    let log = fit_line(&lt, &r)?;
    let linear = fit_line(&t, &r)?;
    let last = points.iter().copied().max_by(|a, b| a.0.total_cmp(&b.0)).expect("nonempty");
    Ok(LogFit {
        slope: log.slope,
        intercept: log.intercept,
        r2: log.r2,
        ratio: last.1 / last.0.ln(),
        linear,
        super_log: linear.sse < log.sse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TS: [f64; 5] = [500.0, 1000.0, 2000.0, 4000.0, 8000.0];

    #[test]
    fn exact_log_series() {
        let pts: Vec<_> = TS.iter().map(|&t| (t, 3.0 * t.ln() + 1.0)).collect();
        let f = fit_log_curve(&pts).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-10);
        assert!((f.intercept - 1.0).abs() < 1e-9);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(!f.super_log);
        assert!((f.ratio - (3.0 + 1.0 / 8000f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn flat_series() {
        let pts: Vec<_> = TS.iter().map(|&t| (t, 4.0)).collect();
        let f = fit_log_curve(&pts).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.r2, 1.0);
    }

    #[test]
    fn linear_series_is_flagged() {
        let pts: Vec<_> = TS.iter().map(|&t| (t, t)).collect();
        let f = fit_log_curve(&pts).unwrap();
        assert!(f.super_log);
        // frozen: r² of ln T against T on the doubling grid 500..8000
        assert!((f.r2 - 0.870967741935484).abs() < 1e-12, "{}", f.r2);
        assert!((f.linear.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(fit_log_curve(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]), Err(Error::Fit(_))));
        assert!(matches!(fit_log_curve(&[(5.0, 1.0), (5.0, 2.0), (6.0, 3.0), (7.0, 1.0)]), Err(Error::Fit(_))));
        assert!(matches!(fit_log_curve(&[(0.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 1.0)]), Err(Error::Fit(_))));
        assert!(matches!(fit_log_curve(&[(1.0, f64::NAN), (2.0, 2.0), (3.0, 3.0), (4.0, 1.0)]), Err(Error::Fit(_))));
    }
}
