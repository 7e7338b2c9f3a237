//! Power-law fits on log-log axes.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `log(err)`.
    pub residual: f64,
    /// 95% confidence half-width of the slope.
    pub half_width: f64,
}

impl RateFit {
    pub fn slope_within(&self, lo: f64, hi: f64) -> bool {
        (lo..=hi).contains(&self.slope)
    }
}

/// Least squares of `log err` against `log x`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(x, e)) = points.iter().find(|(x, e)| !(*x > 0.0 && *e > 0.0 && x.is_finite() && e.is_finite())) {
        return Err(Error::InvalidInput(format!("rate fit needs positive values, got ({x}, {e})")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, e)| (x.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("rate fit needs at least two distinct abscissae".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let dof = n - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let quantile = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(RateFit {
        points: points.to_vec(),
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        half_width: quantile * se,
    })
}
