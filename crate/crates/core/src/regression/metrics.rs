use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse_ah: f64,
    pub rmspe_pct: f64,
    pub mape_pct: f64,
    pub n: usize,
}

fn check(y_hat: &[f64], y: &[f64]) -> Result<()> {
    if y_hat.len() != y.len() {
        return Err(Error::LengthMismatch(format!("{} estimates for {} labels", y_hat.len(), y.len())));
    }
    if y.is_empty() {
        return Err(Error::InvalidParameter("no observations".into()));
    }
    if let Some(k) = y.iter().position(|v| *v == 0.0) {
        return Err(Error::ZeroLabel(k));
    }
    if y.iter().chain(y_hat).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input".into()));
    }
    Ok(())
}

/// RMSE in Ah; RMSPE and MAPE in percent of the true value.
pub fn metrics(y_hat: &[f64], y: &[f64]) -> Result<MetricsReport> {
    check(y_hat, y)?;
    let n = y.len() as f64;
    let mut se = 0.0;
    let mut spe = 0.0;
    let mut ape = 0.0;
    for (p, t) in y_hat.iter().zip(y) {
        let e = p - t;
        se += e * e;
        spe += (e / t).powi(2);
        ape += (e / t).abs();
    }
    Ok(MetricsReport {
        rmse_ah: (se / n).sqrt(),
        rmspe_pct: (spe / n).sqrt() * 100.0,
        mape_pct: ape / n * 100.0,
        n: y.len(),
    })
}

/// Linear-interpolation percentile (`q` in [0, 1]) of unsorted values.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcepeReport {
    /// Signed `100·(ŷ − y)/y` per observation.
    pub values_pct: Vec<f64>,
    pub p10_pct: f64,
    pub p90_pct: f64,
    pub max_abs_pct: f64,
}

pub fn pcepe(y_hat: &[f64], y: &[f64]) -> Result<PcepeReport> {
    check(y_hat, y)?;
    let values_pct: Vec<f64> = y_hat.iter().zip(y).map(|(p, t)| 100.0 * (p - t) / t).collect();
    Ok(PcepeReport {
        p10_pct: percentile(&values_pct, 0.1),
        p90_pct: percentile(&values_pct, 0.9),
        max_abs_pct: values_pct.iter().fold(0.0, |m, v| m.max(v.abs())),
        values_pct,
    })
}
