//! Elastic-net capacity model fitted by cyclic coordinate descent.
//!
//! The objective is
//! `(1/2M)·‖y − b − Zw‖² + λ·(α‖w‖₁ + (1−α)/2·‖w‖²)`
//! over standardized features `Z`. The intercept is the training-label mean.

mod artifact;
mod cv;
mod metrics;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use artifact::{load_model, model_from_json, model_to_json, save_model, SCHEMA_VERSION};
pub use cv::{grid_search, grouped_kfold, log_space, write_cv_table, CvRow, GridConfig, GridResult};
pub use metrics::{metrics, pcepe, percentile, MetricsReport, PcepeReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations, all strictly positive.
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>], names: &[String]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidParameter("no rows to standardize".into()));
        }
        let p = names.len();
        let mut means = vec![0.0; p];
        let mut stds = vec![0.0; p];
        for j in 0..p {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / m as f64;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / m as f64;
            let std = var.sqrt();
            if !(std > 0.0) || std < 1e-12 * mean.abs() {
                return Err(Error::ZeroVariance(names[j].clone()));
            }
            means[j] = mean;
            stds[j] = std;
        }
        Ok(Self { means, stds })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnrParams {
    pub lambda: f64,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EnrParams {
    fn default() -> Self {
        Self { lambda: 1e-3, alpha: 0.5, tol: 1e-8, max_iter: 10_000 }
    }
}

impl EnrParams {
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda = {} must be finite and ≥ 0", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha = {} must lie in [0, 1]", self.alpha)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter("tol must be positive and max_iter at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrModel {
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    /// Coefficients in standardized space.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub alpha: f64,
}

impl EnrModel {
    /// Prediction for one raw feature row in `feature_names` order.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.weights.len() {
            return Err(Error::LengthMismatch(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.weights.len()
            )));
        }
        let z = self.standardizer.transform(row);
        Ok(self.intercept + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }

    /// Prediction for a feature vector, looked up by name.
    pub fn enr_predict(&self, x: &crate::features::FeatureVector) -> Result<f64> {
        let row: Vec<f64> = self.feature_names.iter().map(|n| x.get(n)).collect::<Result<_>>()?;
        self.predict_row(&row)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrFit {
    pub model: EnrModel,
    /// Full coordinate sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Training residuals `y − ŷ`.
    pub residuals: Vec<f64>,
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn objective(residual: &[f64], w: &[f64], lambda: f64, alpha: f64) -> f64 {
    let m = residual.len() as f64;
    let loss = residual.iter().map(|r| r * r).sum::<f64>() / (2.0 * m);
    let l1 = w.iter().map(|v| v.abs()).sum::<f64>();
    let l2 = w.iter().map(|v| v * v).sum::<f64>();
    loss + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2)
}

fn check_inputs(rows: &[Vec<f64>], y: &[f64], names: &[String]) -> Result<()> {
    if rows.len() != y.len() {
        return Err(Error::LengthMismatch(format!("{} rows for {} labels", rows.len(), y.len())));
    }
    if rows.len() < 2 {
        return Err(Error::InvalidParameter("elastic net needs at least 2 rows".into()));
    }
    if names.is_empty() {
        return Err(Error::InvalidParameter("no features".into()));
    }
    if let Some(k) = rows.iter().position(|r| r.len() != names.len()) {
        return Err(Error::LengthMismatch(format!("row {k} has {} values for {} features", rows[k].len(), names.len())));
    }
    if rows.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("elastic net training data".into()));
    }
    Ok(())
}

/// Fits the elastic net on raw rows. Convergence is declared when the
/// largest coefficient change in a sweep drops below `params.tol`.
pub fn enr_fit(rows: &[Vec<f64>], y: &[f64], names: &[String], params: &EnrParams) -> Result<EnrFit> {
    params.validate()?;
    check_inputs(rows, y, names)?;
    let standardizer = Standardizer::fit(rows, names)?;
    let m = rows.len();
    let p = names.len();
    let mf = m as f64;

    // Column-major standardized design.
    let z: Vec<Vec<f64>> = (0..p)
        .map(|j| rows.iter().map(|r| (r[j] - standardizer.means[j]) / standardizer.stds[j]).collect())
        .collect();
    let norms: Vec<f64> = z.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / mf).collect();
    let intercept = y.iter().sum::<f64>() / mf;
    let mut residual: Vec<f64> = y.iter().map(|v| v - intercept).collect();
    let mut w = vec![0.0; p];
    let (l1, l2) = (params.lambda * params.alpha, params.lambda * (1.0 - params.alpha));

    let mut converged = false;
    let mut iterations = 0;
    let mut last_obj = objective(&residual, &w, params.lambda, params.alpha);
    while iterations < params.max_iter {
        iterations += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            let rho = z[j].iter().zip(&residual).map(|(a, b)| a * b).sum::<f64>() / mf + norms[j] * w[j];
            let new = soft_threshold(rho, l1) / (norms[j] + l2);
            let delta = new - w[j];
            if delta != 0.0 {
                for (r, zj) in residual.iter_mut().zip(&z[j]) {
                    *r -= zj * delta;
                }
                w[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if cfg!(debug_assertions) {
            let obj = objective(&residual, &w, params.lambda, params.alpha);
            debug_assert!(obj <= last_obj + 1e-10 * last_obj.abs().max(1.0), "objective rose {last_obj} -> {obj}");
            last_obj = obj;
        }
        if max_change < params.tol {
            converged = true;
            break;
        }
    }

    let model = EnrModel {
        feature_names: names.to_vec(),
        standardizer,
        weights: w,
        intercept,
        lambda: params.lambda,
        alpha: params.alpha,
    };
    let residuals = y.iter().zip(model.predict(rows)?).map(|(t, p)| t - p).collect();
    Ok(EnrFit { model, iterations, converged, residuals })
}

/// Largest violation of the elastic-net optimality conditions for `model`
/// on its training data. Zero weights need `|zᵀr/M| ≤ λα`; nonzero weights
/// need the gradient including the L1 subgradient to vanish.
pub fn kkt_violation(model: &EnrModel, rows: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let pred = model.predict(rows)?;
    let residual: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
    let mf = rows.len() as f64;
    let (l1, l2) = (model.lambda * model.alpha, model.lambda * (1.0 - model.alpha));
    let mut worst = 0.0f64;
    for (j, &wj) in model.weights.iter().enumerate() {
        let corr = rows
            .iter()
            .zip(&residual)
            .map(|(r, e)| (r[j] - model.standardizer.means[j]) / model.standardizer.stds[j] * e)
            .sum::<f64>()
            / mf;
        let v = if wj == 0.0 {
            (corr.abs() - l1).max(0.0)
        } else {
            (-corr + l2 * wj + l1 * wj.signum()).abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|k| format!("x{k}")).collect()
    }

    #[test]
    fn huge_lambda_shrinks_to_the_mean() {
        let rows: Vec<Vec<f64>> = (0..10).map(|k| vec![k as f64, (k * k) as f64]).collect();
        let y: Vec<f64> = (0..10).map(|k| 3.0 + k as f64).collect();
        let fit = enr_fit(&rows, &y, &names(2), &EnrParams { lambda: 1e6, ..Default::default() }).unwrap();
        assert!(fit.model.weights.iter().all(|w| *w == 0.0));
        assert_eq!(fit.model.intercept, 7.5);
        assert_eq!(fit.model.predict_row(&[100.0, -3.0]).unwrap(), 7.5);
    }

    #[test]
    fn zero_variance_feature_is_rejected() {
        let rows: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64, 2.0]).collect();
        let y = vec![1.0; 5];
        assert!(matches!(enr_fit(&rows, &y, &names(2), &EnrParams::default()), Err(Error::ZeroVariance(n)) if n == "x1"));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let rows = vec![vec![1.0], vec![f64::NAN], vec![3.0]];
        assert!(matches!(enr_fit(&rows, &[1.0, 2.0, 3.0], &names(1), &EnrParams::default()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn training_mean_predicts_intercept() {
        let rows: Vec<Vec<f64>> = (0..8).map(|k| vec![k as f64, (k % 3) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] - r[1] + 1.0).collect();
        let fit = enr_fit(&rows, &y, &names(2), &EnrParams::default()).unwrap();
        let mean = fit.model.standardizer.means.clone();
        assert!((fit.model.predict_row(&mean).unwrap() - fit.model.intercept).abs() < 1e-12);
        assert!(fit.converged);
        assert!(kkt_violation(&fit.model, &rows, &y).unwrap() < 1e-6);
    }

    #[test]
    fn lasso_zeroes_an_irrelevant_feature() {
        let rows: Vec<Vec<f64>> = (0..20).map(|k| vec![k as f64, ((k * 7) % 5) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let fit = enr_fit(&rows, &y, &names(2), &EnrParams { lambda: 0.5, alpha: 1.0, ..Default::default() }).unwrap();
        assert_eq!(fit.model.weights[1], 0.0);
        assert!(kkt_violation(&fit.model, &rows, &y).unwrap() < 1e-7);
    }
}
