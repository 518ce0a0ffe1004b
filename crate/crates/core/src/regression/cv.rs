use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{enr_fit, metrics, EnrParams};
use crate::error::{Error, Result};

/// Partitions the distinct cells into `k` folds whose sizes differ by at
/// most one. Cells are shuffled with a seeded RNG and dealt round-robin.
pub fn grouped_kfold(cell_ids: &[String], k: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    let mut cells: Vec<String> = cell_ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if k < 2 || cells.len() < k {
        return Err(Error::InvalidParameter(format!("{} distinct cells cannot form {k} folds (k ≥ 2)", cells.len())));
    }
    cells.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, c) in cells.into_iter().enumerate() {
        folds[i % k].push(c);
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(folds)
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub folds: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lambdas: log_space(1e-4, 1e1, 11),
            alphas: vec![0.1, 0.5, 0.9],
            folds: 5,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub alpha: f64,
    pub mean_rmse_ah: f64,
    pub fold_rmse_ah: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub lambda: f64,
    pub alpha: f64,
    pub table: Vec<CvRow>,
    pub folds: Vec<Vec<String>>,
}

fn better(candidate: &CvRow, best: &CvRow) -> bool {
    let (a, b) = (candidate.mean_rmse_ah, best.mean_rmse_ah);
    if (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) {
        (candidate.lambda, candidate.alpha) > (best.lambda, best.alpha)
    } else {
        a < b
    }
}

/// Grouped k-fold grid search over (lambda, alpha). Picks the minimum mean
/// validation RMSE; near-ties go to the larger lambda, then larger alpha.
pub fn grid_search(
    rows: &[Vec<f64>],
    y: &[f64],
    cell_ids: &[String],
    names: &[String],
    grid: &GridConfig,
    seed: u64,
) -> Result<GridResult> {
    if grid.lambdas.is_empty() || grid.alphas.is_empty() {
        return Err(Error::InvalidParameter("empty hyperparameter grid".into()));
    }
    if cell_ids.len() != rows.len() || y.len() != rows.len() {
        return Err(Error::LengthMismatch("rows, labels and cell ids must align".into()));
    }
    let folds = grouped_kfold(cell_ids, grid.folds, seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = folds
        .iter()
        .map(|fold| (0..rows.len()).partition(|&i| !fold.contains(&cell_ids[i])))
        .collect();
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (idx.iter().map(|&i| rows[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
    };

    let points: Vec<(f64, f64)> = grid
        .lambdas
        .iter()
        .flat_map(|&l| grid.alphas.iter().map(move |&a| (l, a)))
        .collect();
    let table: Vec<CvRow> = points
        .par_iter()
        .map(|&(lambda, alpha)| -> Result<CvRow> {
            let params = EnrParams { lambda, alpha, tol: grid.tol, max_iter: grid.max_iter };
            let fold_rmse_ah = splits
                .iter()
                .map(|(train, valid)| {
                    let (xt, yt) = pick(train);
                    let (xv, yv) = pick(valid);
                    let fit = enr_fit(&xt, &yt, names, &params)?;
                    Ok(metrics(&fit.model.predict(&xv)?, &yv)?.rmse_ah)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean_rmse_ah = fold_rmse_ah.iter().sum::<f64>() / fold_rmse_ah.len() as f64;
            Ok(CvRow { lambda, alpha, mean_rmse_ah, fold_rmse_ah })
        })
        .collect::<Result<_>>()?;

    let best = table
        .iter()
        .skip(1)
        .fold(&table[0], |best, row| if better(row, best) { row } else { best });
    Ok(GridResult { lambda: best.lambda, alpha: best.alpha, table: table.clone(), folds })
}

/// CSV with header `lambda,alpha,mean_rmse_ah,fold_1_rmse_ah,…`.
pub fn write_cv_table<W: Write>(table: &[CvRow], sink: W) -> Result<()> {
    let k = table.first().map_or(0, |r| r.fold_rmse_ah.len());
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    let mut header = vec!["lambda".to_string(), "alpha".into(), "mean_rmse_ah".into()];
    header.extend((1..=k).map(|i| format!("fold_{i}_rmse_ah")));
    w.write_record(&header)?;
    for row in table {
        let mut rec = vec![row.lambda.to_string(), row.alpha.to_string(), row.mean_rmse_ah.to_string()];
        rec.extend(row.fold_rmse_ah.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
