//! End-to-end orchestration: configuration, in-memory stages, and the file
//! commands behind the command-line tool.
//!
//! Output layout under the output directory:
//!
//! ```text
//! telemetry/<cell>/{aging,c20,hppc}.csv   telemetry/ground_truth.csv
//! snapshots.csv  ranking.csv  model.json  cv_table.csv
//! metrics_train.json  metrics_test.json  pcepe.csv  pcepe_summary.json
//! adaptive/trace_<cell>.csv  adaptive/summary.json
//! ```

mod commands;
mod config;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adaptive::{build_bank, run_stream, TraceRow};
use crate::error::{Error, Result};
use crate::features::{build_snapshots, feature_matrix, LabeledSnapshot, FEATURE_NAMES};
use crate::regression::{enr_fit, grid_search, metrics, pcepe, EnrFit, EnrParams, GridResult, MetricsReport};
use crate::selection::{mrmr_rank, select_top_k, RankedFeature};
use crate::sim::SimulatedCell;

pub use commands::{
    cmd_adaptive, cmd_evaluate, cmd_extract, cmd_rank, cmd_simulate, cmd_train, cmd_validate, run_all, Layout,
    GROUND_TRUTH_HEADER, PCEPE_HEADER,
};
pub use config::{ExtractConfig, PipelineConfig, RankConfig, SplitConfig};
pub use validate::{validate_outputs, FileCheck, ValidationReport};

/// Snapshots of every cell, in cell order.
pub fn extract_all(cells: &[SimulatedCell], cfg: &ExtractConfig) -> Result<Vec<LabeledSnapshot>> {
    let mut out = Vec::new();
    for cell in cells {
        let ds = cell.dataset(&cfg.ingest)?;
        out.extend(build_snapshots(&ds, &cfg.align)?);
    }
    Ok(out)
}

pub fn rows_of<'a>(snapshots: &'a [LabeledSnapshot], cells: &[String]) -> Vec<&'a LabeledSnapshot> {
    snapshots.iter().filter(|s| cells.contains(&s.cell_id)).collect()
}

fn owned(rows: Vec<&LabeledSnapshot>) -> Vec<LabeledSnapshot> {
    rows.into_iter().cloned().collect()
}

/// mRMR ranking of all six features on the training cells.
pub fn rank_stage(snapshots: &[LabeledSnapshot], cfg: &PipelineConfig) -> Result<Vec<RankedFeature>> {
    let train = owned(rows_of(snapshots, &cfg.split.train_cells));
    let names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let matrix = feature_matrix(&train, &names)?;
    let columns: Vec<Vec<f64>> = (0..names.len()).map(|j| matrix.iter().map(|r| r[j]).collect()).collect();
    let labels: Vec<f64> = train.iter().map(|s| s.label_q_ch_c20_ah).collect();
    mrmr_rank(&names, &columns, &labels, &cfg.rank.mi_config())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub grid: GridResult,
    pub fit: EnrFit,
}

/// Grid search on the training cells, then a final fit on all of them.
pub fn train_stage(snapshots: &[LabeledSnapshot], ranking: &[RankedFeature], cfg: &PipelineConfig) -> Result<TrainOutcome> {
    let names = select_top_k(ranking, cfg.rank.top_k)?;
    let train = owned(rows_of(snapshots, &cfg.split.train_cells));
    let rows = feature_matrix(&train, &names)?;
    let y: Vec<f64> = train.iter().map(|s| s.label_q_ch_c20_ah).collect();
    let ids: Vec<String> = train.iter().map(|s| s.cell_id.clone()).collect();
    let grid = grid_search(&rows, &y, &ids, &names, &cfg.train, cfg.seed)?;
    let params = EnrParams { lambda: grid.lambda, alpha: grid.alpha, tol: cfg.train.tol, max_iter: cfg.train.max_iter };
    let fit = enr_fit(&rows, &y, &names, &params)?;
    Ok(TrainOutcome { grid, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub cell_id: String,
    pub cycle_index: usize,
    pub split: String,
    pub label_ah: f64,
    pub estimate_ah: f64,
    pub pcepe_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcepeSummary {
    pub n: usize,
    pub p10_pct: f64,
    pub p90_pct: f64,
    pub max_abs_pct: f64,
    /// Largest |PCEPE| per cell.
    pub max_abs_by_cell_pct: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub train: MetricsReport,
    pub test: MetricsReport,
    pub rows: Vec<PredictionRow>,
    pub pcepe_train: PcepeSummary,
    pub pcepe_test: PcepeSummary,
}

fn evaluate_split(
    model: &crate::regression::EnrModel,
    snapshots: &[&LabeledSnapshot],
    split: &str,
) -> Result<(MetricsReport, PcepeSummary, Vec<PredictionRow>)> {
    if snapshots.is_empty() {
        return Err(Error::InvalidParameter(format!("no {split} snapshots to evaluate")));
    }
    let y: Vec<f64> = snapshots.iter().map(|s| s.label_q_ch_c20_ah).collect();
    let y_hat: Vec<f64> = snapshots.iter().map(|s| model.enr_predict(&s.features)).collect::<Result<_>>()?;
    let report = metrics(&y_hat, &y)?;
    let pe = pcepe(&y_hat, &y)?;
    let mut by_cell: BTreeMap<String, f64> = BTreeMap::new();
    let rows: Vec<PredictionRow> = snapshots
        .iter()
        .zip(y_hat.iter().zip(&pe.values_pct))
        .map(|(s, (&estimate_ah, &pcepe_pct))| {
            let m = by_cell.entry(s.cell_id.clone()).or_insert(0.0);
            *m = m.max(pcepe_pct.abs());
            PredictionRow {
                cell_id: s.cell_id.clone(),
                cycle_index: s.cycle_index,
                split: split.to_string(),
                label_ah: s.label_q_ch_c20_ah,
                estimate_ah,
                pcepe_pct,
            }
        })
        .collect();
    let summary = PcepeSummary {
        n: rows.len(),
        p10_pct: pe.p10_pct,
        p90_pct: pe.p90_pct,
        max_abs_pct: pe.max_abs_pct,
        max_abs_by_cell_pct: by_cell,
    };
    Ok((report, summary, rows))
}

pub fn evaluate_stage(
    model: &crate::regression::EnrModel,
    snapshots: &[LabeledSnapshot],
    cfg: &PipelineConfig,
) -> Result<Evaluation> {
    let (train, pcepe_train, mut rows) = evaluate_split(model, &rows_of(snapshots, &cfg.split.train_cells), "train")?;
    let (test, pcepe_test, test_rows) = evaluate_split(model, &rows_of(snapshots, &cfg.split.test_cells), "test")?;
    rows.extend(test_rows);
    Ok(Evaluation { train, test, rows, pcepe_train, pcepe_test })
}

/// Adaptive traces for each test cell, keyed by cell id.
pub fn adaptive_stage(
    model: &crate::regression::EnrModel,
    snapshots: &[LabeledSnapshot],
    cfg: &PipelineConfig,
) -> Result<BTreeMap<String, Vec<TraceRow>>> {
    let train = owned(rows_of(snapshots, &cfg.split.train_cells));
    let bank = build_bank(&train, model, &cfg.adaptive, cfg.seed)?;
    let mut out = BTreeMap::new();
    for cell in &cfg.split.test_cells {
        let stream = owned(rows_of(snapshots, std::slice::from_ref(cell)));
        if stream.is_empty() {
            return Err(Error::InvalidParameter(format!("test cell {cell} has no snapshots")));
        }
        out.insert(cell.clone(), run_stream(&stream, model, &bank, &cfg.adaptive)?);
    }
    Ok(out)
}
