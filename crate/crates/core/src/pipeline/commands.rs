use std::collections::BTreeMap;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::{adaptive_stage, evaluate_stage, rank_stage, rows_of, train_stage, PipelineConfig, PredictionRow};
use crate::adaptive::write_trace_csv;
use crate::data::{parse_timeseries_csv, write_timeseries_csv, CellDataset};
use crate::error::{Error, Result};
use crate::features::{build_snapshots, read_snapshots_csv, write_snapshots_csv, LabeledSnapshot};
use crate::fsutil::{create, open, write_string};
use crate::regression::{load_model, metrics, pcepe, save_model, write_cv_table};
use crate::selection::{read_ranking_csv, write_ranking_csv};
use crate::sim::{simulate_campaign, SimulatedCell};

pub const GROUND_TRUTH_HEADER: &str = "cell_id,rpt_index,cycle_index,time_s,temperature_c,true_capacity_ah";
pub const PCEPE_HEADER: &str = "cell_id,cycle_index,split,label_ah,estimate_ah,pcepe_pct";

/// Artifact paths under one output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn telemetry(&self) -> PathBuf {
        self.root.join("telemetry")
    }
    pub fn cell_dir(&self, cell: &str) -> PathBuf {
        self.telemetry().join(cell)
    }
    pub fn ground_truth(&self) -> PathBuf {
        self.telemetry().join("ground_truth.csv")
    }
    pub fn snapshots(&self) -> PathBuf {
        self.root.join("snapshots.csv")
    }
    pub fn ranking(&self) -> PathBuf {
        self.root.join("ranking.csv")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model.json")
    }
    pub fn cv_table(&self) -> PathBuf {
        self.root.join("cv_table.csv")
    }
    pub fn metrics(&self, split: &str) -> PathBuf {
        self.root.join(format!("metrics_{split}.json"))
    }
    pub fn pcepe(&self) -> PathBuf {
        self.root.join("pcepe.csv")
    }
    pub fn pcepe_summary(&self) -> PathBuf {
        self.root.join("pcepe_summary.json")
    }
    pub fn adaptive_dir(&self) -> PathBuf {
        self.root.join("adaptive")
    }
    pub fn trace(&self, cell: &str) -> PathBuf {
        self.adaptive_dir().join(format!("trace_{cell}.csv"))
    }
    pub fn adaptive_summary(&self) -> PathBuf {
        self.adaptive_dir().join("summary.json")
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_string(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn write_cell(layout: &Layout, cell: &SimulatedCell) -> Result<()> {
    let dir = layout.cell_dir(&cell.cell_id);
    for (name, series) in [("aging", &cell.aging), ("c20", &cell.c20), ("hppc", &cell.hppc)] {
        let mut f = create(&dir.join(format!("{name}.csv")))?;
        write_timeseries_csv(series, &mut f)?;
        f.flush()?;
    }
    Ok(())
}

fn write_ground_truth<W: Write>(cells: &[SimulatedCell], sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(GROUND_TRUTH_HEADER.split(','))?;
    for cell in cells {
        for r in &cell.truth.rpts {
            w.write_record([
                cell.cell_id.clone(),
                r.rpt_index.to_string(),
                r.cycle_index.to_string(),
                r.time_s.to_string(),
                r.temperature_c.to_string(),
                r.true_capacity_ah.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Simulates the campaign and writes per-cell telemetry plus ground truth.
pub fn cmd_simulate(cfg: &PipelineConfig, layout: &Layout) -> Result<Value> {
    cfg.validate()?;
    let cells = simulate_campaign(&cfg.simulate, cfg.seed)?;
    cells.par_iter().map(|c| write_cell(layout, c)).collect::<Result<Vec<()>>>()?;
    let mut f = create(&layout.ground_truth())?;
    write_ground_truth(&cells, &mut f)?;
    f.flush()?;
    let rpts: usize = cells.iter().map(|c| c.truth.rpts.len()).sum();
    let cycles: usize = cells.iter().map(|c| c.truth.cycles.len()).sum();
    Ok(json!({ "command": "simulate", "cells": cells.len(), "cycles": cycles, "rpts": rpts }))
}

/// Cell ids found under the telemetry directory, sorted.
pub fn telemetry_cells(layout: &Layout) -> Result<Vec<String>> {
    let dir = layout.telemetry();
    let entries = std::fs::read_dir(&dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(dir.clone()),
        _ => Error::Io(e),
    })?;
    let mut cells = Vec::new();
    for entry in entries {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            cells.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    cells.sort();
    if cells.is_empty() {
        return Err(Error::MissingInput(dir));
    }
    Ok(cells)
}

/// Reads the three telemetry files of `cell` and assembles its dataset.
pub fn load_dataset(layout: &Layout, cell: &str, cfg: &PipelineConfig) -> Result<CellDataset> {
    let dir = layout.cell_dir(cell);
    let read = |name: &str| parse_timeseries_csv(cell, BufReader::new(open(&dir.join(format!("{name}.csv")))?));
    CellDataset::from_telemetry(cell, read("aging")?, &read("c20")?, &read("hppc")?, &cfg.extract.ingest)
}

/// Builds labelled snapshots from the telemetry directory.
pub fn cmd_extract(cfg: &PipelineConfig, layout: &Layout) -> Result<Value> {
    cfg.validate()?;
    let cells = telemetry_cells(layout)?;
    let per_cell: Vec<Vec<LabeledSnapshot>> = cells
        .par_iter()
        .map(|c| build_snapshots(&load_dataset(layout, c, cfg)?, &cfg.extract.align))
        .collect::<Result<_>>()?;
    let snapshots: Vec<LabeledSnapshot> = per_cell.into_iter().flatten().collect();
    let mut f = create(&layout.snapshots())?;
    write_snapshots_csv(&snapshots, &mut f)?;
    f.flush()?;
    Ok(json!({ "command": "extract", "cells": cells.len(), "snapshots": snapshots.len() }))
}

fn load_snapshots(layout: &Layout, cfg: &PipelineConfig) -> Result<Vec<LabeledSnapshot>> {
    let snapshots = read_snapshots_csv(&layout.snapshots())?;
    for cell in cfg.split.train_cells.iter().chain(&cfg.split.test_cells) {
        if !snapshots.iter().any(|s| &s.cell_id == cell) {
            return Err(Error::InvalidParameter(format!("split names cell {cell}, which has no snapshots")));
        }
    }
    Ok(snapshots)
}

pub fn cmd_rank(cfg: &PipelineConfig, layout: &Layout) -> Result<Value> {
    cfg.validate()?;
    let ranking = rank_stage(&load_snapshots(layout, cfg)?, cfg)?;
    let mut f = create(&layout.ranking())?;
    write_ranking_csv(&ranking, &mut f)?;
    f.flush()?;
    let order: Vec<&str> = ranking.iter().map(|r| r.feature_name.as_str()).collect();
    Ok(json!({ "command": "rank", "ranking": order }))
}

pub fn cmd_train(cfg: &PipelineConfig, layout: &Layout) -> Result<Value> {
    cfg.validate()?;
    let snapshots = load_snapshots(layout, cfg)?;
    let ranking = read_ranking_csv(&layout.ranking())?;
    let outcome = train_stage(&snapshots, &ranking, cfg)?;
    save_model(&outcome.fit.model, &layout.model())?;
    let mut f = create(&layout.cv_table())?;
    write_cv_table(&outcome.grid.table, &mut f)?;
    f.flush()?;
    Ok(json!({
        "command": "train",
        "lambda": outcome.fit.model.lambda,
        "alpha": outcome.fit.model.alpha,
        "iterations": outcome.fit.iterations,
        "converged": outcome.fit.converged,
    }))
}

fn write_predictions<W: Write>(rows: &[PredictionRow], sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(PCEPE_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.cell_id.clone(),
            r.cycle_index.to_string(),
            r.split.clone(),
            r.label_ah.to_string(),
            r.estimate_ah.to_string(),
            r.pcepe_pct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_evaluate(cfg: &PipelineConfig, layout: &Layout) -> Result<Value> {
    cfg.validate()?;
    let model = load_model(&layout.model())?;
    let snapshots = load_snapshots(layout, cfg)?;
    let eval = evaluate_stage(&model, &snapshots, cfg)?;
    write_json(&layout.metrics("train"), &eval.train)?;
    write_json(&layout.metrics("test"), &eval.test)?;
    let mut f = create(&layout.pcepe())?;
    write_predictions(&eval.rows, &mut f)?;
    f.flush()?;
    write_json(&layout.pcepe_summary(), &json!({ "train": eval.pcepe_train, "test": eval.pcepe_test }))?;
    Ok(json!({ "command": "evaluate", "train": eval.train, "test": eval.test }))
}

pub fn cmd_adaptive(cfg: &PipelineConfig, layout: &Layout) -> Result<Value> {
    cfg.validate()?;
    let model = load_model(&layout.model())?;
    let snapshots = load_snapshots(layout, cfg)?;
    let traces = adaptive_stage(&model, &snapshots, cfg)?;
    let mut summary = BTreeMap::new();
    for (cell, rows) in &traces {
        let mut f = create(&layout.trace(cell))?;
        write_trace_csv(rows, &mut f)?;
        f.flush()?;

        let mut labels = BTreeMap::new();
        for s in rows_of(&snapshots, std::slice::from_ref(cell)) {
            labels.insert(s.cycle_index, s.label_q_ch_c20_ah);
        }
        let y: Vec<f64> = rows.iter().map(|r| labels[&r.cycle_index]).collect();
        let offline: Vec<f64> = rows.iter().map(|r| r.offline_ah).collect();
        let adaptive: Vec<f64> = rows.iter().map(|r| r.adaptive_ah).collect();
        summary.insert(
            cell.clone(),
            json!({
                "offline_mape_pct": metrics(&offline, &y)?.mape_pct,
                "adaptive_mape_pct": metrics(&adaptive, &y)?.mape_pct,
                "offline_max_abs_pcepe_pct": pcepe(&offline, &y)?.max_abs_pct,
                "adaptive_max_abs_pcepe_pct": pcepe(&adaptive, &y)?.max_abs_pct,
            }),
        );
    }
    write_json(&layout.adaptive_summary(), &summary)?;
    Ok(json!({ "command": "adaptive", "cells": summary }))
}

/// Checks every artifact present under the output directory.
pub fn cmd_validate(cfg: &PipelineConfig, layout: &Layout) -> Result<Value> {
    Ok(serde_json::to_value(super::validate_outputs(layout, cfg)?)?)
}

/// Runs simulate, extract, rank, train, evaluate and adaptive in order.
pub fn run_all(cfg: &PipelineConfig, layout: &Layout) -> Result<Value> {
    let steps: [fn(&PipelineConfig, &Layout) -> Result<Value>; 6] =
        [cmd_simulate, cmd_extract, cmd_rank, cmd_train, cmd_evaluate, cmd_adaptive];
    let mut reports = Vec::new();
    for step in steps {
        reports.push(step(cfg, layout)?);
    }
    Ok(Value::Array(reports))
}
