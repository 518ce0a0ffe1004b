use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::commands::{telemetry_cells, Layout, GROUND_TRUTH_HEADER, PCEPE_HEADER};
use super::PipelineConfig;
use crate::adaptive::TRACE_HEADER;
use crate::data::parse_timeseries_csv;
use crate::error::{Error, Result};
use crate::features::read_snapshots_csv;
use crate::fsutil::{open, read_string};
use crate::regression::{load_model, MetricsReport};
use crate::selection::read_ranking_csv;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileCheck {
    pub path: String,
    pub ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub files: Vec<FileCheck>,
}

/// Checks a numeric CSV: exact header and finite values in every column
/// except those named in `text_columns`. Returns the parsed rows.
fn check_numeric_csv(path: &Path, header: &str, text_columns: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::Reader::from_reader(BufReader::new(open(path)?));
    let got: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if got.join(",") != header {
        return Err(Error::Schema(format!("header `{}` differs from `{header}`", got.join(","))));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        for (name, value) in got.iter().zip(record.iter()) {
            if !text_columns.contains(&name.as_str()) && !value.parse::<f64>().is_ok_and(f64::is_finite) {
                return Err(Error::MalformedRow { line, message: format!("{name} `{value}` is not a finite number") });
            }
        }
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

fn check_cv_table(path: &Path) -> Result<()> {
    let first = BufReader::new(open(path)?).lines().next().transpose()?.unwrap_or_default();
    if !first.starts_with("lambda,alpha,mean_rmse_ah,fold_1_rmse_ah") {
        return Err(Error::Schema(format!("unexpected CV table header `{first}`")));
    }
    check_numeric_csv(path, &first, &[]).map(|_| ())
}

fn check_metrics(path: &Path) -> Result<()> {
    let value: serde_json::Value = serde_json::from_str(&read_string(path)?)?;
    let keys: Vec<&str> = value.as_object().map(|o| o.keys().map(String::as_str).collect()).unwrap_or_default();
    let mut expected = ["mape_pct", "n", "rmse_ah", "rmspe_pct"];
    expected.sort_unstable();
    let mut sorted = keys.clone();
    sorted.sort_unstable();
    if sorted != expected {
        return Err(Error::Schema(format!("metrics keys {keys:?}")));
    }
    let m: MetricsReport = serde_json::from_value(value)?;
    if [m.rmse_ah, m.rmspe_pct, m.mape_pct].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Schema("metrics must be finite and non-negative".into()));
    }
    Ok(())
}

fn check_trace(path: &Path, delta_max_ah: f64) -> Result<()> {
    for row in check_numeric_csv(path, TRACE_HEADER, &[])? {
        let v: Vec<f64> = row.iter().map(|s| s.parse().unwrap()).collect();
        let (offline, adaptive, correction) = (v[2], v[3], v[4]);
        if correction.abs() > delta_max_ah || (adaptive - offline).abs() > delta_max_ah {
            return Err(Error::Schema(format!("trace row at cycle {} exceeds the {delta_max_ah} Ah bound", row[0])));
        }
    }
    Ok(())
}

/// Validates every known artifact present under the layout root.
pub fn validate_outputs(layout: &Layout, cfg: &PipelineConfig) -> Result<ValidationReport> {
    if !layout.root.is_dir() {
        return Err(Error::MissingInput(layout.root.clone()));
    }
    type Check<'a> = Box<dyn Fn(&Path) -> Result<()> + 'a>;
    let mut checks: Vec<(std::path::PathBuf, Check)> = Vec::new();
    if layout.telemetry().is_dir() {
        for cell in telemetry_cells(layout)? {
            for name in ["aging", "c20", "hppc"] {
                let cell = cell.clone();
                checks.push((
                    layout.cell_dir(&cell).join(format!("{name}.csv")),
                    Box::new(move |p| parse_timeseries_csv(&cell, BufReader::new(open(p)?)).map(|_| ())),
                ));
            }
        }
        checks.push((layout.ground_truth(), Box::new(|p| check_numeric_csv(p, GROUND_TRUTH_HEADER, &["cell_id"]).map(|_| ()))));
    }
    checks.push((layout.snapshots(), Box::new(|p| read_snapshots_csv(p).map(|_| ()))));
    checks.push((layout.ranking(), Box::new(|p| read_ranking_csv(p).map(|_| ()))));
    checks.push((layout.model(), Box::new(|p| load_model(p).map(|_| ()))));
    checks.push((layout.cv_table(), Box::new(check_cv_table)));
    checks.push((layout.metrics("train"), Box::new(check_metrics)));
    checks.push((layout.metrics("test"), Box::new(check_metrics)));
    checks.push((layout.pcepe(), Box::new(|p| check_numeric_csv(p, PCEPE_HEADER, &["cell_id", "split"]).map(|_| ()))));
    checks.push((
        layout.pcepe_summary(),
        Box::new(|p| serde_json::from_str::<serde_json::Value>(&read_string(p)?).map(|_| ()).map_err(Error::from)),
    ));
    if let Ok(entries) = std::fs::read_dir(layout.adaptive_dir()) {
        let mut traces: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("trace_")))
            .collect();
        traces.sort();
        let delta = cfg.adaptive.delta_max_ah;
        for t in traces {
            checks.push((t, Box::new(move |p| check_trace(p, delta))));
        }
    }

    let mut files = Vec::new();
    for (path, check) in checks {
        if !path.exists() {
            continue;
        }
        let result = check(&path);
        files.push(FileCheck {
            path: path.strip_prefix(&layout.root).unwrap_or(&path).display().to_string(),
            ok: result.is_ok(),
            error: result.err().map(|e| e.to_string()),
        });
    }
    Ok(ValidationReport { ok: files.iter().all(|f| f.ok), files })
}
