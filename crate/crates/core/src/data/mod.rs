//! Canonical telemetry types, CSV ingestion, trapezoidal integration and
//! segmentation of raw streams into aging cycles and RPT records.
//!
//! Sign convention throughout: positive current charges the cell, negative
//! current discharges it.

mod csv_io;
mod dataset;
mod integrate;
mod segment;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{parse_timeseries_csv, read_timeseries_csv, write_timeseries_csv, TIMESERIES_HEADER};
pub use dataset::{
    find_c20_spans, q_c20_charge_capacity, split_sessions, C20Record, CellDataset, HppcConfig,
    HppcRecord, IngestConfig, PulseEdge, SocLevel,
};
pub use integrate::{integrate_abs_current, integrate_by, integrate_power, integrate_span_by};
pub use segment::{segment_aging_cycles, AgingCycle, SegmentationConfig};

/// Lower/upper bound of the voltage sanity band, volts.
pub const VOLTAGE_SANITY_BAND: (f64, f64) = (0.0, 6.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time_s: f64,
    pub current_a: f64,
    pub voltage_v: f64,
    pub temperature_c: f64,
}

impl Sample {
    pub fn new(time_s: f64, current_a: f64, voltage_v: f64, temperature_c: f64) -> Self {
        Self {
            time_s,
            current_a,
            voltage_v,
            temperature_c,
        }
    }
}

/// Protocol step a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StepLabel {
    AgingDchg1c,
    AgingDchgC2,
    AgingChgC2,
    Hppc,
    C20Chg,
    C20Dchg,
    Rest,
}

impl StepLabel {
    pub const ALL: [StepLabel; 7] = [
        StepLabel::AgingDchg1c,
        StepLabel::AgingDchgC2,
        StepLabel::AgingChgC2,
        StepLabel::Hppc,
        StepLabel::C20Chg,
        StepLabel::C20Dchg,
        StepLabel::Rest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StepLabel::AgingDchg1c => "aging_dchg_1c",
            StepLabel::AgingDchgC2 => "aging_dchg_c2",
            StepLabel::AgingChgC2 => "aging_chg_c2",
            StepLabel::Hppc => "hppc",
            StepLabel::C20Chg => "c20_chg",
            StepLabel::C20Dchg => "c20_dchg",
            StepLabel::Rest => "rest",
        }
    }
}

impl fmt::Display for StepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StepLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        StepLabel::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown step label `{s}`"))
    }
}

/// Ordered telemetry of one cell. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    cell_id: String,
    samples: Vec<Sample>,
    step_labels: Option<Vec<StepLabel>>,
}

impl TimeSeries {
    /// Validates and wraps samples: non-empty, strictly increasing finite
    /// times, finite current/temperature, voltage inside the sanity band,
    /// labels (when present) aligned one-to-one with samples.
    pub fn new(
        cell_id: impl Into<String>,
        samples: Vec<Sample>,
        step_labels: Option<Vec<StepLabel>>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSeries("series is empty".into()));
        }
        if let Some(labels) = &step_labels {
            if labels.len() != samples.len() {
                return Err(Error::InvalidSeries(format!(
                    "{} step labels for {} samples",
                    labels.len(),
                    samples.len()
                )));
            }
        }
        for (i, s) in samples.iter().enumerate() {
            validate_sample(s).map_err(|msg| Error::InvalidSeries(format!("sample {i}: {msg}")))?;
            if i > 0 && s.time_s <= samples[i - 1].time_s {
                return Err(Error::InvalidSeries(format!(
                    "sample {i}: time {} s does not strictly increase",
                    s.time_s
                )));
            }
        }
        Ok(Self {
            cell_id: cell_id.into(),
            samples,
            step_labels,
        })
    }

    pub fn cell_id(&self) -> &str {
        &self.cell_id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn step_labels(&self) -> Option<&[StepLabel]> {
        self.step_labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].time_s
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].time_s
    }

    /// Copies the index range `range` into a new series with the same id.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<TimeSeries> {
        let labels = self.step_labels.as_ref().map(|l| l[range.clone()].to_vec());
        TimeSeries::new(self.cell_id.clone(), self.samples[range].to_vec(), labels)
    }

    pub fn into_parts(self) -> (String, Vec<Sample>, Option<Vec<StepLabel>>) {
        (self.cell_id, self.samples, self.step_labels)
    }
}

pub(crate) fn validate_sample(s: &Sample) -> std::result::Result<(), String> {
    if !s.time_s.is_finite() {
        return Err("non-finite time".into());
    }
    if !s.current_a.is_finite() {
        return Err("non-finite current".into());
    }
    if !s.temperature_c.is_finite() {
        return Err("non-finite temperature".into());
    }
    let (lo, hi) = VOLTAGE_SANITY_BAND;
    if !s.voltage_v.is_finite() || s.voltage_v < lo || s.voltage_v > hi {
        return Err(format!("voltage {} V outside [{lo}, {hi}] V", s.voltage_v));
    }
    Ok(())
}
