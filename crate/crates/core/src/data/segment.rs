//! Segmentation of aging-protocol telemetry into cycles of three current
//! plateaus: a 1C discharge, a C/2 discharge and a C/2 charge.
//!
//! Span convention: `segment1` holds the 1C samples, `segment2` the C/2
//! discharge samples and `segment3` the charge samples. `t0` is the first
//! 1C sample, `t1` the last 1C sample, `t2` the last C/2 discharge sample and
//! `t3` the last charge sample, so the integration intervals `[t0, t1]`,
//! `[t1, t2]`, `[t2, t3]` tile the cycle and the transition between plateaus
//! is attributed to the later segment.

use std::ops::{Range, RangeInclusive};

use serde::{Deserialize, Serialize};

use super::{StepLabel, TimeSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    /// 1C current magnitude. Inferred from the largest discharge current
    /// when absent.
    pub nominal_current_a: Option<f64>,
    /// Relative half-width of the 1C and C/2 magnitude bands.
    pub tolerance: f64,
    /// Samples with |I| at or below this fraction of 1C count as rest.
    pub rest_fraction: f64,
    /// Larger sampling gaps break a cycle.
    pub max_gap_s: f64,
    /// Use the `step` column when the series has one.
    pub use_labels: bool,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            nominal_current_a: None,
            tolerance: 0.1,
            rest_fraction: 0.02,
            max_gap_s: 300.0,
            use_labels: true,
        }
    }
}

/// One aging cycle located inside a [`TimeSeries`].
#[derive(Debug, Clone, PartialEq)]
pub struct AgingCycle {
    pub t0_s: f64,
    pub t1_s: f64,
    pub t2_s: f64,
    pub t3_s: f64,
    pub segment1: Range<usize>,
    pub segment2: Range<usize>,
    pub segment3: Range<usize>,
}

impl AgingCycle {
    /// Builds a cycle from the sample spans of its three plateaus and checks
    /// ordering and current signs against `series`.
    pub fn from_spans(
        series: &TimeSeries,
        segment1: Range<usize>,
        segment2: Range<usize>,
        segment3: Range<usize>,
    ) -> Result<Self> {
        let samples = series.samples();
        if segment1.len() < 2
            || segment2.is_empty()
            || segment3.is_empty()
            || segment1.end != segment2.start
            || segment2.end != segment3.start
            || segment3.end > samples.len()
        {
            return Err(Error::InvalidSeries(format!(
                "inconsistent cycle spans {segment1:?} {segment2:?} {segment3:?}"
            )));
        }
        for k in segment1.start..segment2.end {
            if samples[k].current_a >= 0.0 {
                return Err(Error::SignViolation { index: k, time_s: samples[k].time_s });
            }
        }
        for k in segment3.clone() {
            if samples[k].current_a <= 0.0 {
                return Err(Error::SignViolation { index: k, time_s: samples[k].time_s });
            }
        }
        Ok(Self {
            t0_s: samples[segment1.start].time_s,
            t1_s: samples[segment1.end - 1].time_s,
            t2_s: samples[segment2.end - 1].time_s,
            t3_s: samples[segment3.end - 1].time_s,
            segment1,
            segment2,
            segment3,
        })
    }

    /// Integration span of `[t0, t1]` as sample indices.
    pub fn interval1(&self) -> RangeInclusive<usize> {
        self.segment1.start..=self.segment1.end - 1
    }

    /// `[t1, t2]`
    pub fn interval2(&self) -> RangeInclusive<usize> {
        self.segment1.end - 1..=self.segment2.end - 1
    }

    /// `[t2, t3]`
    pub fn interval3(&self) -> RangeInclusive<usize> {
        self.segment2.end - 1..=self.segment3.end - 1
    }

    /// `[t0, t3]`
    pub fn whole(&self) -> RangeInclusive<usize> {
        self.segment1.start..=self.segment3.end - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Discharge1C,
    DischargeHalfC,
    ChargeHalfC,
    Rest,
    Other,
}

fn classify_labelled(series: &TimeSeries, labels: &[StepLabel]) -> Result<Vec<Class>> {
    series
        .samples()
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(k, (s, label))| {
            let class = match label {
                StepLabel::AgingDchg1c => Class::Discharge1C,
                StepLabel::AgingDchgC2 => Class::DischargeHalfC,
                StepLabel::AgingChgC2 => Class::ChargeHalfC,
                StepLabel::Rest => Class::Rest,
                _ => Class::Other,
            };
            let sign_ok = match class {
                Class::Discharge1C | Class::DischargeHalfC => s.current_a < 0.0,
                Class::ChargeHalfC => s.current_a > 0.0,
                _ => true,
            };
            if sign_ok {
                Ok(class)
            } else {
                Err(Error::SignViolation { index: k, time_s: s.time_s })
            }
        })
        .collect()
}

fn classify_by_bands(series: &TimeSeries, nominal: f64, cfg: &SegmentationConfig) -> Result<Vec<Class>> {
    let tol = cfg.tolerance;
    let in_band = |mag: f64, centre: f64| (mag - centre).abs() <= tol * centre;
    series
        .samples()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mag = s.current_a.abs();
            if mag <= cfg.rest_fraction * nominal {
                Ok(Class::Rest)
            } else if s.current_a < 0.0 && in_band(mag, nominal) {
                Ok(Class::Discharge1C)
            } else if s.current_a < 0.0 && in_band(mag, 0.5 * nominal) {
                Ok(Class::DischargeHalfC)
            } else if s.current_a > 0.0 && in_band(mag, 0.5 * nominal) {
                Ok(Class::ChargeHalfC)
            } else {
                Err(Error::MagnitudeOutOfBand {
                    index: k,
                    time_s: s.time_s,
                    current_a: s.current_a,
                })
            }
        })
        .collect()
}

/// Splits aging telemetry into complete cycles.
///
/// A cycle is a 1C discharge run followed directly by a C/2 discharge run
/// and a C/2 charge run, and must be closed by a later non-charge sample;
/// a series that ends mid-charge loses its final cycle. Returns an empty list
/// for telemetry with no excitation at all.
pub fn segment_aging_cycles(series: &TimeSeries, cfg: &SegmentationConfig) -> Result<Vec<AgingCycle>> {
    if !(cfg.tolerance > 0.0 && cfg.tolerance < 1.0 / 3.0) {
        return Err(Error::InvalidParameter(format!(
            "segmentation tolerance {} must lie in (0, 1/3)",
            cfg.tolerance
        )));
    }
    let samples = series.samples();
    let classes = match series.step_labels() {
        Some(labels) if cfg.use_labels => classify_labelled(series, labels)?,
        _ => {
            let nominal = match cfg.nominal_current_a {
                Some(n) => n,
                None => samples
                    .iter()
                    .filter(|s| s.current_a < 0.0)
                    .map(|s| -s.current_a)
                    .fold(0.0, f64::max),
            };
            if nominal <= 0.0 {
                let excited = samples.iter().any(|s| s.current_a != 0.0);
                return if excited { Err(Error::NoCompleteCycle) } else { Ok(Vec::new()) };
            }
            classify_by_bands(series, nominal, cfg)?
        }
    };

    if classes.iter().all(|c| *c == Class::Rest) {
        return Ok(Vec::new());
    }

    let n = samples.len();
    let contiguous = |k: usize| samples[k].time_s - samples[k - 1].time_s <= cfg.max_gap_s;
    // End (exclusive) of the run of `class` starting at `start`.
    let run_end = |start: usize, class: Class| {
        let mut k = start + 1;
        while k < n && classes[k] == class && contiguous(k) {
            k += 1;
        }
        k
    };

    let mut cycles = Vec::new();
    let mut k = 0;
    while k < n {
        let starts_run = classes[k] == Class::Discharge1C
            && (k == 0 || classes[k - 1] != Class::Discharge1C || !contiguous(k));
        if !starts_run {
            k += 1;
            continue;
        }
        let e1 = run_end(k, Class::Discharge1C);
        if e1 >= n || classes[e1] != Class::DischargeHalfC || !contiguous(e1) {
            k = e1;
            continue;
        }
        let e2 = run_end(e1, Class::DischargeHalfC);
        if e2 >= n || classes[e2] != Class::ChargeHalfC || !contiguous(e2) {
            k = e2;
            continue;
        }
        let e3 = run_end(e2, Class::ChargeHalfC);
        // The charge must be closed by a following sample; a series ending
        // in charge, or a data gap, leaves the cycle incomplete.
        if e3 >= n || !contiguous(e3) {
            k = e3;
            continue;
        }
        if e1 - k >= 2 {
            cycles.push(AgingCycle::from_spans(series, k..e1, e1..e2, e2..e3)?);
        }
        k = e3;
    }

    if cycles.is_empty() {
        return Err(Error::NoCompleteCycle);
    }
    Ok(cycles)
}
