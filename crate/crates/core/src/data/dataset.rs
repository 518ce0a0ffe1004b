//! RPT records (C/20 capacity tests and charge HPPC pulses) and the per-cell
//! dataset assembled from aging, C/20 and HPPC telemetry on a shared clock.

use std::ops::Range;

use log::warn;
use serde::{Deserialize, Serialize};

use super::integrate::integrate_span_by;
use super::segment::{segment_aging_cycles, AgingCycle, SegmentationConfig};
use super::TimeSeries;
use crate::error::{Error, Result};

/// Splits a series into runs of samples separated by gaps longer than `gap_s`.
pub fn split_sessions(series: &TimeSeries, gap_s: f64) -> Vec<Range<usize>> {
    let samples = series.samples();
    let mut sessions = Vec::new();
    let mut start = 0;
    for k in 1..samples.len() {
        if samples[k].time_s - samples[k - 1].time_s > gap_s {
            sessions.push(start..k);
            start = k;
        }
    }
    sessions.push(start..samples.len());
    sessions
}

/// Locates the discharge span and the charge span that follows it inside
/// `session`. The discharge span is optional; the charge span is the first
/// positive-current run after it and must hold at least two samples.
pub fn find_c20_spans(series: &TimeSeries, session: Range<usize>) -> Result<(Option<Range<usize>>, Range<usize>)> {
    let samples = &series.samples()[session.clone()];
    let run = |from: usize, pred: &dyn Fn(f64) -> bool| -> Option<Range<usize>> {
        let start = (from..samples.len()).find(|&k| pred(samples[k].current_a))?;
        let end = (start..samples.len())
            .find(|&k| !pred(samples[k].current_a))
            .unwrap_or(samples.len());
        Some(start..end)
    };
    let discharge = run(0, &|i| i < 0.0);
    let after = discharge.as_ref().map_or(0, |r| r.end);
    let charge = run(after, &|i| i > 0.0).filter(|r| r.len() >= 2).ok_or(Error::ChargeSpanNotFound)?;
    let offset = |r: Range<usize>| r.start + session.start..r.end + session.start;
    Ok((discharge.map(offset), offset(charge)))
}

/// Coulomb-counted capacity of a C/20 charge span, in Ah.
pub fn q_c20_charge_capacity(series: &TimeSeries, charge_span: Range<usize>) -> Result<f64> {
    if charge_span.len() < 2 || charge_span.end > series.len() {
        return Err(Error::ChargeSpanNotFound);
    }
    let q = integrate_span_by(series.samples(), charge_span.start..=charge_span.end - 1, |s| {
        s.current_a.abs()
    }) / 3600.0;
    if q > 0.0 {
        Ok(q)
    } else {
        Err(Error::ChargeSpanNotFound)
    }
}

/// One C/20 capacity test. Spans index into the C/20 source series.
#[derive(Debug, Clone, PartialEq)]
pub struct C20Record {
    pub time_s: f64,
    pub cycle_index: usize,
    pub discharge_span: Option<Range<usize>>,
    pub charge_span: Range<usize>,
    pub mean_temperature_c: f64,
    pub charge_capacity_ah: f64,
}

impl C20Record {
    pub fn extract(series: &TimeSeries, session: Range<usize>, cycle_index: usize) -> Result<Self> {
        let (discharge_span, charge_span) = find_c20_spans(series, session.clone())?;
        let charge_capacity_ah = q_c20_charge_capacity(series, charge_span.clone())?;
        let first = discharge_span.as_ref().map_or(charge_span.start, |r| r.start);
        let last = charge_span.end - 1;
        let samples = series.samples();
        let duration = samples[last].time_s - samples[first].time_s;
        let mean_temperature_c = integrate_span_by(samples, first..=last, |s| s.temperature_c) / duration;
        Ok(Self {
            time_s: samples[session.start].time_s,
            cycle_index,
            discharge_span,
            charge_span,
            mean_temperature_c,
            charge_capacity_ah,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocLevel {
    Low,
    High,
}

/// Voltage and current steps of one pulse, read at the resistance mark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEdge {
    pub time_s: f64,
    pub delta_v: f64,
    pub delta_i: f64,
    pub soc: SocLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HppcConfig {
    /// Time after the pulse edge at which ΔV and ΔI are read.
    pub pulse_mark_s: f64,
    /// Non-rest runs longer than this are not pulses.
    pub max_pulse_s: f64,
    /// Currents at or below this magnitude count as rest.
    pub rest_current_a: f64,
    /// Smallest |ΔI| accepted when computing a resistance.
    pub current_floor_a: f64,
}

impl Default for HppcConfig {
    fn default() -> Self {
        Self {
            pulse_mark_s: 2.0,
            max_pulse_s: 10.0,
            rest_current_a: 0.05,
            current_floor_a: 0.1,
        }
    }
}

/// Charge-portion HPPC pulses: the charge pulse at the lowest SOC setpoint
/// and the discharge pulse at the highest one.
#[derive(Debug, Clone, PartialEq)]
pub struct HppcRecord {
    pub time_s: f64,
    pub cycle_index: usize,
    pub charge_low: PulseEdge,
    pub discharge_high: PulseEdge,
}

impl HppcRecord {
    pub fn extract(series: &TimeSeries, session: Range<usize>, cycle_index: usize, cfg: &HppcConfig) -> Result<Self> {
        let samples = series.samples();
        let is_rest = |k: usize| samples[k].current_a.abs() <= cfg.rest_current_a;
        let mut pulses: Vec<PulseEdge> = Vec::new();

        let mut k = session.start + 1;
        while k < session.end {
            if is_rest(k) || !is_rest(k - 1) {
                k += 1;
                continue;
            }
            let pre = k - 1;
            let positive = samples[k].current_a > 0.0;
            let mut end = k + 1;
            while end < session.end && !is_rest(end) && (samples[end].current_a > 0.0) == positive {
                end += 1;
            }
            let last = end - 1;
            let t_pre = samples[pre].time_s;
            let t_mark = t_pre + cfg.pulse_mark_s;
            if samples[last].time_s - t_pre <= cfg.max_pulse_s && t_mark <= samples[last].time_s {
                // Interpolate at the mark inside (pre, last].
                let j = pre + 1 + samples[pre + 1..=last].partition_point(|s| s.time_s < t_mark);
                let (a, b) = (&samples[j - 1], &samples[j]);
                let (v, i) = if b.time_s == t_mark {
                    (b.voltage_v, b.current_a)
                } else {
                    let w = (t_mark - a.time_s) / (b.time_s - a.time_s);
                    (
                        a.voltage_v + (b.voltage_v - a.voltage_v) * w,
                        a.current_a + (b.current_a - a.current_a) * w,
                    )
                };
                pulses.push(PulseEdge {
                    time_s: t_pre,
                    delta_v: v - samples[pre].voltage_v,
                    delta_i: i - samples[pre].current_a,
                    soc: SocLevel::Low,
                });
            }
            k = end;
        }

        let mut charge_low = pulses
            .iter()
            .copied()
            .find(|p| p.delta_i > 0.0)
            .ok_or(Error::PulseNotFound("charge pulse at low SOC"))?;
        let mut discharge_high = pulses
            .iter()
            .rev()
            .copied()
            .find(|p| p.delta_i < 0.0)
            .ok_or(Error::PulseNotFound("discharge pulse at high SOC"))?;
        charge_low.soc = SocLevel::Low;
        discharge_high.soc = SocLevel::High;
        Ok(Self {
            time_s: samples[session.start].time_s,
            cycle_index,
            charge_low,
            discharge_high,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub segmentation: SegmentationConfig,
    pub hppc: HppcConfig,
    /// Gaps longer than this separate RPT sessions.
    pub session_gap_s: Option<f64>,
}

impl IngestConfig {
    fn session_gap(&self) -> f64 {
        self.session_gap_s.unwrap_or(600.0)
    }
}

/// Everything known about one cell: its aging telemetry segmented into
/// cycles, and RPT records stamped with the number of cycles completed
/// before each test.
#[derive(Debug, Clone)]
pub struct CellDataset {
    pub cell_id: String,
    pub aging: TimeSeries,
    pub cycles: Vec<AgingCycle>,
    pub c20: Vec<C20Record>,
    pub hppc: Vec<HppcRecord>,
    pub initial_capacity_ah: f64,
}

impl CellDataset {
    /// Assembles a dataset from the three telemetry streams of one cell.
    /// Malformed RPT sessions are skipped with a warning; at least one
    /// C/20 test is required.
    pub fn from_telemetry(
        cell_id: &str,
        aging: TimeSeries,
        c20: &TimeSeries,
        hppc: &TimeSeries,
        cfg: &IngestConfig,
    ) -> Result<Self> {
        let cycles = segment_aging_cycles(&aging, &cfg.segmentation)?;
        let stamp = |t: f64| cycles.partition_point(|c| c.t3_s <= t);

        let mut c20_records = Vec::new();
        for session in split_sessions(c20, cfg.session_gap()) {
            let t = c20.samples()[session.start].time_s;
            match C20Record::extract(c20, session, stamp(t)) {
                Ok(r) => c20_records.push(r),
                Err(e) => warn!("cell {cell_id}: skipping C/20 session at t = {t} s: {e}"),
            }
        }
        let mut hppc_records = Vec::new();
        for session in split_sessions(hppc, cfg.session_gap()) {
            let t = hppc.samples()[session.start].time_s;
            match HppcRecord::extract(hppc, session, stamp(t), &cfg.hppc) {
                Ok(r) => hppc_records.push(r),
                Err(e) => warn!("cell {cell_id}: skipping HPPC session at t = {t} s: {e}"),
            }
        }
        let initial_capacity_ah = c20_records
            .first()
            .map(|r| r.charge_capacity_ah)
            .ok_or(Error::ChargeSpanNotFound)?;
        Ok(Self {
            cell_id: cell_id.to_string(),
            aging,
            cycles,
            c20: c20_records,
            hppc: hppc_records,
            initial_capacity_ah,
        })
    }
}
