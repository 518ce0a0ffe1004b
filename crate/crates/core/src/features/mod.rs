//! The six snapshot features and their alignment with C/20 capacity labels.
//!
//! Per-cycle quantities come from [`crate::data::AgingCycle`] spans;
//! cumulative features sum over every cycle completed before an RPT.

mod snapshot_csv;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{integrate_span_by, AgingCycle, CellDataset, HppcRecord, TimeSeries};
use crate::error::{Error, Result};

pub use snapshot_csv::{parse_snapshots_csv, read_snapshots_csv, write_snapshots_csv, SNAPSHOT_HEADER};
pub use crate::data::q_c20_charge_capacity;

const SECONDS_PER_HOUR: f64 = 3600.0;

/// Feature names in column order.
pub const FEATURE_NAMES: [&str; 6] = [
    "q_initial_c20_ah",
    "q_ah_aging_ah",
    "e_ch_aging_wh",
    "r0_ch_ch_low_2s_ohm",
    "r0_dis_ch_high_2s_ohm",
    "t_aging_c",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub q_initial_c20_ah: f64,
    pub q_ah_aging_ah: f64,
    pub e_ch_aging_wh: f64,
    pub r0_ch_ch_low_2s_ohm: f64,
    pub r0_dis_ch_high_2s_ohm: f64,
    pub t_aging_c: f64,
}

impl FeatureVector {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.q_initial_c20_ah,
            self.q_ah_aging_ah,
            self.e_ch_aging_wh,
            self.r0_ch_ch_low_2s_ohm,
            self.r0_dis_ch_high_2s_ohm,
            self.t_aging_c,
        ]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            q_initial_c20_ah: v[0],
            q_ah_aging_ah: v[1],
            e_ch_aging_wh: v[2],
            r0_ch_ch_low_2s_ohm: v[3],
            r0_dis_ch_high_2s_ohm: v[4],
            t_aging_c: v[5],
        }
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|k| self.to_array()[k])
            .ok_or_else(|| Error::MissingFeature(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSnapshot {
    pub cell_id: String,
    /// Aging cycles completed before the RPT.
    pub cycle_index: usize,
    pub features: FeatureVector,
    pub label_q_ch_c20_ah: f64,
}

/// Row-major matrix of the named features over `snapshots`.
pub fn feature_matrix(snapshots: &[LabeledSnapshot], names: &[String]) -> Result<Vec<Vec<f64>>> {
    snapshots
        .iter()
        .map(|s| names.iter().map(|n| s.features.get(n)).collect())
        .collect()
}

/// Aging Ah-throughput of one cycle: |I| integrated over its three segments.
pub fn q_ah_aging(series: &TimeSeries, cycle: &AgingCycle) -> f64 {
    let s = series.samples();
    [cycle.interval1(), cycle.interval2(), cycle.interval3()]
        .into_iter()
        .map(|span| integrate_span_by(s, span, |x| x.current_a.abs()))
        .sum::<f64>()
        / SECONDS_PER_HOUR
}

/// Charge energy of one cycle, Wh, over `[t2, t3]`. Only charging current
/// contributes, so the value is independent of the discharge segments.
pub fn e_ch_aging(series: &TimeSeries, cycle: &AgingCycle) -> f64 {
    integrate_span_by(series.samples(), cycle.interval3(), |x| x.current_a.max(0.0) * x.voltage_v)
        / SECONDS_PER_HOUR
}

/// Time-weighted mean temperature over the whole cycle.
pub fn t_aging(series: &TimeSeries, cycle: &AgingCycle) -> f64 {
    let s = series.samples();
    let whole = cycle.whole();
    let duration = s[*whole.end()].time_s - s[*whole.start()].time_s;
    integrate_span_by(s, whole, |x| x.temperature_c) / duration
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HppcResistances {
    pub charge_low_ohm: f64,
    pub discharge_high_ohm: f64,
}

/// 2 s pulse resistances, reported as positive magnitudes.
pub fn hppc_resistances(rec: &HppcRecord, current_floor_a: f64) -> Result<HppcResistances> {
    let r = |dv: f64, di: f64| -> Result<f64> {
        if !(di.abs() >= current_floor_a) {
            return Err(Error::DegeneratePulse { delta_i: di.abs(), floor: current_floor_a });
        }
        Ok((dv / di).abs())
    };
    Ok(HppcResistances {
        charge_low_ohm: r(rec.charge_low.delta_v, rec.charge_low.delta_i)?,
        discharge_high_ohm: r(rec.discharge_high.delta_v, rec.discharge_high.delta_i)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentConfig {
    /// Minimum |dI| accepted for a resistance reading.
    pub current_floor_a: f64,
    /// HPPC records further than this from the C/20 test are ignored.
    pub max_hppc_age_s: Option<f64>,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self { current_floor_a: 0.1, max_hppc_age_s: None }
    }
}

/// One labelled snapshot per C/20 record, ordered by cycle index.
///
/// Each RPT takes the latest HPPC recorded before the next C/20 test and no
/// later in cycle count, which includes the RPT's own HPPC. RPTs without a
/// usable HPPC are dropped with a warning.
/// When no cycle separates an RPT from the previous one, `t_aging_c` falls
/// back to the mean temperature of the C/20 test.
pub fn build_snapshots(dataset: &CellDataset, align: &AlignmentConfig) -> Result<Vec<LabeledSnapshot>> {
    let series = &dataset.aging;
    let per_cycle: Vec<(f64, f64, f64)> = dataset
        .cycles
        .iter()
        .map(|c| (q_ah_aging(series, c), e_ch_aging(series, c), t_aging(series, c)))
        .collect();
    let mut prefix_q = vec![0.0];
    let mut prefix_e = vec![0.0];
    for &(q, e, _) in &per_cycle {
        prefix_q.push(prefix_q.last().unwrap() + q);
        prefix_e.push(prefix_e.last().unwrap() + e);
    }

    let mut c20: Vec<_> = dataset.c20.iter().collect();
    c20.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    let mut out = Vec::with_capacity(c20.len());
    let next_c20: Vec<f64> = c20.iter().skip(1).map(|r| r.time_s).chain([f64::INFINITY]).collect();
    let mut block_start = 0usize;
    for (rec, &next_time) in c20.into_iter().zip(&next_c20) {
        let stamp = rec.cycle_index.min(per_cycle.len());
        let block = &per_cycle[block_start.min(stamp)..stamp];
        block_start = stamp;

        let hppc = dataset
            .hppc
            .iter()
            .filter(|h| h.time_s < next_time && h.cycle_index <= rec.cycle_index)
            .filter(|h| align.max_hppc_age_s.is_none_or(|age| (rec.time_s - h.time_s).abs() <= age))
            .max_by(|a, b| a.time_s.total_cmp(&b.time_s));
        let Some(hppc) = hppc else {
            warn!(
                "cell {}: no HPPC at or before the RPT at cycle {}; snapshot dropped",
                dataset.cell_id, rec.cycle_index
            );
            continue;
        };
        let r = match hppc_resistances(hppc, align.current_floor_a) {
            Ok(r) => r,
            Err(e) => {
                warn!("cell {}: RPT at cycle {}: {e}; snapshot dropped", dataset.cell_id, rec.cycle_index);
                continue;
            }
        };
        let t_aging_c = if block.is_empty() {
            rec.mean_temperature_c
        } else {
            block.iter().map(|b| b.2).sum::<f64>() / block.len() as f64
        };
        if !(rec.charge_capacity_ah > 0.0) {
            return Err(Error::ZeroLabel(out.len()));
        }
        out.push(LabeledSnapshot {
            cell_id: dataset.cell_id.clone(),
            cycle_index: rec.cycle_index,
            features: FeatureVector {
                q_initial_c20_ah: dataset.initial_capacity_ah,
                q_ah_aging_ah: prefix_q[stamp],
                e_ch_aging_wh: prefix_e[stamp],
                r0_ch_ch_low_2s_ohm: r.charge_low_ohm,
                r0_dis_ch_high_2s_ohm: r.discharge_high_ohm,
                t_aging_c,
            },
            label_q_ch_c20_ah: rec.charge_capacity_ah,
        });
    }
    Ok(out)
}
