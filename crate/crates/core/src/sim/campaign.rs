//! Multi-month aging campaign: seasonal ambient temperature, daily aging
//! cycles and periodic RPTs (C/20 test followed by a charge HPPC), all on one
//! clock shared by the three telemetry streams of a cell.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aging::{emit_cycle, CycleBoundaries};
use super::c20::{emit_c20, C20Protocol};
use super::hppc::{emit_hppc, HppcProtocol};
use super::{true_capacity_after, CellParams, RcBranch};
use crate::data::{integrate_span_by, CellDataset, IngestConfig, Sample, StepLabel, TimeSeries};
use crate::error::{Error, Result};

const DAY_S: f64 = 86_400.0;
/// Rest between the end of an aging cycle and an RPT, and between the C/20
/// test and the HPPC of one RPT.
const RPT_REST_S: f64 = 3_600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeasonalTemperature {
    pub mean_c: f64,
    pub amplitude_c: f64,
    pub period_days: f64,
    /// Day at which the sinusoid crosses the mean on its way up.
    pub phase_days: f64,
    /// Half-width of the uniform day-to-day noise.
    pub daily_jitter_c: f64,
}

impl Default for SeasonalTemperature {
    fn default() -> Self {
        Self {
            mean_c: 27.0,
            amplitude_c: 8.0,
            period_days: 365.0,
            phase_days: 114.0,
            daily_jitter_c: 1.0,
        }
    }
}

impl SeasonalTemperature {
    pub fn validate(&self) -> Result<()> {
        if self.amplitude_c >= 0.0 && self.period_days > 0.0 && self.daily_jitter_c >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid seasonal model {self:?}")))
        }
    }

    /// Noise-free ambient temperature on `day`.
    pub fn base_at(&self, day: f64) -> f64 {
        self.mean_c + self.amplitude_c * (2.0 * PI * (day - self.phase_days) / self.period_days).sin()
    }

    fn sample<R: Rng>(&self, day: f64, rng: &mut R) -> f64 {
        let jitter = if self.daily_jitter_c > 0.0 {
            rng.random_range(-self.daily_jitter_c..=self.daily_jitter_c)
        } else {
            0.0
        };
        self.base_at(day) + jitter
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetCell {
    pub cell_id: String,
    pub params: CellParams,
}

/// Eight cells whose reference capacities follow the spread of a retired
/// LMO/graphite pack; smaller cells get proportionally larger resistance.
pub fn default_fleet() -> Vec<FleetCell> {
    const CELLS: [(&str, f64); 8] = [
        ("1.1", 20.27),
        ("1.2", 17.42),
        ("1.3", 19.57),
        ("1.4", 18.93),
        ("2.1", 25.04),
        ("2.2", 23.65),
        ("2.3", 22.87),
        ("2.4", 17.59),
    ];
    CELLS
        .iter()
        .map(|&(id, q0)| {
            let r0 = 0.045 / q0;
            FleetCell {
                cell_id: id.to_string(),
                params: CellParams {
                    q0_ah: q0,
                    r0_ohm: r0,
                    rc: Some(RcBranch { r_ohm: 0.4 * r0, tau_s: 8.0 }),
                    ..Default::default()
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub fleet: Vec<FleetCell>,
    pub season: SeasonalTemperature,
    pub months: u32,
    pub days_per_month: f64,
    pub rpt_every_n_cycles: u32,
    pub cycles_per_day: u32,
    pub aging_dt_s: f64,
    pub c20: C20Protocol,
    pub hppc: HppcProtocol,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            fleet: default_fleet(),
            season: SeasonalTemperature::default(),
            months: 15,
            days_per_month: 30.0,
            rpt_every_n_cycles: 30,
            cycles_per_day: 1,
            aging_dt_s: 10.0,
            c20: C20Protocol::default(),
            hppc: HppcProtocol::default(),
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.fleet.is_empty() {
            return bad("campaign fleet is empty");
        }
        if self.months < 1 {
            return bad("campaign needs at least one month");
        }
        if self.rpt_every_n_cycles < 1 {
            return bad("rpt_every_n_cycles must be at least 1");
        }
        if !(1..=6).contains(&self.cycles_per_day) {
            return bad("cycles_per_day must lie in 1..=6");
        }
        if !(self.aging_dt_s > 0.0 && self.days_per_month > 0.0) {
            return bad("aging_dt_s and days_per_month must be positive");
        }
        let mut ids: Vec<&str> = self.fleet.iter().map(|c| c.cell_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate cell id in fleet");
        }
        for cell in &self.fleet {
            cell.params.validate()?;
        }
        self.season.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTruth {
    pub boundaries: CycleBoundaries,
    pub temperature_c: f64,
    pub capacity_ah: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RptTruth {
    pub rpt_index: usize,
    /// Aging cycles completed before this RPT.
    pub cycle_index: usize,
    pub time_s: f64,
    pub temperature_c: f64,
    pub true_capacity_ah: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub cycles: Vec<CycleTruth>,
    pub rpts: Vec<RptTruth>,
}

/// Telemetry and ground truth of one simulated cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedCell {
    pub cell_id: String,
    pub params: CellParams,
    pub aging: TimeSeries,
    pub c20: TimeSeries,
    pub hppc: TimeSeries,
    pub truth: GroundTruth,
}

impl SimulatedCell {
    /// Ingests the emitted telemetry exactly as it would be read from disk.
    pub fn dataset(&self, cfg: &IngestConfig) -> Result<CellDataset> {
        CellDataset::from_telemetry(&self.cell_id, self.aging.clone(), &self.c20, &self.hppc, cfg)
    }
}

#[derive(Default)]
struct Stream {
    samples: Vec<Sample>,
    labels: Vec<StepLabel>,
}

impl Stream {
    fn extend(&mut self, (samples, labels): (Vec<Sample>, Vec<StepLabel>)) {
        self.samples.extend(samples);
        self.labels.extend(labels);
    }

    fn into_series(self, cell_id: &str) -> Result<TimeSeries> {
        TimeSeries::new(cell_id, self.samples, Some(self.labels))
    }
}

fn simulate_cell(cfg: &CampaignConfig, index: usize, seed: u64) -> Result<SimulatedCell> {
    let cell = &cfg.fleet[index];
    let params = &cell.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);

    let end_s = f64::from(cfg.months) * cfg.days_per_month * DAY_S;
    let slot_s = DAY_S / f64::from(cfg.cycles_per_day);
    let (mut aging, mut c20, mut hppc) = (Stream::default(), Stream::default(), Stream::default());
    let mut truth = GroundTruth::default();
    let mut throughput_ah = 0.0;
    let mut soc = 1.0;

    let mut rpt = |at_s: f64, cycles: usize, throughput_ah: f64, rng: &mut ChaCha8Rng, truth: &mut GroundTruth| -> Result<f64> {
        let temp = cfg.season.sample(at_s / DAY_S, rng);
        let capacity = true_capacity_after(params, temp, throughput_ah);
        let test = emit_c20(params, temp, capacity, &cfg.c20, at_s)?;
        let c20_end = test.0.last().map_or(at_s, |s| s.time_s);
        c20.extend(test);
        let pulses = emit_hppc(params, temp, capacity, &cfg.hppc, c20_end + RPT_REST_S)?;
        let hppc_end = pulses.0.last().map_or(at_s, |s| s.time_s);
        hppc.extend(pulses);
        truth.rpts.push(RptTruth {
            rpt_index: truth.rpts.len(),
            cycle_index: cycles,
            time_s: at_s,
            temperature_c: temp,
            true_capacity_ah: capacity,
        });
        Ok(hppc_end)
    };

    let mut cursor = rpt(0.0, 0, 0.0, &mut rng, &mut truth)?;
    let mut cycles = 0usize;
    loop {
        let start = (cursor / slot_s).ceil() * slot_s;
        if start >= end_s {
            break;
        }
        let temp = cfg.season.sample(start / DAY_S, &mut rng);
        let capacity = true_capacity_after(params, temp, throughput_ah);
        let raw = emit_cycle(params, temp, capacity, soc, start, cfg.aging_dt_s)?;
        let b = raw.boundaries;
        let first = raw.samples.iter().position(|s| s.time_s == b.t0_s).unwrap_or(0);
        let last = raw.samples.iter().position(|s| s.time_s == b.t3_s).unwrap_or(raw.samples.len() - 1);
        throughput_ah += integrate_span_by(&raw.samples, first..=last, |s| s.current_a.abs()) / 3600.0;
        soc = raw.final_soc;
        cursor = raw.samples.last().map_or(start, |s| s.time_s);
        aging.extend((raw.samples, raw.labels));
        truth.cycles.push(CycleTruth { boundaries: b, temperature_c: temp, capacity_ah: capacity });
        cycles += 1;
        if cycles.is_multiple_of(cfg.rpt_every_n_cycles as usize) {
            cursor = rpt(cursor + RPT_REST_S, cycles, throughput_ah, &mut rng, &mut truth)?;
            soc = 1.0;
        }
    }
    if !cycles.is_multiple_of(cfg.rpt_every_n_cycles as usize) {
        rpt(cursor + RPT_REST_S, cycles, throughput_ah, &mut rng, &mut truth)?;
    }

    let id = cell.cell_id.as_str();
    Ok(SimulatedCell {
        cell_id: cell.cell_id.clone(),
        params: params.clone(),
        aging: if aging.samples.is_empty() {
            // A campaign too short for any cycle still yields a valid stream.
            TimeSeries::new(id, vec![Sample::new(0.0, 0.0, params.ocv_hi_v, cfg.season.mean_c)], Some(vec![StepLabel::Rest]))?
        } else {
            aging.into_series(id)?
        },
        c20: c20.into_series(id)?,
        hppc: hppc.into_series(id)?,
        truth,
    })
}

/// Simulates every fleet cell. Output is a pure function of `(cfg, seed)`;
/// cells run in parallel on independent random streams.
pub fn simulate_campaign(cfg: &CampaignConfig, seed: u64) -> Result<Vec<SimulatedCell>> {
    cfg.validate()?;
    (0..cfg.fleet.len())
        .into_par_iter()
        .map(|i| simulate_cell(cfg, i, seed))
        .collect()
}
