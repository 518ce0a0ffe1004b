use serde::{Deserialize, Serialize};

use super::plant::Plant;
use super::{true_capacity, CellParams};
use crate::data::{Sample, StepLabel, TimeSeries};
use crate::error::{Error, Result};

const EPS: f64 = 1e-9;

/// Ground-truth boundaries of one emitted cycle, using the same convention
/// as [`crate::data::AgingCycle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleBoundaries {
    pub t0_s: f64,
    pub t1_s: f64,
    pub t2_s: f64,
    pub t3_s: f64,
}

#[derive(Debug, Clone)]
pub struct AgingCycleOutput {
    pub series: TimeSeries,
    pub boundaries: CycleBoundaries,
    pub capacity_ah: f64,
    pub final_soc: f64,
}

pub(super) struct RawCycle {
    pub samples: Vec<Sample>,
    pub labels: Vec<StepLabel>,
    pub boundaries: CycleBoundaries,
    pub final_soc: f64,
}

/// One grid duty cycle: 1C discharge down to 50 % SOC, C/2 discharge to the
/// lower cutoff, C/2 charge to the upper cutoff, then one rest sample as the
/// charger switches off. The 1C current is `q0_ah` amperes.
pub(super) fn emit_cycle(
    params: &CellParams,
    temp_c: f64,
    capacity_ah: f64,
    initial_soc: f64,
    start_s: f64,
    dt_s: f64,
) -> Result<RawCycle> {
    params.validate()?;
    if !(dt_s > 0.0) {
        return Err(Error::InvalidParameter(format!("dt_s = {dt_s} must be positive")));
    }
    if !(capacity_ah > 0.0) {
        return Err(Error::InvalidParameter("cell capacity has faded to zero".into()));
    }
    let i_1c = params.q0_ah;
    let r = params.resistance(temp_c);
    let window = params.ocv_hi_v - params.ocv_lo_v;
    if i_1c * r >= 0.5 * window {
        return Err(Error::ImmediateCutoff(format!(
            "1C IR drop {:.4} V exceeds half the {window} V window",
            i_1c * r
        )));
    }
    let soc_step_1c = i_1c * dt_s / (3600.0 * capacity_ah);
    if initial_soc <= 0.5 + soc_step_1c {
        return Err(Error::InvalidParameter(format!(
            "initial SOC {initial_soc} leaves no room for the 1C segment"
        )));
    }

    let mut plant = Plant::new(
        capacity_ah,
        r,
        (params.ocv_lo_v, params.ocv_hi_v),
        temp_c,
        dt_s,
        start_s,
        initial_soc,
    );
    let currents = [-i_1c, -0.5 * i_1c, 0.5 * i_1c];
    let labels = [StepLabel::AgingDchg1c, StepLabel::AgingDchgC2, StepLabel::AgingChgC2];
    let mut phase = 0usize;
    let mut marks = [0.0f64; 4];
    marks[0] = plant.time();

    // Generous bound on the number of steps in one cycle.
    let max_steps = (4.0 * 3600.0 * capacity_ah / (0.5 * i_1c) / dt_s) as usize + 16;
    for _ in 0..max_steps {
        let v = plant.emit(currents[phase], labels[phase]);
        let t = plant.time();
        let done = match phase {
            0 => plant.soc <= 0.5 + EPS,
            1 => v <= params.ocv_lo_v + EPS,
            _ => v >= params.ocv_hi_v - EPS,
        };
        if done {
            marks[phase + 1] = t;
            if phase == 2 {
                plant.advance(0.0);
                plant.emit(0.0, StepLabel::Rest);
                return Ok(RawCycle {
                    boundaries: CycleBoundaries {
                        t0_s: marks[0],
                        t1_s: marks[1],
                        t2_s: marks[2],
                        t3_s: marks[3],
                    },
                    final_soc: plant.soc,
                    samples: plant.samples,
                    labels: plant.labels,
                });
            }
            phase += 1;
        }
        plant.advance(currents[phase]);
    }
    Err(Error::ImmediateCutoff("cycle did not reach its cutoffs".into()))
}

/// Generates one aging cycle starting from 100 % SOC at t = 0.
pub fn generate_aging_cycle(params: &CellParams, temp_c: f64, dt_s: f64) -> Result<AgingCycleOutput> {
    let capacity_ah = true_capacity(params, temp_c);
    let raw = emit_cycle(params, temp_c, capacity_ah, 1.0, 0.0, dt_s)?;
    Ok(AgingCycleOutput {
        series: TimeSeries::new("sim", raw.samples, Some(raw.labels))?,
        boundaries: raw.boundaries,
        capacity_ah,
        final_soc: raw.final_soc,
    })
}
