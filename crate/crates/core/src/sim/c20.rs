use serde::{Deserialize, Serialize};

use super::plant::Plant;
use super::{true_capacity, CellParams};
use crate::data::{Sample, StepLabel, TimeSeries};
use crate::error::{Error, Result};

const EPS: f64 = 1e-9;

/// C/20 capacity test: CC discharge to the lower cutoff, CC charge to the
/// upper cutoff. Each CC phase is followed by a constant-voltage hold until
/// the current falls below `cv_cutoff_c_rate`, so the counted capacity spans
/// the full derated window regardless of IR drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct C20Protocol {
    pub dt_s: f64,
    pub c_rate: f64,
    pub cv_cutoff_c_rate: f64,
}

impl Default for C20Protocol {
    fn default() -> Self {
        Self {
            dt_s: 10.0,
            c_rate: 0.05,
            cv_cutoff_c_rate: 0.001,
        }
    }
}

pub(super) fn emit_c20(
    params: &CellParams,
    temp_c: f64,
    capacity_ah: f64,
    protocol: &C20Protocol,
    start_s: f64,
) -> Result<(Vec<Sample>, Vec<StepLabel>)> {
    params.validate()?;
    if !(protocol.dt_s > 0.0 && protocol.c_rate > 0.0 && protocol.cv_cutoff_c_rate > 0.0) {
        return Err(Error::InvalidParameter(format!("invalid C/20 protocol {protocol:?}")));
    }
    if protocol.cv_cutoff_c_rate >= protocol.c_rate {
        return Err(Error::InvalidParameter("CV cutoff must be below the CC rate".into()));
    }
    if !(capacity_ah > 0.0) {
        return Err(Error::InvalidParameter("cell capacity has faded to zero".into()));
    }
    let r = params.resistance(temp_c);
    let i_cc = protocol.c_rate * params.q0_ah;
    let i_cut = protocol.cv_cutoff_c_rate * params.q0_ah;
    let mut plant = Plant::new(
        capacity_ah,
        r,
        (params.ocv_lo_v, params.ocv_hi_v),
        temp_c,
        protocol.dt_s,
        start_s,
        1.0,
    );
    let max_steps = (4.0 * 3600.0 * capacity_ah / i_cc / protocol.dt_s) as usize + 100;

    plant.emit(0.0, StepLabel::Rest);
    for (sign, label, v_cut) in [
        (-1.0, StepLabel::C20Dchg, params.ocv_lo_v),
        (1.0, StepLabel::C20Chg, params.ocv_hi_v),
    ] {
        plant.advance(sign * i_cc);
        let mut reached = false;
        for _ in 0..max_steps {
            let v = plant.emit(sign * i_cc, label);
            if sign * (v - v_cut) >= -EPS {
                reached = true;
                break;
            }
            plant.advance(sign * i_cc);
        }
        if !reached {
            return Err(Error::ImmediateCutoff("C/20 phase never reached its cutoff".into()));
        }
        if r > 0.0 {
            for _ in 0..max_steps {
                let i = plant.cv_current(v_cut);
                if sign * i <= i_cut {
                    break;
                }
                plant.advance(i);
                plant.emit(i, label);
            }
        }
        plant.advance(0.0);
        plant.emit(0.0, StepLabel::Rest);
    }
    Ok((plant.samples, plant.labels))
}

/// C/20 test at `temp_c` starting at t = 0 from 100 % SOC.
pub fn generate_c20_test(params: &CellParams, temp_c: f64, protocol: &C20Protocol) -> Result<TimeSeries> {
    let (samples, labels) = emit_c20(params, temp_c, true_capacity(params, temp_c), protocol, 0.0)?;
    TimeSeries::new("sim", samples, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{find_c20_spans, q_c20_charge_capacity};

    fn measured(p: &CellParams, temp: f64) -> (f64, f64) {
        let ts = generate_c20_test(p, temp, &C20Protocol::default()).unwrap();
        let (_, chg) = find_c20_spans(&ts, 0..ts.len()).unwrap();
        let s = ts.samples();
        let duration = s[chg.end - 1].time_s - s[chg.start].time_s;
        (q_c20_charge_capacity(&ts, chg).unwrap(), duration)
    }

    #[test]
    fn ideal_cell_charges_for_twenty_hours() {
        let p = CellParams { q0_ah: 20.0, r0_ohm: 0.0, ..Default::default() };
        let (q, duration) = measured(&p, 25.0);
        assert!((duration - 72000.0).abs() <= 10.0, "{duration}");
        assert!((q - 20.0).abs() <= 0.02, "{q}");
    }

    #[test]
    fn counted_capacity_matches_plant_with_resistance() {
        let p = CellParams { q0_ah: 20.0, r0_ohm: 0.004, ..Default::default() };
        for temp in [15.0, 25.0, 35.0] {
            let (q, _) = measured(&p, temp);
            let truth = true_capacity(&p, temp);
            assert!(((q - truth) / truth).abs() < 1e-3, "{q} vs {truth}");
        }
    }

    #[test]
    fn capacity_ratio_tracks_temperature() {
        let p = CellParams { q0_ah: 20.0, cap_temp_coeff: 0.005, ..Default::default() };
        let (q_ref, _) = measured(&p, 25.0);
        let (q_hot, _) = measured(&p, 35.0);
        assert!((q_hot / q_ref - 1.05).abs() <= 1e-3, "{}", q_hot / q_ref);
    }

    #[test]
    fn voltage_window_respected() {
        let p = CellParams { r0_ohm: 0.004, ..Default::default() };
        let ts = generate_c20_test(&p, 25.0, &C20Protocol::default()).unwrap();
        assert!(ts.samples().iter().all(|s| (2.9..=4.1).contains(&s.voltage_v)));
    }
}
