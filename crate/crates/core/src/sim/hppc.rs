use serde::{Deserialize, Serialize};

use super::{true_capacity, CellParams};
use crate::data::{Sample, StepLabel, TimeSeries};
use crate::error::{Error, Result};

/// Charge-portion HPPC schedule. Starting empty, the cell is charged at
/// `charge_c_rate` to each SOC setpoint, where a discharge pulse and a charge
/// pulse are applied with rests around them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HppcProtocol {
    pub dt_s: f64,
    pub pulse_c_rate: f64,
    pub pulse_duration_s: f64,
    pub rest_s: f64,
    pub charge_c_rate: f64,
    pub low_soc: f64,
    pub high_soc: f64,
}

impl Default for HppcProtocol {
    fn default() -> Self {
        Self {
            dt_s: 1.0,
            pulse_c_rate: 1.0,
            pulse_duration_s: 3.0,
            rest_s: 60.0,
            charge_c_rate: 0.5,
            low_soc: 0.2,
            high_soc: 0.8,
        }
    }
}

impl HppcProtocol {
    fn validate(&self) -> Result<()> {
        let ok = self.dt_s > 0.0
            && self.pulse_c_rate > 0.0
            && self.pulse_duration_s >= self.dt_s
            && self.rest_s >= self.dt_s
            && self.charge_c_rate > 0.0
            && 0.0 < self.low_soc
            && self.low_soc < self.high_soc
            && self.high_soc < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid HPPC protocol {self:?}")))
        }
    }
}

/// Step-driven plant with an RC branch. The current of each sample is the
/// one applied over the preceding interval, so pulse edges are sharp.
struct PulsePlant<'a> {
    params: &'a CellParams,
    capacity_ah: f64,
    r0: f64,
    r_ct: f64,
    decay: f64,
    temp_c: f64,
    dt_s: f64,
    start_s: f64,
    step: usize,
    soc: f64,
    v_rc: f64,
    samples: Vec<Sample>,
    labels: Vec<StepLabel>,
}

impl PulsePlant<'_> {
    /// Applies `current_a` over one interval and records the state at its
    /// end. Pulse charge is not booked against SOC, so the open-circuit
    /// voltage stays at its pre-pulse value for the whole pulse.
    fn push(&mut self, current_a: f64, label: StepLabel, book_charge: bool) {
        if !self.samples.is_empty() {
            self.step += 1;
            if book_charge {
                self.soc += current_a * self.dt_s / (3600.0 * self.capacity_ah);
            }
            self.v_rc = self.v_rc * self.decay + current_a * self.r_ct * (1.0 - self.decay);
        }
        let v = self.params.ocv(self.soc) + current_a * self.r0 + self.v_rc;
        let t = self.start_s + self.step as f64 * self.dt_s;
        self.samples.push(Sample::new(t, current_a, v, self.temp_c));
        self.labels.push(label);
    }

    fn rest(&mut self, seconds: f64) {
        for _ in 0..steps(seconds, self.dt_s) {
            self.push(0.0, StepLabel::Rest, true);
        }
    }

    fn pulse(&mut self, current_a: f64, seconds: f64) {
        for _ in 0..steps(seconds, self.dt_s) {
            self.push(current_a, StepLabel::Hppc, false);
        }
    }

    fn charge_to(&mut self, soc: f64, current_a: f64) {
        while self.soc < soc {
            self.push(current_a, StepLabel::Hppc, true);
        }
    }
}

fn steps(seconds: f64, dt_s: f64) -> usize {
    ((seconds / dt_s).round() as usize).max(1)
}

pub(super) fn emit_hppc(
    params: &CellParams,
    temp_c: f64,
    capacity_ah: f64,
    protocol: &HppcProtocol,
    start_s: f64,
) -> Result<(Vec<Sample>, Vec<StepLabel>)> {
    params.validate()?;
    protocol.validate()?;
    if !(capacity_ah > 0.0) {
        return Err(Error::InvalidParameter("cell capacity has faded to zero".into()));
    }
    let decay = params.rc.map_or(0.0, |rc| (-protocol.dt_s / rc.tau_s).exp());
    let mut plant = PulsePlant {
        params,
        capacity_ah,
        r0: params.resistance(temp_c),
        r_ct: params.rc_resistance(temp_c),
        decay,
        temp_c,
        dt_s: protocol.dt_s,
        start_s,
        step: 0,
        soc: 0.0,
        v_rc: 0.0,
        samples: Vec::new(),
        labels: Vec::new(),
    };
    let pulse_a = protocol.pulse_c_rate * params.q0_ah;
    let charge_a = protocol.charge_c_rate * params.q0_ah;

    plant.rest(protocol.rest_s);
    for setpoint in [protocol.low_soc, protocol.high_soc] {
        plant.charge_to(setpoint, charge_a);
        plant.rest(protocol.rest_s);
        plant.pulse(-pulse_a, protocol.pulse_duration_s);
        plant.rest(protocol.rest_s);
        plant.pulse(pulse_a, protocol.pulse_duration_s);
        plant.rest(protocol.rest_s);
    }
    Ok((plant.samples, plant.labels))
}

/// Charge-portion HPPC test at `temp_c`, starting at t = 0 from 0 % SOC.
pub fn generate_hppc(params: &CellParams, temp_c: f64, protocol: &HppcProtocol) -> Result<TimeSeries> {
    let (samples, labels) = emit_hppc(params, temp_c, true_capacity(params, temp_c), protocol, 0.0)?;
    TimeSeries::new("sim", samples, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{HppcConfig, HppcRecord};
    use crate::sim::RcBranch;

    fn extract(ts: &TimeSeries) -> HppcRecord {
        HppcRecord::extract(ts, 0..ts.len(), 0, &HppcConfig::default()).unwrap()
    }

    #[test]
    fn ohmic_plant_yields_r0() {
        let p = CellParams { r0_ohm: 0.004, rc: None, ..Default::default() };
        let ts = generate_hppc(&p, 25.0, &HppcProtocol::default()).unwrap();
        let rec = extract(&ts);
        let r_low = rec.charge_low.delta_v / rec.charge_low.delta_i;
        let r_high = rec.discharge_high.delta_v / rec.discharge_high.delta_i;
        assert!((r_low - 0.004).abs() < 1e-12, "{r_low}");
        assert!((r_high - 0.004).abs() < 1e-12, "{r_high}");
    }

    #[test]
    fn relaxation_follows_first_order_step_response() {
        let rc = RcBranch { r_ohm: 0.002, tau_s: 5.0 };
        let p = CellParams { r0_ohm: 0.004, rc: Some(rc), ..Default::default() };
        let ts = generate_hppc(&p, 25.0, &HppcProtocol::default()).unwrap();
        let rec = extract(&ts);
        let expected = 0.004 + 0.002 * (1.0 - (-2.0f64 / 5.0).exp());
        for edge in [rec.charge_low, rec.discharge_high] {
            let r = edge.delta_v / edge.delta_i;
            assert!(((r - expected) / expected).abs() < 1e-5, "{r} vs {expected}");
        }
    }

    #[test]
    fn both_polarities_present_and_voltages_bounded() {
        let ts = generate_hppc(&CellParams::default(), 15.0, &HppcProtocol::default()).unwrap();
        let rec = extract(&ts);
        assert!(rec.charge_low.delta_i > 0.0);
        assert!(rec.discharge_high.delta_i < 0.0);
        assert!(ts.samples().iter().all(|s| (2.9..=4.1).contains(&s.voltage_v)));
    }
}
