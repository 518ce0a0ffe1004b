//! Deterministic synthetic cell and protocol generator.
//!
//! The plant is a linear open-circuit voltage over the derated window
//! (0 % SOC at `ocv_lo_v`, 100 % at `ocv_hi_v`) plus a series resistance,
//! with an optional RC branch that shapes the HPPC pulse response. Capacity
//! depends linearly on temperature and, optionally, fades with aging
//! throughput. Aging and C/20 generators treat current as piecewise linear
//! between samples, so a trapezoidal coulomb count of their output equals the
//! plant's own charge bookkeeping.

mod aging;
mod c20;
mod campaign;
mod hppc;
mod plant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use aging::{generate_aging_cycle, AgingCycleOutput, CycleBoundaries};
pub use c20::{generate_c20_test, C20Protocol};
pub use campaign::{
    default_fleet, simulate_campaign, CampaignConfig, CycleTruth, FleetCell, GroundTruth, RptTruth,
    SeasonalTemperature, SimulatedCell,
};
pub use hppc::{generate_hppc, HppcProtocol};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcBranch {
    pub r_ohm: f64,
    pub tau_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellParams {
    /// Capacity at the reference temperature, Ah. Also the 1C current in A.
    pub q0_ah: f64,
    pub r0_ohm: f64,
    /// Fractional resistance change per °C (negative for real cells).
    pub r0_temp_coeff: f64,
    /// Fractional capacity change per °C.
    pub cap_temp_coeff: f64,
    pub ocv_lo_v: f64,
    pub ocv_hi_v: f64,
    pub t_ref_c: f64,
    pub rc: Option<RcBranch>,
    /// Fractional capacity loss per Ah of aging throughput.
    pub fade_per_ah: f64,
}

impl Default for CellParams {
    fn default() -> Self {
        Self {
            q0_ah: 20.0,
            r0_ohm: 0.002,
            r0_temp_coeff: -0.012,
            cap_temp_coeff: 0.005,
            ocv_lo_v: 3.0,
            ocv_hi_v: 4.0,
            t_ref_c: 25.0,
            rc: None,
            fade_per_ah: 0.0,
        }
    }
}

impl CellParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.q0_ah > 0.0 && self.q0_ah.is_finite()) {
            return bad(format!("q0_ah = {} must be positive", self.q0_ah));
        }
        // Zero resistance is accepted as an idealised plant.
        if !(self.r0_ohm >= 0.0 && self.r0_ohm.is_finite()) {
            return bad(format!("r0_ohm = {} must be non-negative", self.r0_ohm));
        }
        if !(self.ocv_lo_v < self.ocv_hi_v) {
            return bad(format!("ocv window [{}, {}] is empty", self.ocv_lo_v, self.ocv_hi_v));
        }
        if let Some(rc) = self.rc {
            if !(rc.r_ohm >= 0.0 && rc.tau_s > 0.0) {
                return bad(format!("rc branch {rc:?} needs r >= 0 and tau > 0"));
            }
        }
        if !(self.fade_per_ah >= 0.0) {
            return bad(format!("fade_per_ah = {} must be non-negative", self.fade_per_ah));
        }
        Ok(())
    }

    fn resistance_scale(&self, temp_c: f64) -> f64 {
        (1.0 + self.r0_temp_coeff * (temp_c - self.t_ref_c)).max(0.05)
    }

    /// Series resistance at `temp_c`.
    pub fn resistance(&self, temp_c: f64) -> f64 {
        self.r0_ohm * self.resistance_scale(temp_c)
    }

    /// RC-branch resistance at `temp_c` (zero without a branch).
    pub fn rc_resistance(&self, temp_c: f64) -> f64 {
        self.rc.map_or(0.0, |rc| rc.r_ohm * self.resistance_scale(temp_c))
    }

    pub fn ocv(&self, soc: f64) -> f64 {
        self.ocv_lo_v + (self.ocv_hi_v - self.ocv_lo_v) * soc
    }
}

/// Capacity label of the plant at `temp_c`: `q0 · (1 + k · (T − T_ref))`,
/// floored at zero.
pub fn true_capacity(params: &CellParams, temp_c: f64) -> f64 {
    (params.q0_ah * (1.0 + params.cap_temp_coeff * (temp_c - params.t_ref_c))).max(0.0)
}

/// [`true_capacity`] after `throughput_ah` of aging, including the optional
/// linear fade.
pub fn true_capacity_after(params: &CellParams, temp_c: f64, throughput_ah: f64) -> f64 {
    (true_capacity(params, temp_c) * (1.0 - params.fade_per_ah * throughput_ah)).max(0.0)
}
