use crate::data::{Sample, StepLabel};

/// Ohmic plant whose current is piecewise linear between emitted samples.
/// SOC advances by the trapezoid of consecutive sample currents.
pub(super) struct Plant {
    capacity_ah: f64,
    r_ohm: f64,
    ocv_lo: f64,
    ocv_span: f64,
    temp_c: f64,
    dt_s: f64,
    start_s: f64,
    step: usize,
    pub soc: f64,
    last_current: f64,
    pub samples: Vec<Sample>,
    pub labels: Vec<StepLabel>,
}

impl Plant {
    pub fn new(capacity_ah: f64, r_ohm: f64, ocv: (f64, f64), temp_c: f64, dt_s: f64, start_s: f64, soc: f64) -> Self {
        Self {
            capacity_ah,
            r_ohm,
            ocv_lo: ocv.0,
            ocv_span: ocv.1 - ocv.0,
            temp_c,
            dt_s,
            start_s,
            step: 0,
            soc,
            last_current: 0.0,
            samples: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn ocv(&self) -> f64 {
        self.ocv_lo + self.ocv_span * self.soc
    }

    pub fn time(&self) -> f64 {
        self.start_s + self.step as f64 * self.dt_s
    }

    /// SOC gained per ampere over one step.
    fn soc_per_amp_step(&self) -> f64 {
        self.dt_s / (3600.0 * self.capacity_ah)
    }

    /// Emits a sample at the current state carrying `current_a`; returns the
    /// terminal voltage.
    pub fn emit(&mut self, current_a: f64, label: StepLabel) -> f64 {
        let v = self.ocv() + current_a * self.r_ohm;
        self.samples.push(Sample::new(self.time(), current_a, v, self.temp_c));
        self.labels.push(label);
        self.last_current = current_a;
        v
    }

    /// Moves one step forward, ramping the current to `next_a`.
    pub fn advance(&mut self, next_a: f64) {
        self.soc += 0.5 * (self.last_current + next_a) * self.soc_per_amp_step();
        self.step += 1;
    }

    /// Current that holds the terminal voltage at `v_hold` after the next
    /// step, solved implicitly with the trapezoidal SOC update.
    pub fn cv_current(&self, v_hold: f64) -> f64 {
        let h = self.soc_per_amp_step();
        let soc_partial = self.soc + 0.5 * self.last_current * h;
        (v_hold - self.ocv_lo - self.ocv_span * soc_partial) / (self.r_ohm + 0.5 * self.ocv_span * h)
    }
}
