//! Trapezoidal integration over telemetry. Integrands are evaluated at the
//! samples and treated as piecewise linear in between, so interval endpoints
//! that fall between samples are handled by linear interpolation.

use std::ops::RangeInclusive;

use super::{Sample, TimeSeries};
use crate::error::{Error, Result};

const SECONDS_PER_HOUR: f64 = 3600.0;

/// Integral of `f(sample)` over `[a, b]` in units of `f · s`.
pub fn integrate_by<F>(series: &TimeSeries, a: f64, b: f64, f: F) -> Result<f64>
where
    F: Fn(&Sample) -> f64,
{
    let samples = series.samples();
    let (start, end) = (series.start_time(), series.end_time());
    if !(a < b) || a < start || b > end {
        return Err(Error::IntervalOutOfRange { a, b, start, end });
    }

    // First sample at or after a, last sample at or before b.
    let i = samples.partition_point(|s| s.time_s < a);
    let j = samples.partition_point(|s| s.time_s <= b) - 1;

    let value_at = |t: f64, k: usize| -> f64 {
        // t lies in [samples[k-1].time, samples[k].time]
        let (s0, s1) = (&samples[k - 1], &samples[k]);
        let w = (t - s0.time_s) / (s1.time_s - s0.time_s);
        let (f0, f1) = (f(s0), f(s1));
        f0 + (f1 - f0) * w
    };

    if i > j {
        // a and b share one sampling interval.
        let fa = value_at(a, i);
        let fb = value_at(b, i);
        return Ok(0.5 * (fa + fb) * (b - a));
    }

    let mut total = 0.0;
    if samples[i].time_s > a {
        let fa = value_at(a, i);
        total += 0.5 * (fa + f(&samples[i])) * (samples[i].time_s - a);
    }
    total += integrate_span_by(samples, i..=j, &f);
    if samples[j].time_s < b {
        let fb = value_at(b, j + 1);
        total += 0.5 * (f(&samples[j]) + fb) * (b - samples[j].time_s);
    }
    Ok(total)
}

/// Trapezoidal integral over the samples with indices in `span`.
pub fn integrate_span_by<F>(samples: &[Sample], span: RangeInclusive<usize>, f: F) -> f64
where
    F: Fn(&Sample) -> f64,
{
    let (lo, hi) = (*span.start(), *span.end());
    if hi <= lo {
        return 0.0;
    }
    let mut total = 0.0;
    let mut prev = f(&samples[lo]);
    for k in lo + 1..=hi {
        let cur = f(&samples[k]);
        total += 0.5 * (prev + cur) * (samples[k].time_s - samples[k - 1].time_s);
        prev = cur;
    }
    total
}

/// Charge throughput ∫|I| dt over `[a, b]`, in ampere-hours.
pub fn integrate_abs_current(series: &TimeSeries, a: f64, b: f64) -> Result<f64> {
    Ok(integrate_by(series, a, b, |s| s.current_a.abs())? / SECONDS_PER_HOUR)
}

/// Energy throughput ∫|I·V| dt over `[a, b]`, in watt-hours.
pub fn integrate_power(series: &TimeSeries, a: f64, b: f64) -> Result<f64> {
    Ok(integrate_by(series, a, b, |s| (s.current_a * s.voltage_v).abs())? / SECONDS_PER_HOUR)
}
