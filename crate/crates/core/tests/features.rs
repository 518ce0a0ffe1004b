use proptest::prelude::*;

use slsoh_core::data::{
    integrate_abs_current, AgingCycle, HppcRecord, IngestConfig, PulseEdge, Sample, SocLevel, TimeSeries,
};
use slsoh_core::features::{build_snapshots, e_ch_aging, hppc_resistances, q_ah_aging, t_aging, AlignmentConfig};
use slsoh_core::sim::{generate_aging_cycle, simulate_campaign, CampaignConfig, CellParams};

/// Gap between the last sample of one plateau and the first of the next.
const EPS: f64 = 1e-3;

/// A three-plateau cycle. Each plateau is `(current, duration, samples)`;
/// `volt` and `temp` map absolute time to voltage and temperature.
fn plateau_cycle(
    plateaus: [(f64, f64, usize); 3],
    volt: impl Fn(f64) -> f64,
    temp: impl Fn(f64) -> f64,
) -> (TimeSeries, AgingCycle) {
    let mut samples = Vec::new();
    let mut spans = Vec::new();
    let mut start = 0.0;
    for (k, (i, dur, n)) in plateaus.into_iter().enumerate() {
        let first = samples.len();
        if k > 0 {
            start += EPS;
        }
        for j in 0..=n {
            let t = start + dur * j as f64 / n as f64;
            samples.push(Sample::new(t, i, volt(t), temp(t)));
        }
        start += dur;
        spans.push(first..samples.len());
    }
    let ts = TimeSeries::new("t", samples, None).unwrap();
    let cycle = AgingCycle::from_spans(&ts, spans[0].clone(), spans[1].clone(), spans[2].clone()).unwrap();
    (ts, cycle)
}

fn standard(volt: impl Fn(f64) -> f64, temp: impl Fn(f64) -> f64) -> (TimeSeries, AgingCycle) {
    plateau_cycle([(-20.0, 1800.0, 30), (-10.0, 3600.0, 60), (10.0, 7200.0, 120)], volt, temp)
}

fn scaled(ts: &TimeSeries, ki: f64, kv: f64) -> TimeSeries {
    let samples = ts
        .samples()
        .iter()
        .map(|s| Sample::new(s.time_s, s.current_a * ki, s.voltage_v * kv, s.temperature_c))
        .collect();
    TimeSeries::new("t", samples, None).unwrap()
}

#[test]
fn plateaus_add_up_to_forty_amp_hours() {
    let (ts, c) = standard(|_| 3.7, |_| 25.0);
    assert!((q_ah_aging(&ts, &c) - 40.0).abs() < 1e-5, "{}", q_ah_aging(&ts, &c));
}

#[test]
fn zero_current_gives_zero_throughput() {
    let (ts, c) = standard(|_| 3.7, |_| 25.0);
    let zero: Vec<Sample> = ts.samples().iter().map(|s| Sample { current_a: 0.0, ..*s }).collect();
    let zero = TimeSeries::new("t", zero, None).unwrap();
    assert_eq!(q_ah_aging(&zero, &c), 0.0);
    assert_eq!(e_ch_aging(&zero, &c), 0.0);
}

#[test]
fn constant_power_charge_gives_eighty_watt_hours() {
    let (ts, c) = standard(|_| 4.0, |_| 25.0);
    assert!((e_ch_aging(&ts, &c) - 80.0).abs() < 1e-5, "{}", e_ch_aging(&ts, &c));
}

#[test]
fn segmented_throughput_matches_whole_interval_on_simulated_cycle() {
    let out = generate_aging_cycle(&CellParams::default(), 25.0, 1.0).unwrap();
    let cycles = slsoh_core::data::segment_aging_cycles(&out.series, &Default::default()).unwrap();
    let c = &cycles[0];
    let whole = integrate_abs_current(&out.series, c.t0_s, c.t3_s).unwrap();
    assert!((q_ah_aging(&out.series, c) - whole).abs() < 1e-9);
}

fn with_temperatures(ts: &TimeSeries, temp: impl Fn(usize, f64) -> f64) -> TimeSeries {
    let samples = ts
        .samples()
        .iter()
        .enumerate()
        .map(|(k, s)| Sample { temperature_c: temp(k, s.time_s), ..*s })
        .collect();
    TimeSeries::new("t", samples, None).unwrap()
}

#[test]
fn constant_temperature_is_returned_unchanged() {
    let (ts, c) = standard(|_| 3.7, |_| 25.0);
    assert!((t_aging(&ts, &c) - 25.0).abs() < 1e-12);
}

#[test]
fn two_equal_halves_average_to_the_midpoint() {
    // Sample 61 sits at the exact middle of the cycle with uniform spacing
    // on both sides.
    let (ts, c) = plateau_cycle([(-20.0, 1800.0, 30), (-10.0, 3600.0, 60), (10.0, 1800.0, 30)], |_| 3.7, |_| 0.0);
    let ts = with_temperatures(&ts, |k, _| match k.cmp(&61) {
        std::cmp::Ordering::Less => 20.0,
        std::cmp::Ordering::Equal => 25.0,
        std::cmp::Ordering::Greater => 30.0,
    });
    assert!((t_aging(&ts, &c) - 25.0).abs() < 1e-9, "{}", t_aging(&ts, &c));
}

#[test]
fn linear_temperature_on_nonuniform_grid_averages_to_midpoint() {
    let (ts, c) = plateau_cycle([(-20.0, 1800.0, 7), (-10.0, 3600.0, 50), (10.0, 7200.0, 33)], |_| 3.7, |_| 0.0);
    let end = ts.end_time();
    let ts = with_temperatures(&ts, |_, t| 20.0 + 10.0 * t / end);
    assert!((t_aging(&ts, &c) - 25.0).abs() < 1e-9, "{}", t_aging(&ts, &c));
}

#[test]
fn ohms_law_hand_case_and_division_guard() {
    let edge = |dv: f64, di: f64, soc| PulseEdge { time_s: 0.0, delta_v: dv, delta_i: di, soc };
    let rec = HppcRecord {
        time_s: 0.0,
        cycle_index: 0,
        charge_low: edge(0.1, 20.0, SocLevel::Low),
        discharge_high: edge(-0.1, -20.0, SocLevel::High),
    };
    let r = hppc_resistances(&rec, 0.1).unwrap();
    assert!((r.charge_low_ohm - 0.005).abs() < 1e-15);
    assert!((r.discharge_high_ohm - 0.005).abs() < 1e-15);
    let flat = HppcRecord { charge_low: edge(0.1, 0.0, SocLevel::Low), ..rec };
    assert!(hppc_resistances(&flat, 0.1).is_err());
}

fn short_campaign(days: f64, rpt_every: u32) -> CampaignConfig {
    CampaignConfig { months: 1, days_per_month: days, rpt_every_n_cycles: rpt_every, aging_dt_s: 30.0, ..Default::default() }
}

#[test]
fn two_rpts_around_a_block_of_cycles() {
    let mut cfg = short_campaign(100.0, 100);
    cfg.fleet.truncate(1);
    let cell = simulate_campaign(&cfg, 3).unwrap().remove(0);
    let ds = cell.dataset(&IngestConfig::default()).unwrap();
    let snaps = build_snapshots(&ds, &AlignmentConfig::default()).unwrap();
    assert_eq!(snaps.len(), 2);
    let (a, b) = (&snaps[0].features, &snaps[1].features);
    assert_eq!(a.q_ah_aging_ah, 0.0);
    assert_eq!(a.e_ch_aging_wh, 0.0);
    assert_eq!(snaps[1].cycle_index, ds.cycles.len());
    assert!(ds.cycles.len() >= 90);
    assert!(b.q_ah_aging_ah > a.q_ah_aging_ah && b.e_ch_aging_wh > a.e_ch_aging_wh);
}

#[test]
fn snapshot_labels_track_plant_capacity() {
    let cfg = short_campaign(60.0, 15);
    for cell in simulate_campaign(&cfg, 11).unwrap() {
        let ds = cell.dataset(&IngestConfig::default()).unwrap();
        let snaps = build_snapshots(&ds, &AlignmentConfig::default()).unwrap();
        assert_eq!(snaps.len(), cell.truth.rpts.len());
        for (s, t) in snaps.iter().zip(&cell.truth.rpts) {
            assert_eq!(s.cycle_index, t.cycle_index);
            let rel = (s.label_q_ch_c20_ah - t.true_capacity_ah).abs() / t.true_capacity_ah;
            assert!(rel < 1e-3, "{} cycle {}: rel {rel}", cell.cell_id, s.cycle_index);
        }
        for w in snaps.windows(2) {
            assert!(w[1].features.q_ah_aging_ah > w[0].features.q_ah_aging_ah);
            assert!(w[1].features.e_ch_aging_wh > w[0].features.e_ch_aging_wh);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn current_and_voltage_scaling(ki in 0.1f64..10.0, kv in 0.8f64..1.4) {
        let (ts, c) = standard(|t| 3.0 + t / 20000.0, |_| 25.0);
        let (q, e) = (q_ah_aging(&ts, &c), e_ch_aging(&ts, &c));
        let si = scaled(&ts, ki, 1.0);
        prop_assert!((q_ah_aging(&si, &c) - ki * q).abs() <= 1e-12 * ki * q);
        prop_assert!((e_ch_aging(&si, &c) - ki * e).abs() <= 1e-12 * ki * e);
        let sv = scaled(&ts, 1.0, kv);
        prop_assert_eq!(q_ah_aging(&sv, &c), q);
        prop_assert!((e_ch_aging(&sv, &c) - kv * e).abs() <= 1e-12 * kv * e);
    }

    #[test]
    fn charge_energy_ignores_discharge_perturbations(
        di in prop::collection::vec(0.5f64..2.0, 92),
        dv in prop::collection::vec(-0.3f64..0.3, 92),
    ) {
        let (ts, c) = standard(|_| 3.6, |_| 25.0);
        let e = e_ch_aging(&ts, &c);
        let end = c.segment2.end;
        let samples: Vec<Sample> = ts
            .samples()
            .iter()
            .enumerate()
            .map(|(k, s)| if k < end { Sample { current_a: s.current_a * di[k], voltage_v: s.voltage_v + dv[k], ..*s } } else { *s })
            .collect();
        let perturbed = TimeSeries::new("t", samples, None).unwrap();
        prop_assert_eq!(e_ch_aging(&perturbed, &c), e);
    }
}
