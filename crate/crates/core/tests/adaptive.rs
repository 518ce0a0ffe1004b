use proptest::prelude::*;

use slsoh_core::adaptive::{
    adaptive_step, build_bank, run_stream, AdaptiveConfig, AdaptiveState, BankEntry, Trajectory, TrajectoryBank,
};
use slsoh_core::features::{FeatureVector, LabeledSnapshot};
use slsoh_core::pipeline::{extract_all, rank_stage, rows_of, train_stage, PipelineConfig};
use slsoh_core::regression::{enr_fit, metrics, EnrModel, EnrParams};
use slsoh_core::sim::simulate_campaign;

fn snapshot(cell: &str, k: usize, label: f64) -> LabeledSnapshot {
    let t = k as f64;
    LabeledSnapshot {
        cell_id: cell.to_string(),
        cycle_index: 30 * k,
        features: FeatureVector::from_array([20.0 + cell.len() as f64, 600.0 * t, 2200.0 * t, 0.002 + 1e-5 * t, 0.0021, 25.0 + t.sin()]),
        label_q_ch_c20_ah: label,
    }
}

fn linear_model(snaps: &[LabeledSnapshot]) -> EnrModel {
    let names: Vec<String> = ["q_ah_aging_ah", "t_aging_c"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<f64>> = snaps.iter().map(|s| names.iter().map(|n| s.features.get(n).unwrap()).collect()).collect();
    let y: Vec<f64> = snaps.iter().map(|s| s.label_q_ch_c20_ah).collect();
    enr_fit(&rows, &y, &names, &EnrParams { lambda: 1e-3, ..Default::default() }).unwrap().model
}

fn six_cells() -> Vec<LabeledSnapshot> {
    let mut out = Vec::new();
    for (c, cell) in ["a", "bb", "ccc", "dddd", "eeeee", "ffffff"].iter().enumerate() {
        for k in 0..6 {
            out.push(snapshot(cell, k, 20.0 + c as f64 * 0.4 - 0.1 * k as f64 + 0.3 * (k as f64).cos()));
        }
    }
    out
}

#[test]
fn six_training_cells_give_six_trajectories() {
    let snaps = six_cells();
    let bank = build_bank(&snaps, &linear_model(&snaps), &AdaptiveConfig::default(), 1).unwrap();
    assert_eq!(bank.trajectories.len(), 6);
    assert!(bank.trajectories.iter().all(|t| t.entries.len() == 6));
}

#[test]
fn perfect_model_stores_zero_residuals_and_stays_neutral() {
    let mut snaps = six_cells();
    let model = linear_model(&snaps);
    for s in &mut snaps {
        s.label_q_ch_c20_ah = model.enr_predict(&s.features).unwrap();
    }
    let bank = build_bank(&snaps, &model, &AdaptiveConfig::default(), 1).unwrap();
    assert!(bank.trajectories.iter().flat_map(|t| &t.entries).all(|e| e.residual_ah() == 0.0));
    let trace = run_stream(&snaps[..6], &model, &bank, &AdaptiveConfig::default()).unwrap();
    assert!(trace.iter().all(|r| r.adaptive_ah == r.offline_ah && r.correction_ah == 0.0));
}

/// Model, snapshots and config from a short default-fleet campaign.
fn short_campaign() -> (PipelineConfig, Vec<LabeledSnapshot>, EnrModel) {
    let mut cfg = PipelineConfig::default();
    cfg.simulate.months = 8;
    cfg.simulate.aging_dt_s = 30.0;
    let cells = simulate_campaign(&cfg.simulate, cfg.seed).unwrap();
    let snaps = extract_all(&cells, &cfg.extract).unwrap();
    let ranking = rank_stage(&snaps, &cfg).unwrap();
    let model = train_stage(&snaps, &ranking, &cfg).unwrap().fit.model;
    (cfg, snaps, model)
}

#[test]
fn bank_built_from_the_test_cell_itself_never_hurts() {
    let (cfg, snaps, model) = short_campaign();
    for cell in &cfg.split.test_cells {
        let stream: Vec<LabeledSnapshot> = rows_of(&snaps, std::slice::from_ref(cell)).into_iter().cloned().collect();
        let adaptive = AdaptiveConfig { clusters: 1, ..Default::default() };
        let bank = build_bank(&stream, &model, &adaptive, cfg.seed).unwrap();
        let trace = run_stream(&stream, &model, &bank, &adaptive).unwrap();
        let y: Vec<f64> = stream.iter().map(|s| s.label_q_ch_c20_ah).collect();
        let off = metrics(&trace.iter().map(|r| r.offline_ah).collect::<Vec<_>>(), &y).unwrap();
        let ada = metrics(&trace.iter().map(|r| r.adaptive_ah).collect::<Vec<_>>(), &y).unwrap();
        assert!(ada.mape_pct <= off.mape_pct, "{cell}: adaptive {} vs offline {}", ada.mape_pct, off.mape_pct);
    }
}

#[test]
fn zero_bound_reproduces_the_offline_trace() {
    let (cfg, snaps, model) = short_campaign();
    let train: Vec<LabeledSnapshot> = rows_of(&snaps, &cfg.split.train_cells).into_iter().cloned().collect();
    let adaptive = AdaptiveConfig { delta_max_ah: 0.0, ..Default::default() };
    let bank = build_bank(&train, &model, &adaptive, cfg.seed).unwrap();
    for cell in &cfg.split.test_cells {
        let stream: Vec<LabeledSnapshot> = rows_of(&snaps, std::slice::from_ref(cell)).into_iter().cloned().collect();
        for r in run_stream(&stream, &model, &bank, &adaptive).unwrap() {
            assert_eq!(r.adaptive_ah.to_bits(), r.offline_ah.to_bits());
        }
    }
}

fn entries() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((0.0f64..1e4, -1e3f64..1e3, 1.0f64..30.0, -50.0f64..50.0), 1..8)
}

fn bank_of(trajs: &[Vec<(f64, f64, f64, f64)>], zero_residual: bool, k: usize) -> TrajectoryBank {
    let trajectories = trajs
        .iter()
        .enumerate()
        .map(|(c, es)| Trajectory {
            cell_id: format!("c{c}"),
            entries: es
                .iter()
                .map(|&(q, p, off, res)| BankEntry {
                    throughput_ah: q,
                    point: vec![p],
                    offline_ah: off,
                    label_ah: if zero_residual { off } else { off + res },
                })
                .collect(),
        })
        .collect();
    TrajectoryBank::from_trajectories(trajectories, k, 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn estimates_stay_within_the_bound(
        trajs in prop::collection::vec(entries(), 1..5),
        stream in prop::collection::vec((-1e6f64..1e6, -1e4f64..1e4, -1e3f64..2e4), 1..30),
        k in 1usize..4,
        beta in 0.01f64..=1.0,
        delta in prop_oneof![Just(0.0), 0.0f64..1e-6, 0.0f64..10.0],
    ) {
        let bank = bank_of(&trajs, false, k);
        let mut state = AdaptiveState::new(beta, delta);
        for (offline, p, q) in stream {
            let est = adaptive_step(&mut state, offline, &[p], q, &bank);
            prop_assert!((est - offline).abs() <= delta);
            if delta == 0.0 {
                prop_assert_eq!(est.to_bits(), offline.to_bits());
            }
        }
    }

    #[test]
    fn zero_residual_bank_is_neutral(
        trajs in prop::collection::vec(entries(), 1..5),
        stream in prop::collection::vec((-1e3f64..1e3, -1e4f64..1e4, -1e3f64..2e4), 1..30),
    ) {
        let bank = bank_of(&trajs, true, 3);
        let mut state = AdaptiveState::new(0.3, 1.0);
        for (offline, p, q) in stream {
            prop_assert_eq!(adaptive_step(&mut state, offline, &[p], q, &bank), offline);
        }
    }

    #[test]
    fn running_residual_is_bounded_by_past_targets(
        targets in prop::collection::vec(-1e3f64..1e3, 1..50),
        beta in 0.0f64..=1.0,
    ) {
        let mut state = AdaptiveState::new(beta, 5.0);
        let mut worst = 0.0f64;
        for t in targets {
            worst = worst.max(t.abs());
            state.update(10.0, t);
            prop_assert!(state.residual_ah.abs() <= worst * (1.0 + 1e-12));
        }
    }

    #[test]
    fn offline_error_bound_carries_over(
        labels in prop::collection::vec(5.0f64..30.0, 1..30),
        errors in prop::collection::vec(-2.0f64..2.0, 30),
        targets in prop::collection::vec(-20.0f64..20.0, 30),
        delta in 0.0f64..3.0,
    ) {
        let e_max = errors.iter().take(labels.len()).fold(0.0f64, |m, e| m.max(e.abs()));
        let mut state = AdaptiveState::new(0.5, delta);
        for (k, y) in labels.iter().enumerate() {
            let (est, _) = state.update(y + errors[k], targets[k]);
            prop_assert!((est - y).abs() <= e_max + delta + 1e-12);
        }
    }
}
