//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Set `SLSOH_REAL_TELEMETRY` to a directory laid out like the `telemetry/`
//! output of `slsoh simulate` to also report metrics on real data.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slsoh_core::adaptive::{build_bank, run_stream, AdaptiveConfig, AdaptiveState, BankEntry, Trajectory, TrajectoryBank};
use slsoh_core::data::{integrate_abs_current, HppcConfig, HppcRecord};
use slsoh_core::features::{e_ch_aging, hppc_resistances, q_ah_aging, LabeledSnapshot};
use slsoh_core::pipeline::{extract_all, rank_stage, rows_of, run_all, train_stage, Layout, PipelineConfig};
use slsoh_core::regression::{enr_fit, metrics, EnrModel, EnrParams};
use slsoh_core::selection::{mrmr_rank, mutual_information, MutualInfoConfig};
use slsoh_core::sim::{generate_aging_cycle, generate_hppc, simulate_campaign, CellParams, HppcProtocol, SimulatedCell};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

// ---------------------------------------------------------------- criterion 1

fn metric_exactness() -> Outcome {
    let m = metrics(&[11.0, 18.0], &[10.0, 20.0]).map_err(e)?;
    ensure((m.rmse_ah - 2.5f64.sqrt()).abs() < 1e-9, format!("rmse {}", m.rmse_ah))?;
    ensure((m.rmse_ah - 1.5811).abs() < 1e-4, format!("rmse {}", m.rmse_ah))?;
    ensure((m.rmspe_pct - 10.0).abs() < 1e-9, format!("rmspe {}", m.rmspe_pct))?;
    ensure((m.mape_pct - 10.0).abs() < 1e-9, format!("mape {}", m.mape_pct))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.random_range(1..50);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..40.0)).collect();
        let r = metrics(&y, &y).map_err(e)?;
        ensure(r.rmse_ah == 0.0 && r.rmspe_pct == 0.0 && r.mape_pct == 0.0, "identity not zero")?;
    }
    Ok(format!("rmse {:.4} Ah, rmspe {:.1} %, mape {:.1} %", m.rmse_ah, m.rmspe_pct, m.mape_pct))
}

// ---------------------------------------------------------------- criterion 2

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Raw-space coefficients `[intercept, β…]` of a standardized model.
fn raw_coefficients(model: &EnrModel) -> Vec<f64> {
    let s = &model.standardizer;
    let beta: Vec<f64> = model.weights.iter().zip(&s.stds).map(|(w, sd)| w / sd).collect();
    let b0 = model.intercept - beta.iter().zip(&s.means).map(|(b, m)| b * m).sum::<f64>();
    std::iter::once(b0).chain(beta).collect()
}

fn enr_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let names: Vec<String> = (0..6).map(|k| format!("x{k}")).collect();
    let params = EnrParams { lambda: 0.0, alpha: 0.5, tol: 1e-13, max_iter: 1_000_000 };
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..6).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() + rng.random_range(-1.0..1.0) + 5.0).collect();
        let fit = enr_fit(&rows, &y, &names, &params).map_err(e)?;
        // Normal equations with an intercept column.
        let design: Vec<Vec<f64>> = rows.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect();
        let p = 7;
        let xtx: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| design.iter().map(|d| d[i] * d[j]).sum()).collect()).collect();
        let xty: Vec<f64> = (0..p).map(|i| design.iter().zip(&y).map(|(d, t)| d[i] * t).sum()).collect();
        let ols = solve(xtx, xty);
        for (a, b) in raw_coefficients(&fit.model).iter().zip(&ols) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst < 1e-6, format!("OLS max coefficient error {worst:e}"))?;

    let mut ridge_worst = 0.0f64;
    for lambda in [0.01, 0.3, 2.0] {
        let x: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random_range(-2.0..5.0)]).collect();
        let y: Vec<f64> = x.iter().map(|r| 0.7 * r[0] + rng.random_range(-1.0..1.0)).collect();
        let fit = enr_fit(&x, &y, &names[..1], &EnrParams { lambda, alpha: 0.0, tol: 1e-14, max_iter: 1000 }).map_err(e)?;
        let m = x.len() as f64;
        let mean_x = x.iter().map(|r| r[0]).sum::<f64>() / m;
        let sd = (x.iter().map(|r| (r[0] - mean_x).powi(2)).sum::<f64>() / m).sqrt();
        let mean_y = y.iter().sum::<f64>() / m;
        let z: Vec<f64> = x.iter().map(|r| (r[0] - mean_x) / sd).collect();
        let zy = z.iter().zip(&y).map(|(a, b)| a * (b - mean_y)).sum::<f64>() / m;
        let zz = z.iter().map(|a| a * a).sum::<f64>() / m;
        let w = zy / (zz + lambda);
        ridge_worst = ridge_worst.max((fit.model.weights[0] - w).abs());
    }
    ensure(ridge_worst < 1e-9, format!("ridge closed-form error {ridge_worst:e}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("OLS err {worst:.1e}, ridge err {ridge_worst:.1e}, {:.2} s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------- criterion 3

/// Midpoint Riemann sum of `f` over a series whose samples are joined by
/// straight lines, with `sub` subintervals per sampling interval.
fn dense_riemann(samples: &[slsoh_core::data::Sample], lo: usize, hi: usize, sub: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let mut total = 0.0;
    for k in lo..hi {
        let (a, b) = (&samples[k], &samples[k + 1]);
        let h = (b.time_s - a.time_s) / sub as f64;
        for s in 0..sub {
            let w = (s as f64 + 0.5) / sub as f64;
            let i = a.current_a + (b.current_a - a.current_a) * w;
            let v = a.voltage_v + (b.voltage_v - a.voltage_v) * w;
            total += f(i, v) * h;
        }
    }
    total / 3600.0
}

fn feature_analytics() -> Outcome {
    let params = CellParams { q0_ah: 20.0, r0_ohm: 0.002, ..Default::default() };
    let out = generate_aging_cycle(&params, 28.0, 1.0).map_err(e)?;
    let cycles = slsoh_core::data::segment_aging_cycles(&out.series, &Default::default()).map_err(e)?;
    ensure(cycles.len() == 1, format!("{} cycles", cycles.len()))?;
    let c = &cycles[0];
    let s = out.series.samples();
    let q = q_ah_aging(&out.series, c);
    let q_oracle = dense_riemann(s, *c.whole().start(), *c.whole().end(), 50, |i, _| i.abs());
    let q_whole = integrate_abs_current(&out.series, c.t0_s, c.t3_s).map_err(e)?;
    let e_ch = e_ch_aging(&out.series, c);
    let e_oracle = dense_riemann(s, *c.interval3().start(), *c.interval3().end(), 50, |i, v| i.max(0.0) * v);
    let q_rel = ((q - q_oracle) / q_oracle).abs();
    let e_rel = ((e_ch - e_oracle) / e_oracle).abs();
    ensure(q_rel < 1e-4, format!("Q_Ah rel err {q_rel:e}"))?;
    ensure((q - q_whole).abs() < 1e-9, format!("segmented {q} vs whole {q_whole}"))?;
    ensure(e_rel < 1e-4, format!("E_ch rel err {e_rel:e}"))?;

    let ohmic = CellParams { r0_ohm: 0.004, rc: None, ..Default::default() };
    let ts = generate_hppc(&ohmic, 25.0, &HppcProtocol::default()).map_err(e)?;
    let rec = HppcRecord::extract(&ts, 0..ts.len(), 0, &HppcConfig::default()).map_err(e)?;
    let r = hppc_resistances(&rec, 0.1).map_err(e)?;
    let r_rel = ((r.charge_low_ohm - 0.004) / 0.004).abs().max(((r.discharge_high_ohm - 0.004) / 0.004).abs());
    ensure(r_rel < 1e-6, format!("HPPC rel err {r_rel:e}"))?;
    Ok(format!("Q_Ah rel err {q_rel:.1e}, E_ch rel err {e_rel:.1e}, R0 rel err {r_rel:.1e}"))
}

// ---------------------------------------------------------------- criterion 4

fn mrmr_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 400;
    let cfg = MutualInfoConfig::default();
    let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let noise: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let ranked = mrmr_rank(&["noise".into(), "y_copy".into()], &[noise, y.clone()], &y, &cfg).map_err(e)?;
    ensure(ranked[0].feature_name == "y_copy", "target copy not ranked first")?;

    // y = u + v; A tracks u closely, A' duplicates A, W is v.
    let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let target: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
    let a: Vec<f64> = u.iter().map(|x| x + 0.01 * rng.random::<f64>()).collect();
    let names: Vec<String> = vec!["y_copy".into(), "y_copy_duplicate".into(), "weak_predictor".into()];
    let cols = vec![a.clone(), a.clone(), v.clone()];
    let ranked = mrmr_rank(&names, &cols, &target, &cfg).map_err(e)?;

    // Exhaustive evaluation of the greedy objective on the 3-feature instance.
    let mi = |x: &[f64], z: &[f64]| mutual_information(x, z, cfg.bins).unwrap();
    let rel: Vec<f64> = cols.iter().map(|c| mi(c, &target)).collect();
    let mut order = Vec::new();
    let mut left: Vec<usize> = vec![0, 1, 2];
    while !left.is_empty() {
        let score = |k: usize| {
            if order.is_empty() {
                rel[k]
            } else {
                rel[k] - order.iter().map(|&s: &usize| mi(&cols[k], &cols[s])).sum::<f64>() / order.len() as f64
            }
        };
        let best = *left
            .iter()
            .max_by(|&&p, &&q| score(p).total_cmp(&score(q)).then(names[q].cmp(&names[p])))
            .unwrap();
        order.push(best);
        left.retain(|&k| k != best);
    }
    let expected: Vec<&str> = order.iter().map(|&k| names[k].as_str()).collect();
    let got: Vec<&str> = ranked.iter().map(|r| r.feature_name.as_str()).collect();
    ensure(got == expected, format!("greedy order {got:?} vs oracle {expected:?}"))?;
    let pos = |n: &str| got.iter().position(|g| *g == n).unwrap();
    ensure(pos("y_copy_duplicate") > pos("weak_predictor"), format!("duplicate not demoted: {got:?}"))?;

    for _ in 0..1000 {
        let len = rng.random_range(4..80);
        let bins = rng.random_range(2..12);
        let x: Vec<f64> = (0..len).map(|_| (rng.random_range(-5.0f64..5.0)).round()).collect();
        let z: Vec<f64> = (0..len).map(|_| rng.random_range(-1e3..1e3)).collect();
        let (a, b) = (mutual_information(&x, &z, bins).map_err(e)?, mutual_information(&z, &x, bins).map_err(e)?);
        ensure(a == b, format!("asymmetric MI {a} vs {b}"))?;
        ensure(a >= 0.0, format!("negative MI {a}"))?;
    }
    Ok(format!("order {got:?}"))
}

// ---------------------------------------------------------------- criterion 5

struct Campaign {
    cfg: PipelineConfig,
    cells: Vec<SimulatedCell>,
    snapshots: Vec<LabeledSnapshot>,
    model: EnrModel,
    elapsed: Duration,
}

fn run_campaign() -> Result<Campaign, String> {
    let start = Instant::now();
    let cfg = PipelineConfig::default();
    let cells = simulate_campaign(&cfg.simulate, cfg.seed).map_err(e)?;
    let snapshots = extract_all(&cells, &cfg.extract).map_err(e)?;
    let ranking = rank_stage(&snapshots, &cfg).map_err(e)?;
    let model = train_stage(&snapshots, &ranking, &cfg).map_err(e)?.fit.model;
    Ok(Campaign { cfg, cells, snapshots, model, elapsed: start.elapsed() })
}

fn end_to_end(c: &Campaign) -> Outcome {
    let s = &c.cfg.simulate;
    ensure(c.cells.len() == 8 && s.months == 15 && s.season.amplitude_c == 8.0, "campaign differs from the criterion")?;
    let mut truth: BTreeMap<(String, usize), f64> = BTreeMap::new();
    for cell in &c.cells {
        for r in &cell.truth.rpts {
            truth.insert((cell.cell_id.clone(), r.cycle_index), r.true_capacity_ah);
        }
    }
    let test = rows_of(&c.snapshots, &c.cfg.split.test_cells);
    ensure(test.len() >= 20, format!("only {} test snapshots", test.len()))?;
    let mut y = Vec::new();
    let mut y_hat = Vec::new();
    for snap in &test {
        let t = truth
            .get(&(snap.cell_id.clone(), snap.cycle_index))
            .ok_or_else(|| format!("no ground truth for {} at cycle {}", snap.cell_id, snap.cycle_index))?;
        y.push(*t);
        y_hat.push(c.model.enr_predict(&snap.features).map_err(e)?);
    }
    let m = metrics(&y_hat, &y).map_err(e)?;
    let train_rows = rows_of(&c.snapshots, &c.cfg.split.train_cells).len();
    ensure(m.mape_pct <= 2.5, format!("test MAPE {:.3} %", m.mape_pct))?;
    ensure(c.elapsed <= Duration::from_secs(60), format!("run took {:?}", c.elapsed))?;
    Ok(format!(
        "test MAPE {:.3} %, RMSPE {:.3} %, RMSE {:.3} Ah over {} snapshots ({train_rows} train), {:.1} s",
        m.mape_pct,
        m.rmspe_pct,
        m.rmse_ah,
        m.n,
        c.elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- criterion 6

fn random_bank(rng: &mut ChaCha8Rng) -> TrajectoryBank {
    let cells = rng.random_range(1..5);
    let dim = rng.random_range(1..3);
    let scale = 10f64.powi(rng.random_range(-3..4));
    let trajectories = (0..cells)
        .map(|c| Trajectory {
            cell_id: format!("c{c}"),
            entries: (0..rng.random_range(1..8))
                .map(|_| BankEntry {
                    throughput_ah: rng.random_range(0.0..1e4),
                    point: (0..dim).map(|_| rng.random_range(-1e3..1e3)).collect(),
                    offline_ah: rng.random_range(1.0..30.0),
                    label_ah: rng.random_range(1.0..30.0) + rng.random_range(-1.0..1.0) * scale,
                })
                .collect(),
        })
        .collect();
    TrajectoryBank::from_trajectories(trajectories, rng.random_range(1..5), rng.random()).unwrap()
}

fn adaptive_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut steps = 0usize;
    for trial in 0..10_000 {
        let bank = random_bank(&mut rng);
        let dim = bank.trajectories[0].entries[0].point.len();
        let delta = match trial % 4 {
            0 => 0.0,
            1 => rng.random_range(0.0..1e-6),
            _ => rng.random_range(0.0..5.0),
        };
        let beta = rng.random_range(0.01..=1.0);
        let mut state = AdaptiveState::new(beta, delta);
        for _ in 0..rng.random_range(1..20) {
            let offline = rng.random_range(-1e3..1e3) * 10f64.powi(rng.random_range(-2..3));
            let point: Vec<f64> = (0..dim).map(|_| rng.random_range(-1e4..1e4)).collect();
            let key = rng.random_range(-100.0..2e4);
            let est = slsoh_core::adaptive::adaptive_step(&mut state, offline, &point, key, &bank);
            ensure((est - offline).abs() <= delta, format!("|{est} - {offline}| > {delta}"))?;
            if delta == 0.0 {
                ensure(est.to_bits() == offline.to_bits(), format!("delta 0 changed {offline} to {est}"))?;
            }
            steps += 1;
        }
    }
    Ok(format!("10000 triples, {steps} steps within bound"))
}

// ---------------------------------------------------------------- criterion 7

fn adaptive_improvement(c: &Campaign) -> Outcome {
    let mut biased = c.model.clone();
    for w in &mut biased.weights {
        *w *= 1.03;
    }
    biased.intercept *= 1.03;
    let train: Vec<LabeledSnapshot> = rows_of(&c.snapshots, &c.cfg.split.train_cells).into_iter().cloned().collect();
    let bank = build_bank(&train, &biased, &AdaptiveConfig::default(), c.cfg.seed).map_err(e)?;
    let mut lines = Vec::new();
    let mut improved = true;
    for cell in &c.cfg.split.test_cells {
        let stream: Vec<LabeledSnapshot> = rows_of(&c.snapshots, std::slice::from_ref(cell)).into_iter().cloned().collect();
        let trace = run_stream(&stream, &biased, &bank, &AdaptiveConfig::default()).map_err(e)?;
        let y: Vec<f64> = stream.iter().map(|s| s.label_q_ch_c20_ah).collect();
        let off: Vec<f64> = trace.iter().map(|r| r.offline_ah).collect();
        let ada: Vec<f64> = trace.iter().map(|r| r.adaptive_ah).collect();
        let (mo, ma) = (metrics(&off, &y).map_err(e)?.mape_pct, metrics(&ada, &y).map_err(e)?.mape_pct);
        improved &= ma < mo;
        lines.push(format!("{cell}: offline {mo:.2} % -> adaptive {ma:.2} %"));
    }
    ensure(improved, lines.join("; "))?;
    Ok(lines.join("; "))
}

// ---------------------------------------------------------------- criterion 8

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(first: &Campaign) -> Outcome {
    let again = run_campaign()?;
    ensure(again.snapshots == first.snapshots, "default campaign snapshots differ between runs")?;
    ensure(again.model == first.model, "default campaign models differ between runs")?;
    let mut cfg = PipelineConfig::default();
    cfg.simulate.months = 4;
    cfg.simulate.rpt_every_n_cycles = 10;
    let a = tempfile::tempdir().map_err(e)?;
    let b = tempfile::tempdir().map_err(e)?;
    run_all(&cfg, &Layout::new(a.path())).map_err(e)?;
    run_all(&cfg, &Layout::new(b.path())).map_err(e)?;
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    ensure(ta.keys().eq(tb.keys()), "different file sets")?;
    for (k, v) in &ta {
        ensure(tb[k] == *v, format!("{k} differs"))?;
    }
    let bytes: usize = ta.values().map(Vec::len).sum();
    Ok(format!("default campaign identical in memory; {} files, {bytes} bytes identical on disk", ta.len()))
}

// ---------------------------------------------------------------- real data

fn real_data(dir: &Path) -> Result<String, String> {
    use slsoh_core::pipeline::{cmd_evaluate, cmd_extract, cmd_rank, cmd_train};
    let out = tempfile::tempdir().map_err(e)?;
    let link = out.path().join("telemetry");
    copy_dir(dir, &link).map_err(e)?;
    let cfg = PipelineConfig::default();
    let layout = Layout::new(out.path());
    cmd_extract(&cfg, &layout).map_err(e)?;
    cmd_rank(&cfg, &layout).map_err(e)?;
    cmd_train(&cfg, &layout).map_err(e)?;
    let report = cmd_evaluate(&cfg, &layout).map_err(e)?;
    Ok(report.to_string())
}

fn copy_dir(from: &Path, to: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(to)?;
    for entry in std::fs::read_dir(from)? {
        let p = entry?.path();
        let target = to.join(p.file_name().unwrap());
        if p.is_dir() {
            copy_dir(&p, &target)?;
        } else {
            std::fs::copy(&p, &target)?;
        }
    }
    Ok(())
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("[PASS] {id}. {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id}. {name}: {detail}");
            }
        }
    };
    report(1, "metric exactness", metric_exactness());
    report(2, "ENR oracle equivalence", enr_oracles());
    report(3, "feature-extraction analytics", feature_analytics());
    report(4, "mRMR sanity", mrmr_sanity());
    match run_campaign() {
        Ok(c) => {
            report(5, "end-to-end synthetic accuracy", end_to_end(&c));
            report(6, "adaptive bound property", adaptive_bound());
            report(7, "adaptive improvement", adaptive_improvement(&c));
            report(8, "determinism", determinism(&c));
        }
        Err(err) => {
            report(5, "end-to-end synthetic accuracy", Err(err.clone()));
            report(6, "adaptive bound property", adaptive_bound());
            report(7, "adaptive improvement", Err(err.clone()));
            report(8, "determinism", Err(err));
        }
    }

    if let Ok(dir) = std::env::var("SLSOH_REAL_TELEMETRY") {
        match real_data(Path::new(&dir)) {
            Ok(m) => println!("[INFO] real data: {m}"),
            Err(err) => println!("[INFO] real data path failed: {err}"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
