//! Online correction of offline capacity estimates.
//!
//! A bank holds the training cells' feature trajectories together with the
//! offline model's residuals (label − estimate). Incoming snapshots are
//! assigned to a k-means cluster of bank points; the mean residual of the
//! cluster's member cells, interpolated at the current throughput, drives an
//! exponentially smoothed correction that is clipped to `±delta_max_ah`.

mod kmeans;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LabeledSnapshot;
use crate::regression::EnrModel;

pub use kmeans::Clustering;
pub use trace::{write_trace_csv, TraceRow, TRACE_HEADER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    pub clusters: usize,
    pub beta: f64,
    pub delta_max_ah: f64,
    /// Features spanning the clustering space.
    pub cluster_features: Vec<String>,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            clusters: 3,
            beta: 0.3,
            delta_max_ah: 1.0,
            cluster_features: vec!["q_ah_aging_ah".into()],
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            return Err(Error::InvalidParameter("at least one cluster is required".into()));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameter(format!("beta = {} must lie in (0, 1]", self.beta)));
        }
        if !(self.delta_max_ah >= 0.0 && self.delta_max_ah.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta_max_ah = {} must be finite and ≥ 0", self.delta_max_ah)));
        }
        if self.cluster_features.is_empty() {
            return Err(Error::InvalidParameter("no clustering features".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub throughput_ah: f64,
    pub point: Vec<f64>,
    pub offline_ah: f64,
    pub label_ah: f64,
}

impl BankEntry {
    pub fn residual_ah(&self) -> f64 {
        self.label_ah - self.offline_ah
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub cell_id: String,
    /// Ordered by strictly increasing throughput.
    pub entries: Vec<BankEntry>,
}

impl Trajectory {
    /// Residual interpolated linearly in throughput, clamped at the ends.
    pub fn residual_at(&self, throughput_ah: f64) -> f64 {
        let e = &self.entries;
        let k = e.partition_point(|x| x.throughput_ah < throughput_ah);
        if k == 0 {
            return e[0].residual_ah();
        }
        if k == e.len() {
            return e[k - 1].residual_ah();
        }
        let (a, b) = (&e[k - 1], &e[k]);
        let w = (throughput_ah - a.throughput_ah) / (b.throughput_ah - a.throughput_ah);
        a.residual_ah() + (b.residual_ah() - a.residual_ah()) * w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBank {
    pub trajectories: Vec<Trajectory>,
    pub clustering: Clustering,
    /// Trajectory indices with at least one point in each cluster.
    pub members: Vec<Vec<usize>>,
}

impl TrajectoryBank {
    /// Builds a bank from raw trajectories. Entries whose throughput does
    /// not exceed the previous one are dropped so keys strictly increase.
    pub fn from_trajectories(mut trajectories: Vec<Trajectory>, clusters: usize, seed: u64) -> Result<Self> {
        for t in &mut trajectories {
            t.entries.sort_by(|a, b| a.throughput_ah.total_cmp(&b.throughput_ah));
            t.entries.dedup_by(|b, a| b.throughput_ah <= a.throughput_ah);
        }
        trajectories.retain(|t| !t.entries.is_empty());
        if trajectories.is_empty() {
            return Err(Error::InvalidParameter("trajectory bank is empty".into()));
        }
        let dim = trajectories[0].entries[0].point.len();
        let points: Vec<&[f64]> = trajectories.iter().flat_map(|t| t.entries.iter().map(|e| e.point.as_slice())).collect();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::LengthMismatch("bank points must share one nonzero dimension".into()));
        }
        if points.iter().flat_map(|p| p.iter()).any(|v| !v.is_finite())
            || trajectories.iter().flat_map(|t| &t.entries).any(|e| !(e.offline_ah.is_finite() && e.label_ah.is_finite() && e.throughput_ah.is_finite()))
        {
            return Err(Error::NonFinite("bank entry".into()));
        }
        let clustering = Clustering::fit(&points, clusters, seed);
        let mut members = vec![Vec::new(); clustering.centroids.len()];
        for (i, t) in trajectories.iter().enumerate() {
            let mut hit = vec![false; members.len()];
            for e in &t.entries {
                hit[clustering.assign(&e.point)] = true;
            }
            for (c, h) in hit.into_iter().enumerate() {
                if h {
                    members[c].push(i);
                }
            }
        }
        Ok(Self { trajectories, clustering, members })
    }

    pub fn cluster_count(&self) -> usize {
        self.clustering.centroids.len()
    }

    /// Nearest centroid in the bank's standardized feature space.
    pub fn assign_cluster(&self, point: &[f64]) -> usize {
        self.clustering.assign(point)
    }

    /// Mean residual of the cluster's member trajectories at `throughput_ah`.
    pub fn cluster_target(&self, cluster: usize, throughput_ah: f64) -> f64 {
        let all: Vec<usize>;
        let members = match self.members.get(cluster) {
            Some(m) if !m.is_empty() => m,
            _ => {
                all = (0..self.trajectories.len()).collect();
                &all
            }
        };
        members.iter().map(|&i| self.trajectories[i].residual_at(throughput_ah)).sum::<f64>() / members.len() as f64
    }
}

fn point_of(s: &LabeledSnapshot, features: &[String]) -> Result<Vec<f64>> {
    features.iter().map(|n| s.features.get(n)).collect()
}

/// Bank of the training cells' trajectories with the model's residuals.
pub fn build_bank(training: &[LabeledSnapshot], model: &EnrModel, cfg: &AdaptiveConfig, seed: u64) -> Result<TrajectoryBank> {
    cfg.validate()?;
    let mut ids: Vec<&str> = training.iter().map(|s| s.cell_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut trajectories = Vec::with_capacity(ids.len());
    for id in ids {
        let entries = training
            .iter()
            .filter(|s| s.cell_id == id)
            .map(|s| {
                Ok(BankEntry {
                    throughput_ah: s.features.q_ah_aging_ah,
                    point: point_of(s, &cfg.cluster_features)?,
                    offline_ah: model.enr_predict(&s.features)?,
                    label_ah: s.label_q_ch_c20_ah,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        trajectories.push(Trajectory { cell_id: id.to_string(), entries });
    }
    if !trajectories.iter().any(|t| t.entries.len() >= 2) {
        return Err(Error::InvalidParameter("bank needs a training cell with at least 2 snapshots".into()));
    }
    TrajectoryBank::from_trajectories(trajectories, cfg.clusters, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    pub cluster_id: Option<usize>,
    pub residual_ah: f64,
    pub beta: f64,
    pub delta_max_ah: f64,
    pub history: Vec<f64>,
}

impl AdaptiveState {
    pub fn new(beta: f64, delta_max_ah: f64) -> Self {
        Self { cluster_id: None, residual_ah: 0.0, beta, delta_max_ah, history: Vec::new() }
    }

    /// Blends `target` into the running residual and returns the emitted
    /// estimate and the clipped correction. The estimate never departs from
    /// `offline_ah` by more than `delta_max_ah`.
    pub fn update(&mut self, offline_ah: f64, target_ah: f64) -> (f64, f64) {
        self.residual_ah = (1.0 - self.beta) * self.residual_ah + self.beta * target_ah;
        let d = self.delta_max_ah;
        let correction = if self.residual_ah.is_nan() { 0.0 } else { self.residual_ah.clamp(-d, d) };
        let mut estimate = offline_ah + correction;
        // Rounding in the sum can overshoot the bound by an ulp.
        while (estimate - offline_ah).abs() > d {
            estimate = if estimate > offline_ah { estimate.next_down() } else { estimate.next_up() };
        }
        self.history.push(estimate);
        (estimate, correction)
    }
}

/// One step: assign the point to a cluster, pull the cluster's residual at
/// `throughput_ah`, and emit the bounded estimate.
pub fn adaptive_step(
    state: &mut AdaptiveState,
    offline_ah: f64,
    point: &[f64],
    throughput_ah: f64,
    bank: &TrajectoryBank,
) -> f64 {
    let cluster = bank.assign_cluster(point);
    state.cluster_id = Some(cluster);
    let target = bank.cluster_target(cluster, throughput_ah);
    state.update(offline_ah, target).0
}

/// Runs the estimator over one cell's snapshots in cycle order.
pub fn run_stream(
    snapshots: &[LabeledSnapshot],
    model: &EnrModel,
    bank: &TrajectoryBank,
    cfg: &AdaptiveConfig,
) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    let mut ordered: Vec<&LabeledSnapshot> = snapshots.iter().collect();
    ordered.sort_by_key(|s| s.cycle_index);
    let mut state = AdaptiveState::new(cfg.beta, cfg.delta_max_ah);
    ordered
        .into_iter()
        .map(|s| {
            let offline_ah = model.enr_predict(&s.features)?;
            let point = point_of(s, &cfg.cluster_features)?;
            let throughput_ah = s.features.q_ah_aging_ah;
            let cluster_id = bank.assign_cluster(&point);
            state.cluster_id = Some(cluster_id);
            let (adaptive_ah, correction_ah) = state.update(offline_ah, bank.cluster_target(cluster_id, throughput_ah));
            Ok(TraceRow { cycle_index: s.cycle_index, throughput_ah, offline_ah, adaptive_ah, correction_ah, cluster_id })
        })
        .collect()
}
