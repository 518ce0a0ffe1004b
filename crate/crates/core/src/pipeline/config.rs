use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptive::AdaptiveConfig;
use crate::data::IngestConfig;
use crate::error::{Error, Result};
use crate::features::{AlignmentConfig, FEATURE_NAMES};
use crate::regression::GridConfig;
use crate::selection::MutualInfoConfig;
use crate::sim::CampaignConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub ingest: IngestConfig,
    pub align: AlignmentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankConfig {
    pub bins: usize,
    pub top_k: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self { bins: 8, top_k: 6 }
    }
}

impl RankConfig {
    pub fn mi_config(&self) -> MutualInfoConfig {
        MutualInfoConfig { bins: self.bins }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_cells: Vec<String>,
    pub test_cells: Vec<String>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let ids = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self {
            train_cells: ids(&["1.1", "1.2", "1.3", "2.1", "2.2", "2.3"]),
            test_cells: ids(&["1.4", "2.4"]),
        }
    }
}

/// Single JSON document configuring every command. Missing sections take
/// their defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub simulate: CampaignConfig,
    pub extract: ExtractConfig,
    pub rank: RankConfig,
    pub train: GridConfig,
    pub split: SplitConfig,
    pub adaptive: AdaptiveConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            simulate: CampaignConfig::default(),
            extract: ExtractConfig::default(),
            rank: RankConfig::default(),
            train: GridConfig::default(),
            split: SplitConfig::default(),
            adaptive: AdaptiveConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Schema(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::fsutil::read_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        self.simulate.validate()?;
        if self.rank.bins < 2 {
            return bad(format!("rank.bins = {} must be at least 2", self.rank.bins));
        }
        if !(1..=FEATURE_NAMES.len()).contains(&self.rank.top_k) {
            return bad(format!("rank.top_k = {} must lie in 1..={}", self.rank.top_k, FEATURE_NAMES.len()));
        }
        let t = &self.train;
        if t.lambdas.is_empty() || t.alphas.is_empty() {
            return bad("train grid is empty".into());
        }
        if t.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) || t.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad("train grid needs lambda ≥ 0 and alpha in [0, 1]".into());
        }
        if t.folds < 2 || !(t.tol > 0.0) || t.max_iter == 0 {
            return bad("train needs folds ≥ 2, tol > 0 and max_iter ≥ 1".into());
        }
        let s = &self.split;
        if s.train_cells.is_empty() || s.test_cells.is_empty() {
            return bad("split needs at least one training and one test cell".into());
        }
        if s.train_cells.iter().any(|c| s.test_cells.contains(c)) {
            return bad("train and test cells overlap".into());
        }
        if s.train_cells.len() < t.folds {
            return bad(format!("{} training cells cannot form {} folds", s.train_cells.len(), t.folds));
        }
        for f in &self.adaptive.cluster_features {
            if !FEATURE_NAMES.contains(&f.as_str()) {
                return bad(format!("unknown clustering feature `{f}`"));
            }
        }
        self.adaptive.validate()
    }
}
