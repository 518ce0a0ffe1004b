use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EnrModel, Standardizer};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    schema_version: u32,
    feature_names: Vec<String>,
    means: Vec<f64>,
    stds: Vec<f64>,
    weights: Vec<f64>,
    intercept: f64,
    lambda: f64,
    alpha: f64,
}

impl ModelDocument {
    fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!("unsupported model schema_version {}", self.schema_version)));
        }
        let p = self.feature_names.len();
        if p == 0 || self.means.len() != p || self.stds.len() != p || self.weights.len() != p {
            return Err(Error::Schema("feature_names, means, stds and weights must have equal, nonzero length".into()));
        }
        let scalars = [self.intercept, self.lambda, self.alpha];
        if self.means.iter().chain(&self.stds).chain(&self.weights).chain(&scalars).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model field".into()));
        }
        if self.stds.iter().any(|s| *s <= 0.0) {
            return Err(Error::Schema("stds must be strictly positive".into()));
        }
        if self.lambda < 0.0 || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Schema("lambda must be ≥ 0 and alpha in [0, 1]".into()));
        }
        Ok(())
    }
}

pub fn model_to_json(model: &EnrModel) -> Result<String> {
    let doc = ModelDocument {
        schema_version: SCHEMA_VERSION,
        feature_names: model.feature_names.clone(),
        means: model.standardizer.means.clone(),
        stds: model.standardizer.stds.clone(),
        weights: model.weights.clone(),
        intercept: model.intercept,
        lambda: model.lambda,
        alpha: model.alpha,
    };
    doc.check()?;
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn model_from_json(text: &str) -> Result<EnrModel> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Schema(format!("model document: {e}")))?;
    doc.check()?;
    Ok(EnrModel {
        feature_names: doc.feature_names,
        standardizer: Standardizer { means: doc.means, stds: doc.stds },
        weights: doc.weights,
        intercept: doc.intercept,
        lambda: doc.lambda,
        alpha: doc.alpha,
    })
}

pub fn save_model(model: &EnrModel, path: &Path) -> Result<()> {
    crate::fsutil::write_string(path, &model_to_json(model)?)
}

pub fn load_model(path: &Path) -> Result<EnrModel> {
    model_from_json(&crate::fsutil::read_string(path)?)
}
