// SPDX-License-Identifier: Apache-2.0

//! Classifiers that predict whether masking a gate pays off.

mod adaboost;
mod forest;
mod smote;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::Dataset;
use crate::graph::FeatureSchema;

pub use adaboost::{train_adaboost, AdaBoostModel, Polarity, Stump};
pub use forest::{train_random_forest, ForestModel, Tree, TreeNode};
pub use smote::smote;

pub const MODEL_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("dataset is degenerate: {0}")]
    DegenerateDataset(String),
    #[error("feature schema mismatch: model expects {expected} features, got {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("need at least {need} samples, have {have}")]
    TooFewSamples { have: usize, need: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("model file version {0} is newer than this build supports")]
    VersionUnsupported(u64),
    #[error("model file is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Initial weights inversely proportional to class size.
    Balanced,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Adaboost,
    RandomForest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub rounds: usize,
    pub weighting: Weighting,
    #[serde(rename = "nu")]
    pub shrinkage: f64,
    pub trees: usize,
    pub max_depth: usize,
    pub smote: bool,
    pub smote_k: usize,
    /// Synthetic minority samples per minority sample; `None` balances the
    /// classes.
    pub smote_ratio: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kind: ModelKind::Adaboost,
            rounds: 200,
            weighting: Weighting::Balanced,
            shrinkage: 0.01,
            trees: 50,
            max_depth: 8,
            smote: true,
            smote_k: 5,
            smote_ratio: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn forest() -> Self {
        TrainConfig {
            kind: ModelKind::RandomForest,
            ..TrainConfig::default()
        }
    }
}

/// Feature rows and binary labels in a canonical order (sorted by feature
/// bits, then label), so training does not depend on sample order.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub x: Vec<Vec<u8>>,
    pub y: Vec<u8>,
    pub digest: String,
}

impl TrainingSet {
    pub fn from_dataset(d: &Dataset) -> Self {
        let mut rows: Vec<(Vec<u8>, u8)> = d
            .samples
            .iter()
            .map(|s| (s.features.clone(), s.label))
            .collect();
        rows.sort();
        let (x, y) = rows.into_iter().unzip();
        TrainingSet {
            x,
            y,
            digest: d.digest(),
        }
    }

    fn check_schema(&self, schema: &FeatureSchema) -> Result<(), MlError> {
        let expected = schema.feature_len();
        match self.x.iter().find(|r| r.len() != expected) {
            Some(r) => Err(MlError::SchemaMismatch {
                expected,
                found: r.len(),
            }),
            None => Ok(()),
        }
    }
}

/// Class counts `[negatives, positives]`, refusing single-class data.
fn check_classes(set: &TrainingSet) -> Result<[usize; 2], MlError> {
    let pos = set.y.iter().filter(|&&y| y == 1).count();
    let neg = set.y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MlError::DegenerateDataset(format!(
            "{neg} negative and {pos} positive samples"
        )));
    }
    Ok([neg, pos])
}

pub fn logistic(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Adaboost(AdaBoostModel),
    RandomForest(ForestModel),
}

impl Model {
    pub fn schema(&self) -> &FeatureSchema {
        match self {
            Model::Adaboost(m) => &m.schema,
            Model::RandomForest(m) => &m.schema,
        }
    }

    pub fn check_features(&self, x: &[u8]) -> Result<(), MlError> {
        let expected = self.schema().feature_len();
        if x.len() != expected {
            return Err(MlError::SchemaMismatch {
                expected,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Probability-like score that masking the gate is "good".
    pub fn predict_score(&self, x: &[u8]) -> Result<f64, MlError> {
        self.check_features(x)?;
        Ok(match self {
            Model::Adaboost(m) => logistic(m.margin(x)),
            Model::RandomForest(m) => m.positive_fraction(x),
        })
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("model serializes");
        v.as_object_mut()
            .expect("model is an object")
            .insert("version".into(), MODEL_VERSION.into());
        serde_json::to_string_pretty(&v).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Model, MlError> {
        let mut v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| MlError::Corrupt(e.to_string()))?;
        let obj = v
            .as_object_mut()
            .ok_or_else(|| MlError::Corrupt("expected an object".into()))?;
        let version = obj
            .remove("version")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| MlError::Corrupt("missing version".into()))?;
        if version > MODEL_VERSION {
            return Err(MlError::VersionUnsupported(version));
        }
        serde_json::from_value(v).map_err(|e| MlError::Corrupt(e.to_string()))
    }
}

pub fn train(d: &Dataset, cfg: &TrainConfig) -> Result<Model, MlError> {
    let set = TrainingSet::from_dataset(d);
    Ok(match cfg.kind {
        ModelKind::Adaboost => Model::Adaboost(train_adaboost(&set, &d.schema, cfg)?),
        ModelKind::RandomForest => Model::RandomForest(train_random_forest(&set, &d.schema, cfg)?),
    })
}

pub fn save_model(m: &Model, path: &Path) -> Result<(), MlError> {
    std::fs::write(path, m.to_json())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model, MlError> {
    Model::from_json(&std::fs::read_to_string(path)?)
}
