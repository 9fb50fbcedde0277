// SPDX-License-Identifier: Apache-2.0

//! Shapley-value explanations of model scores and the rules distilled from
//! them.

mod rules;
mod shap;
mod waterfall;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::GraphError;
use crate::ml::MlError;

pub use rules::{
    apply_rules, confident_classes, explain_sample, extract_rules, Condition, Cutoff, Decision,
    Procedure, Rule, RuleConfig, RuleSet,
};
pub use shap::{
    shap_additive, shap_exact_enum, shap_sampled, AdditiveExplainer, SampledShap,
    MAX_EXACT_FEATURES,
};
pub use waterfall::{waterfall_render, waterfall_rows, WaterfallRow};

#[derive(Debug, Error)]
pub enum XaiError {
    #[error("exact enumeration supports at most {max} active features, got {h}")]
    TooManyFeatures { h: usize, max: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("need at least 2 permutations, got {0}")]
    TooFewPermutations(usize),
    #[error("feature schema mismatch: expected {expected} features, got {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("rule file is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ml(#[from] MlError),
}

/// Units of `base` and `fx`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Whatever the explained function returns.
    Raw,
    /// Boosting margin; the score is its logistic.
    Margin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub features: Vec<u8>,
    /// Expected model output over the background.
    pub base: f64,
    pub phis: Vec<f64>,
    /// Model output at `features`.
    pub fx: f64,
    pub scale: Scale,
}

impl ShapExplanation {
    /// `base + Σφ - f(x)`; zero for an exact explanation.
    pub fn efficiency_gap(&self) -> f64 {
        self.base + self.phis.iter().sum::<f64>() - self.fx
    }
}
