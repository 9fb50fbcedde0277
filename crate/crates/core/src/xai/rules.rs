// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{shap_sampled, AdditiveExplainer, ShapExplanation, XaiError};
use crate::datagen::Dataset;
use crate::graph::{FeatureMeaning, FeatureSchema};
use crate::ml::Model;

/// Background rows used when explaining forest models.
const FOREST_BACKGROUND: usize = 16;
const FOREST_PERMUTATIONS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Procedure {
    #[serde(rename = "MASK")]
    Mask,
    #[serde(rename = "DO_NOT_MASK")]
    DoNotMask,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Mask,
    DoNotMask,
    NoMatch,
}

/// One atom: feature `feature` has bit `value`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub value: u8,
    pub text: String,
}

impl Condition {
    pub fn new(schema: &FeatureSchema, feature: usize, value: u8) -> Result<Self, XaiError> {
        let text = match (schema.decode(feature)?, value != 0) {
            (
                FeatureMeaning::Type {
                    position,
                    type_name,
                },
                true,
            ) => {
                format!("G{position} = {type_name}")
            }
            (
                FeatureMeaning::Type {
                    position,
                    type_name,
                },
                false,
            ) => {
                format!("G{position} \u{2260} {type_name}")
            }
            (FeatureMeaning::Drives { from, to }, true) => format!("G{from} drives G{to}"),
            (FeatureMeaning::Drives { from, to }, false) => {
                format!("G{from} and G{to} are not connected")
            }
        };
        Ok(Condition {
            feature,
            value,
            text,
        })
    }

    pub fn holds(&self, x: &[u8]) -> bool {
        x.get(self.feature)
            .is_some_and(|&b| (b != 0) == (self.value != 0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    /// Conjunction, sorted by feature index.
    pub conditions: Vec<Condition>,
    pub procedure: Procedure,
    pub support: usize,
    pub mean_abs_phi: f64,
}

impl Rule {
    pub fn matches(&self, x: &[u8]) -> bool {
        self.conditions.iter().all(|c| c.holds(x))
    }

    pub fn text(&self) -> String {
        let conds: Vec<&str> = self.conditions.iter().map(|c| c.text.as_str()).collect();
        let action = match self.procedure {
            Procedure::Mask => "mask",
            Procedure::DoNotMask => "do not mask",
        };
        format!("{} => {action}", conds.join(" && "))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub schema_digest: String,
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rules serialize")
    }

    pub fn from_json(text: &str) -> Result<RuleSet, XaiError> {
        serde_json::from_str(text).map_err(|e| XaiError::Corrupt(e.to_string()))
    }
}

/// How confident a prediction must be to seed a rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum Cutoff {
    /// MASK when score ≥ c, DO_NOT_MASK when score ≤ 1 - c.
    Score(f64),
    /// MASK for the top `q` fraction of dataset scores, DO_NOT_MASK for the
    /// bottom `q` fraction.
    Quantile(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleConfig {
    pub top_k: usize,
    pub min_support: usize,
    pub cutoff: Cutoff,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            top_k: 5,
            min_support: 10,
            cutoff: Cutoff::Quantile(0.25),
        }
    }
}

/// Confident class of each score under `cutoff`.
pub fn confident_classes(scores: &[f64], cutoff: Cutoff) -> Vec<Option<Procedure>> {
    let (hi, lo) = match cutoff {
        Cutoff::Score(c) => (c, 1.0 - c),
        Cutoff::Quantile(q) => {
            let mut sorted = scores.to_vec();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            if n == 0 || q <= 0.0 {
                return vec![None; n];
            }
            let k = ((q * n as f64).ceil() as usize).clamp(1, n);
            (sorted[n - k], sorted[k - 1])
        }
    };
    scores
        .iter()
        .map(|&s| {
            if s >= hi && s > lo {
                Some(Procedure::Mask)
            } else if s <= lo && s < hi {
                Some(Procedure::DoNotMask)
            } else {
                None
            }
        })
        .collect()
}

fn explain(
    model: &Model,
    background: &[Vec<u8>],
    x: &[u8],
    add: Option<&AdditiveExplainer>,
) -> Result<ShapExplanation, XaiError> {
    match (model, add) {
        (Model::Adaboost(_), Some(e)) => e.explain(x),
        _ => {
            let len = x.len();
            let active: Vec<usize> = (0..len).collect();
            let bg: Vec<Vec<u8>> = background.iter().take(FOREST_BACKGROUND).cloned().collect();
            let f = |z: &[u8]| model.predict_score(z).unwrap_or(0.5);
            Ok(shap_sampled(&f, x, &bg, &active, FOREST_PERMUTATIONS, 0)?.explanation)
        }
    }
}

/// SHAP explanation of one feature vector: exact on the margin scale for
/// boosted stumps, sampled on the score scale for forests.
pub fn explain_sample(
    model: &Model,
    background: &[Vec<u8>],
    x: &[u8],
) -> Result<ShapExplanation, XaiError> {
    model.check_features(x)?;
    match model {
        Model::Adaboost(m) => AdditiveExplainer::new(m, background)?.explain(x),
        Model::RandomForest(_) => {
            if background.is_empty() {
                return Err(XaiError::EmptyBackground);
            }
            explain(model, background, x, None)
        }
    }
}

/// Distils SHAP explanations of confidently classified dataset samples into
/// conjunctive rules.
pub fn extract_rules(model: &Model, d: &Dataset, cfg: &RuleConfig) -> Result<RuleSet, XaiError> {
    let schema = model.schema();
    if schema != &d.schema {
        return Err(XaiError::SchemaMismatch {
            expected: schema.feature_len(),
            found: d.schema.feature_len(),
        });
    }
    let xs: Vec<Vec<u8>> = d.samples.iter().map(|s| s.features.clone()).collect();
    let scores = xs
        .iter()
        .map(|x| model.predict_score(x))
        .collect::<Result<Vec<f64>, _>>()?;
    let classes = confident_classes(&scores, cfg.cutoff);
    let additive = match model {
        Model::Adaboost(m) if !xs.is_empty() => Some(AdditiveExplainer::new(m, &xs)?),
        _ => None,
    };

    // (atoms, procedure) -> (summed |φ|, number of seeding samples)
    type Atoms = Vec<(usize, u8)>;
    let mut seeds: BTreeMap<(Atoms, Procedure), (f64, usize)> = BTreeMap::new();
    for (x, class) in xs.iter().zip(&classes) {
        let Some(proc_) = *class else { continue };
        let e = explain(model, &xs, x, additive.as_ref())?;
        let mut ranked: Vec<usize> = (0..x.len()).filter(|&f| e.phis[f] != 0.0).collect();
        ranked.sort_by(|&a, &b| e.phis[b].abs().total_cmp(&e.phis[a].abs()).then(a.cmp(&b)));
        ranked.truncate(cfg.top_k);
        if ranked.is_empty() {
            continue;
        }
        let phi_mean = ranked.iter().map(|&f| e.phis[f].abs()).sum::<f64>() / ranked.len() as f64;
        ranked.sort_unstable();
        let key: Vec<(usize, u8)> = ranked.iter().map(|&f| (f, x[f])).collect();
        let entry = seeds.entry((key, proc_)).or_insert((0.0, 0));
        entry.0 += phi_mean;
        entry.1 += 1;
    }

    let mut rules = Vec::new();
    for ((key, procedure), (phi_sum, n)) in seeds {
        let conditions = key
            .iter()
            .map(|&(f, v)| Condition::new(schema, f, v))
            .collect::<Result<Vec<_>, _>>()?;
        let support = xs
            .iter()
            .zip(&classes)
            .filter(|(x, c)| **c == Some(procedure) && conditions.iter().all(|k| k.holds(x)))
            .count();
        if support >= cfg.min_support {
            rules.push(Rule {
                conditions,
                procedure,
                support,
                mean_abs_phi: phi_sum / n as f64,
            });
        }
    }
    rules.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then(b.mean_abs_phi.total_cmp(&a.mean_abs_phi))
            .then_with(|| a.conditions.cmp(&b.conditions))
            .then(a.procedure.cmp(&b.procedure))
    });
    Ok(RuleSet {
        schema_digest: schema.digest(),
        rules,
    })
}

/// First matching rule in order decides.
pub fn apply_rules(rs: &RuleSet, x: &[u8]) -> Decision {
    match rs.rules.iter().find(|r| r.matches(x)) {
        Some(r) if r.procedure == Procedure::Mask => Decision::Mask,
        Some(_) => Decision::DoNotMask,
        None => Decision::NoMatch,
    }
}
