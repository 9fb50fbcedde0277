// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{check_classes, MlError, TrainConfig, TrainingSet, Weighting};
use crate::graph::FeatureSchema;

/// Errors at or below this are treated as a perfect stump.
const EPS_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Votes +1 when the feature bit is 1.
    Set,
    /// Votes +1 when the feature bit is 0.
    Clear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub polarity: Polarity,
    pub alpha: f64,
}

impl Stump {
    /// The stump's ±1 vote.
    pub fn vote(&self, x: &[u8]) -> f64 {
        let set = x[self.feature] != 0;
        if set == (self.polarity == Polarity::Set) {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub schema: FeatureSchema,
    pub stumps: Vec<Stump>,
    /// Shrinkage applied to every stump vote.
    #[serde(rename = "nu")]
    pub shrinkage: f64,
    /// Class-prior term of the margin.
    pub offset: f64,
    pub train_config: TrainConfig,
    pub dataset_digest: String,
    /// Weighted error of each selected stump, in order.
    #[serde(default)]
    pub errors: Vec<f64>,
}

impl AdaBoostModel {
    /// `offset + Σ ν·α·vote`.
    pub fn margin(&self, x: &[u8]) -> f64 {
        self.stumps
            .iter()
            .fold(self.offset, |m, s| m + self.shrinkage * s.alpha * s.vote(x))
    }

    /// Running training bound `Π 2·sqrt(ε(1-ε))` after each round.
    pub fn loss_bound(&self) -> Vec<f64> {
        let mut acc = 1.0;
        self.errors
            .iter()
            .map(|&e| {
                acc *= 2.0 * (e * (1.0 - e)).sqrt();
                acc
            })
            .collect()
    }
}

pub fn train_adaboost(
    set: &TrainingSet,
    schema: &FeatureSchema,
    cfg: &TrainConfig,
) -> Result<AdaBoostModel, MlError> {
    set.check_schema(schema)?;
    let [neg, pos] = check_classes(set)?;
    if cfg.rounds == 0 {
        return Err(MlError::InvalidConfig("rounds must be at least 1".into()));
    }
    let n = set.y.len();
    let nf = schema.feature_len();
    let mut w: Vec<f64> = set
        .y
        .iter()
        .map(|&y| match cfg.weighting {
            Weighting::Balanced => 0.5 / if y == 1 { pos } else { neg } as f64,
            Weighting::None => 1.0 / n as f64,
        })
        .collect();
    let (wp, wn) =
        set.y.iter().zip(&w).fold(
            (0.0, 0.0),
            |(p, q), (&y, &wi)| {
                if y == 1 {
                    (p + wi, q)
                } else {
                    (p, q + wi)
                }
            },
        );
    let mut model = AdaBoostModel {
        schema: schema.clone(),
        stumps: Vec::new(),
        shrinkage: cfg.shrinkage,
        offset: 0.5 * (wp / wn).ln(),
        train_config: cfg.clone(),
        dataset_digest: set.digest.clone(),
        errors: Vec::new(),
    };

    for _ in 0..cfg.rounds {
        let total: f64 = w.iter().sum();
        // Error of (f, Set) = weight of positives with bit 0 plus negatives
        // with bit 1. Start from "all bits 0" and correct for set bits.
        let pos_w: f64 = set
            .y
            .iter()
            .zip(&w)
            .filter(|(&y, _)| y == 1)
            .map(|(_, &wi)| wi)
            .sum();
        let mut err = vec![pos_w; nf];
        for (i, x) in set.x.iter().enumerate() {
            let delta = if set.y[i] == 1 { -w[i] } else { w[i] };
            for (f, &b) in x.iter().enumerate() {
                if b != 0 {
                    err[f] += delta;
                }
            }
        }
        let mut best = (f64::INFINITY, 0, Polarity::Set);
        for (f, &e) in err.iter().enumerate() {
            let e = e / total;
            for (pe, pol) in [(e, Polarity::Set), (1.0 - e, Polarity::Clear)] {
                if pe < best.0 {
                    best = (pe, f, pol);
                }
            }
        }
        let (eps, feature, polarity) = best;
        if eps >= 0.5 - EPS_FLOOR {
            break;
        }
        let perfect = eps <= EPS_FLOOR;
        let e = eps.max(EPS_FLOOR);
        let stump = Stump {
            feature,
            polarity,
            alpha: 0.5 * ((1.0 - e) / e).ln(),
        };
        model.stumps.push(stump);
        model.errors.push(e);
        if perfect {
            break;
        }
        for (i, x) in set.x.iter().enumerate() {
            let y = if set.y[i] == 1 { 1.0 } else { -1.0 };
            w[i] *= (-cfg.shrinkage * stump.alpha * y * stump.vote(x)).exp();
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= s);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::logistic;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(1)
    }

    fn set_from(rows: &[(Vec<u8>, u8)]) -> TrainingSet {
        let nf = schema().feature_len();
        let x = rows
            .iter()
            .map(|(r, _)| {
                let mut v = r.clone();
                v.resize(nf, 0);
                v
            })
            .collect();
        TrainingSet {
            x,
            y: rows.iter().map(|r| r.1).collect(),
            digest: String::new(),
        }
    }

    #[test]
    fn separable_in_one_round() {
        let rows: Vec<_> = (0..20)
            .map(|i| (vec![0, (i % 2) as u8], (i % 2) as u8))
            .collect();
        let set = set_from(&rows);
        let m = train_adaboost(&set, &schema(), &TrainConfig::default()).unwrap();
        assert_eq!(m.stumps.len(), 1);
        assert_eq!(m.stumps[0].feature, 1);
        for (x, &y) in set.x.iter().zip(&set.y) {
            assert_eq!(m.margin(x) > 0.0, y == 1);
        }
    }

    #[test]
    fn xor_labels_bound_decreases() {
        let mut rows = Vec::new();
        for i in 0..40u8 {
            let (a, b) = (i & 1, i >> 1 & 1);
            let noise = (i / 4) % 3;
            rows.push((vec![a, b, noise & 1], a ^ b));
        }
        let set = set_from(&rows);
        let cfg = TrainConfig {
            rounds: 20,
            ..TrainConfig::default()
        };
        let m = train_adaboost(&set, &schema(), &cfg).unwrap();
        assert!(m.errors.iter().all(|&e| e < 0.5));
        let bound = m.loss_bound();
        assert!(bound.windows(2).all(|p| p[1] <= p[0] + 1e-15));
    }

    #[test]
    fn balanced_weighting_ignores_minority_duplication() {
        let base = vec![
            (vec![1, 0, 1], 1),
            (vec![0, 1, 1], 1),
            (vec![1, 1, 0], 0),
            (vec![0, 0, 0], 0),
            (vec![0, 1, 0], 0),
            (vec![1, 0, 0], 0),
        ];
        let mut dup = base.clone();
        for r in base.iter().filter(|r| r.1 == 1) {
            for _ in 0..3 {
                dup.push(r.clone());
            }
        }
        let cfg = TrainConfig {
            rounds: 1,
            ..TrainConfig::default()
        };
        let a = train_adaboost(&set_from(&base), &schema(), &cfg).unwrap();
        let b = train_adaboost(&set_from(&dup), &schema(), &cfg).unwrap();
        assert_eq!(a.stumps[0].feature, b.stumps[0].feature);
        assert_eq!(a.stumps[0].polarity, b.stumps[0].polarity);
    }

    #[test]
    fn tie_break_lowest_feature_positive_polarity() {
        // Features 0 and 2 are identical copies of the label.
        let rows: Vec<_> = (0..10)
            .map(|i| {
                let y = (i % 2) as u8;
                (vec![y, 0, y], y)
            })
            .collect();
        let m = train_adaboost(&set_from(&rows), &schema(), &TrainConfig::default()).unwrap();
        assert_eq!(m.stumps[0].feature, 0);
        assert_eq!(m.stumps[0].polarity, Polarity::Set);
    }

    #[test]
    fn degenerate_inputs() {
        let rows: Vec<_> = (0..5).map(|_| (vec![1], 1)).collect();
        assert!(matches!(
            train_adaboost(&set_from(&rows), &schema(), &TrainConfig::default()),
            Err(MlError::DegenerateDataset(_))
        ));
    }

    #[test]
    fn score_and_margin_agree() {
        let rows: Vec<_> = (0..12)
            .map(|i| (vec![(i % 3 == 0) as u8, (i % 2) as u8], (i % 2) as u8))
            .collect();
        let set = set_from(&rows);
        let m = train_adaboost(&set, &schema(), &TrainConfig::default()).unwrap();
        for x in &set.x {
            assert_eq!(logistic(m.margin(x)) > 0.5, m.margin(x) > 0.0);
        }
    }
}
