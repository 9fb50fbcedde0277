// SPDX-License-Identifier: Apache-2.0

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_classes, smote, MlError, TrainConfig, TrainingSet};
use crate::graph::FeatureSchema;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        /// Fraction of positive training samples that reached the leaf.
        p: f64,
    },
    Split {
        feature: usize,
        /// Child for bit 0.
        zero: usize,
        /// Child for bit 1.
        one: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf_p(&self, x: &[u8]) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                TreeNode::Leaf { p } => return *p,
                TreeNode::Split { feature, zero, one } => {
                    k = if x[*feature] != 0 { *one } else { *zero };
                }
            }
        }
    }

    pub fn vote(&self, x: &[u8]) -> bool {
        self.leaf_p(x) >= 0.5
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub schema: FeatureSchema,
    pub trees: Vec<Tree>,
    pub train_config: TrainConfig,
    pub dataset_digest: String,
    /// Out-of-bag error on the (possibly oversampled) training set.
    pub oob_error: Option<f64>,
}

impl ForestModel {
    /// Fraction of trees voting positive.
    pub fn positive_fraction(&self, x: &[u8]) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        self.trees.iter().filter(|t| t.vote(x)).count() as f64 / self.trees.len() as f64
    }
}

struct Builder<'a> {
    x: &'a [Vec<u8>],
    y: &'a [u8],
    mtry: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

impl Builder<'_> {
    /// Grows the subtree for `rows` (with repetition from bagging) and
    /// returns its node index.
    fn grow(&mut self, rows: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let total = rows.len() as f64;
        let pos = rows.iter().filter(|&&r| self.y[r] == 1).count() as f64;
        let me = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            p: if total > 0.0 { pos / total } else { 0.5 },
        });
        if depth >= self.max_depth || pos == 0.0 || pos == total || rows.len() < 2 {
            return me;
        }
        let nf = self.x[0].len();
        let parent = gini(pos, total);
        let mut best: Option<(f64, usize)> = None;
        let mut candidates: Vec<usize> = index::sample(rng, nf, self.mtry.min(nf)).into_vec();
        candidates.sort_unstable();
        for f in candidates {
            let (mut n1, mut p1) = (0.0, 0.0);
            for &r in rows {
                if self.x[r][f] != 0 {
                    n1 += 1.0;
                    if self.y[r] == 1 {
                        p1 += 1.0;
                    }
                }
            }
            let n0 = total - n1;
            if n1 == 0.0 || n0 == 0.0 {
                continue;
            }
            let impurity = (n0 * gini(pos - p1, n0) + n1 * gini(p1, n1)) / total;
            if impurity < parent - 1e-12 && best.is_none_or(|(b, _)| impurity < b) {
                best = Some((impurity, f));
            }
        }
        let Some((_, feature)) = best else {
            return me;
        };
        let (ones, zeros): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x[r][feature] != 0);
        let zero = self.grow(&zeros, depth + 1, rng);
        let one = self.grow(&ones, depth + 1, rng);
        self.nodes[me] = TreeNode::Split { feature, zero, one };
        me
    }
}

pub fn train_random_forest(
    set: &TrainingSet,
    schema: &FeatureSchema,
    cfg: &TrainConfig,
) -> Result<ForestModel, MlError> {
    set.check_schema(schema)?;
    let [neg, pos] = check_classes(set)?;
    if cfg.trees == 0 || cfg.max_depth == 0 {
        return Err(MlError::InvalidConfig(
            "trees and depth must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = set.x.clone();
    let mut y = set.y.clone();
    if cfg.smote {
        let minority_label = if pos < neg { 1 } else { 0 };
        let minority: Vec<Vec<u8>> = set
            .x
            .iter()
            .zip(&set.y)
            .filter(|(_, &l)| l == minority_label)
            .map(|(r, _)| r.clone())
            .collect();
        let (small, large) = (pos.min(neg), pos.max(neg));
        let ratio = cfg
            .smote_ratio
            .unwrap_or((large - small) as f64 / small as f64);
        for s in smote(&minority, cfg.smote_k, ratio, &mut rng)? {
            x.push(s);
            y.push(minority_label);
        }
    }
    let n = y.len();
    let nf = schema.feature_len();
    let mtry = (nf as f64).sqrt().ceil() as usize;
    let mut oob_votes = vec![(0u32, 0u32); n];
    let mut trees = Vec::with_capacity(cfg.trees);
    for _ in 0..cfg.trees {
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut inbag = vec![false; n];
        rows.iter().for_each(|&r| inbag[r] = true);
        let mut b = Builder {
            x: &x,
            y: &y,
            mtry,
            max_depth: cfg.max_depth,
            nodes: Vec::new(),
        };
        b.grow(&rows, 0, &mut rng);
        let tree = Tree { nodes: b.nodes };
        for r in (0..n).filter(|&r| !inbag[r]) {
            let v = &mut oob_votes[r];
            if tree.vote(&x[r]) {
                v.1 += 1;
            } else {
                v.0 += 1;
            }
        }
        trees.push(tree);
    }
    let scored: Vec<_> = (0..n).filter(|&r| oob_votes[r] != (0, 0)).collect();
    let oob_error = (!scored.is_empty()).then(|| {
        let wrong = scored
            .iter()
            .filter(|&&r| (oob_votes[r].1 > oob_votes[r].0) != (y[r] == 1))
            .count();
        wrong as f64 / scored.len() as f64
    });
    Ok(ForestModel {
        schema: schema.clone(),
        trees,
        train_config: cfg.clone(),
        dataset_digest: set.digest.clone(),
        oob_error,
    })
}
