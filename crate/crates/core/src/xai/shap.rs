// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;

use super::{Scale, ShapExplanation, XaiError};
use crate::ml::AdaBoostModel;
use crate::sim::rng::{Purpose, StreamKey};

pub const MAX_EXACT_FEATURES: usize = 20;

/// `f` evaluated with features outside `coalition` (among `active`) taken
/// from `b` instead of `x`.
fn mixed(x: &[u8], b: &[u8], active: &[usize], coalition: u32, buf: &mut Vec<u8>) {
    buf.clear();
    buf.extend_from_slice(x);
    for (k, &f) in active.iter().enumerate() {
        if coalition >> k & 1 == 0 {
            buf[f] = b[f];
        }
    }
}

/// Interventional coalition value: mean of `f` over the background with the
/// coalition's features held at `x`.
fn value(
    f: &dyn Fn(&[u8]) -> f64,
    x: &[u8],
    background: &[Vec<u8>],
    active: &[usize],
    coalition: u32,
    buf: &mut Vec<u8>,
) -> f64 {
    let total: f64 = background
        .iter()
        .map(|b| {
            mixed(x, b, active, coalition, buf);
            f(buf)
        })
        .sum();
    total / background.len() as f64
}

/// Exact Shapley values by enumerating every coalition of the `active`
/// features. Features outside `active` stay at their value in `x` and get
/// φ = 0.
pub fn shap_exact_enum(
    f: &dyn Fn(&[u8]) -> f64,
    x: &[u8],
    background: &[Vec<u8>],
    active: &[usize],
) -> Result<ShapExplanation, XaiError> {
    let h = active.len();
    if h > MAX_EXACT_FEATURES {
        return Err(XaiError::TooManyFeatures {
            h,
            max: MAX_EXACT_FEATURES,
        });
    }
    if background.is_empty() {
        return Err(XaiError::EmptyBackground);
    }
    let mut buf = Vec::with_capacity(x.len());
    let full = (1u32 << h) - 1;
    // The full coalition is x itself whatever the background; evaluating it
    // directly keeps fx exact instead of a mean of identical values.
    let vals: Vec<f64> = (0..1u32 << h)
        .map(|g| {
            if g == full {
                f(x)
            } else {
                value(f, x, background, active, g, &mut buf)
            }
        })
        .collect();
    // weight(|g|) = |g|! (h - |g| - 1)! / h!
    let mut fact = vec![1.0f64; h + 1];
    for k in 1..=h {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut phis = vec![0.0; x.len()];
    for (k, &feat) in active.iter().enumerate() {
        let bit = 1u32 << k;
        let mut phi = 0.0;
        for g in 0..1u32 << h {
            if g & bit != 0 {
                continue;
            }
            let s = g.count_ones() as usize;
            let w = fact[s] * fact[h - s - 1] / fact[h];
            phi += w * (vals[(g | bit) as usize] - vals[g as usize]);
        }
        phis[feat] = phi;
    }
    Ok(ShapExplanation {
        features: x.to_vec(),
        base: vals[0],
        phis,
        fx: vals[full as usize],
        scale: Scale::Raw,
    })
}

/// Exact SHAP for a stump ensemble on the margin scale, with the per-stump
/// background means computed once.
#[derive(Clone, Debug)]
pub struct AdditiveExplainer<'a> {
    model: &'a AdaBoostModel,
    mean_votes: Vec<f64>,
}

impl<'a> AdditiveExplainer<'a> {
    pub fn new(model: &'a AdaBoostModel, background: &[Vec<u8>]) -> Result<Self, XaiError> {
        if background.is_empty() {
            return Err(XaiError::EmptyBackground);
        }
        let len = model.schema.feature_len();
        if let Some(b) = background.iter().find(|b| b.len() != len) {
            return Err(XaiError::SchemaMismatch {
                expected: len,
                found: b.len(),
            });
        }
        let mean_votes = model
            .stumps
            .iter()
            .map(|s| background.iter().map(|b| s.vote(b)).sum::<f64>() / background.len() as f64)
            .collect();
        Ok(AdditiveExplainer { model, mean_votes })
    }

    pub fn explain(&self, x: &[u8]) -> Result<ShapExplanation, XaiError> {
        let m = self.model;
        let len = m.schema.feature_len();
        if x.len() != len {
            return Err(XaiError::SchemaMismatch {
                expected: len,
                found: x.len(),
            });
        }
        let mut phis = vec![0.0; len];
        let mut base = m.offset;
        for (s, &mv) in m.stumps.iter().zip(&self.mean_votes) {
            let w = m.shrinkage * s.alpha;
            phis[s.feature] += w * (s.vote(x) - mv);
            base += w * mv;
        }
        Ok(ShapExplanation {
            features: x.to_vec(),
            base,
            phis,
            fx: m.margin(x),
            scale: Scale::Margin,
        })
    }
}

pub fn shap_additive(
    m: &AdaBoostModel,
    x: &[u8],
    background: &[Vec<u8>],
) -> Result<ShapExplanation, XaiError> {
    AdditiveExplainer::new(m, background)?.explain(x)
}

/// Coalition value where `on[f]` marks active features kept at `x`.
fn masked_value(
    f: &dyn Fn(&[u8]) -> f64,
    x: &[u8],
    background: &[Vec<u8>],
    active: &[usize],
    on: &[bool],
    buf: &mut Vec<u8>,
) -> f64 {
    let total: f64 = background
        .iter()
        .map(|b| {
            buf.clear();
            buf.extend_from_slice(x);
            for &k in active {
                if !on[k] {
                    buf[k] = b[k];
                }
            }
            f(buf)
        })
        .sum();
    total / background.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledShap {
    pub explanation: ShapExplanation,
    /// Standard error of each φ; NaN with a single antithetic pair.
    pub std_err: Vec<f64>,
}

/// Permutation-sampling Shapley estimate over `active` features. Each draw
/// is an antithetic pair (a random order and its reverse); `n_perms` is
/// rounded up to an even count.
pub fn shap_sampled(
    f: &dyn Fn(&[u8]) -> f64,
    x: &[u8],
    background: &[Vec<u8>],
    active: &[usize],
    n_perms: usize,
    seed: u64,
) -> Result<SampledShap, XaiError> {
    if background.is_empty() {
        return Err(XaiError::EmptyBackground);
    }
    if n_perms < 2 {
        return Err(XaiError::TooFewPermutations(n_perms));
    }
    let pairs = n_perms.div_ceil(2);
    let key = StreamKey::new(seed);
    let mut buf = Vec::with_capacity(x.len());
    // Walks `order`, switching features from background to x one at a time.
    let mut walk = |order: &[usize], out: &mut [f64]| {
        let mut on = vec![false; x.len()];
        let mut prev = masked_value(f, x, background, active, &on, &mut buf);
        for &feat in order {
            on[feat] = true;
            let cur = masked_value(f, x, background, active, &on, &mut buf);
            out[feat] = cur - prev;
            prev = cur;
        }
    };
    let mut sum = vec![0.0; x.len()];
    let mut sum_sq = vec![0.0; x.len()];
    let mut fwd = vec![0.0; x.len()];
    let mut rev = vec![0.0; x.len()];
    for p in 0..pairs {
        let mut order = active.to_vec();
        order.shuffle(&mut key.stream(Purpose::Aux, 1, p as u64, 0));
        walk(&order, &mut fwd);
        order.reverse();
        walk(&order, &mut rev);
        for &f in active {
            let v = 0.5 * (fwd[f] + rev[f]);
            sum[f] += v;
            sum_sq[f] += v * v;
        }
    }
    let n = pairs as f64;
    let phis: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_err = (0..x.len())
        .map(|f| {
            if !active.contains(&f) {
                return 0.0;
            }
            if pairs < 2 {
                return f64::NAN;
            }
            let var = ((sum_sq[f] - sum[f] * sum[f] / n) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    let none_on = masked_value(f, x, background, active, &vec![false; x.len()], &mut buf);
    Ok(SampledShap {
        explanation: ShapExplanation {
            features: x.to_vec(),
            base: none_on,
            phis,
            fx: f(x),
            scale: Scale::Raw,
        },
        std_err,
    })
}
