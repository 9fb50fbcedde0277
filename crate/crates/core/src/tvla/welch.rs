// SPDX-License-Identifier: Apache-2.0

use super::{MomentAccumulator, TvlaError};

/// Mean, population variance and count of one group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupStats {
    pub mean: f64,
    pub variance: f64,
    pub n: u64,
}

impl GroupStats {
    pub fn from_acc(acc: &MomentAccumulator) -> Result<Self, TvlaError> {
        let (mean, variance) = acc.finalize()?;
        Ok(GroupStats {
            mean,
            variance,
            n: acc.count(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub v: f64,
}

/// Welch's t statistic between two groups (group 0 minus group 1).
///
/// Both variances zero is reported as [`TvlaError::ZeroVariance`] carrying
/// the mean difference, so callers can decide how to score it.
pub fn welch_t(g0: &GroupStats, g1: &GroupStats) -> Result<WelchResult, TvlaError> {
    for g in [g0, g1] {
        if g.n < 2 {
            return Err(TvlaError::InsufficientSamples { n: g.n });
        }
    }
    let q0 = g0.variance / g0.n as f64;
    let q1 = g1.variance / g1.n as f64;
    let se2 = q0 + q1;
    if se2 == 0.0 {
        return Err(TvlaError::ZeroVariance {
            mean_diff: g0.mean - g1.mean,
        });
    }
    let t = (g0.mean - g1.mean) / se2.sqrt();
    let v = se2 * se2 / (q0 * q0 / (g0.n - 1) as f64 + q1 * q1 / (g1.n - 1) as f64);
    Ok(WelchResult { t, v })
}
