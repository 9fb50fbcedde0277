// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::TvlaError;

/// Negative central moments smaller than this in magnitude are rounding
/// noise and clamp to zero.
const CM2_EPS: f64 = 1e-12;

/// Running raw moments of one sample stream: the count, the mean of `y` and
/// the mean of `y²`. Constant memory, mergeable across shards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    n: u64,
    m1: f64,
    m2: f64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_raw(n: u64, m1: f64, m2: f64) -> Self {
        MomentAccumulator { n, m1, m2 }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn raw_mean(&self) -> f64 {
        self.m1
    }

    pub fn raw_second(&self) -> f64 {
        self.m2
    }

    pub fn update(&mut self, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        self.m1 += (y - self.m1) / n;
        self.m2 += (y * y - self.m2) / n;
    }

    /// Count-weighted combination of two shards.
    pub fn merge(&self, other: &MomentAccumulator) -> MomentAccumulator {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let w = other.n as f64 / n as f64;
        MomentAccumulator {
            n,
            m1: self.m1 + (other.m1 - self.m1) * w,
            m2: self.m2 + (other.m2 - self.m2) * w,
        }
    }

    /// Population variance `M2 - M1²`, clamped at zero.
    pub fn central_second(&self) -> f64 {
        let cm2 = self.m2 - self.m1 * self.m1;
        debug_assert!(cm2 >= -CM2_EPS * self.m2.abs().max(1.0));
        cm2.max(0.0)
    }

    /// Mean and population variance.
    pub fn finalize(&self) -> Result<(f64, f64), TvlaError> {
        if self.n < 2 {
            return Err(TvlaError::InsufficientSamples { n: self.n });
        }
        Ok((self.m1, self.central_second()))
    }
}

/// Two-pass population variance, the reference the streaming form is
/// checked against.
pub fn naive_variance(samples: &[f64]) -> Result<f64, TvlaError> {
    if samples.len() < 2 {
        return Err(TvlaError::InsufficientSamples {
            n: samples.len() as u64,
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    Ok(samples.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n)
}
