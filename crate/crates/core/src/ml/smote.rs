// SPDX-License-Identifier: Apache-2.0

use rand::Rng;

use super::MlError;

fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Synthetic minority samples for binary features.
///
/// Each synthetic point takes a random minority point and one of its `k`
/// nearest minority neighbours (Hamming distance, ties by index), draws an
/// independent uniform λ per coordinate, interpolates and rounds (λ ≥ 0.5
/// takes the neighbour's bit). Produces `ceil(ratio * |minority|)` points.
pub fn smote(
    minority: &[Vec<u8>],
    k: usize,
    ratio: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<u8>>, MlError> {
    Ok(synthesize(minority, k, ratio, rng)?
        .into_iter()
        .map(|(p, _, _)| p)
        .collect())
}

/// Synthetic points with the indices of their two parents.
fn synthesize(
    minority: &[Vec<u8>],
    k: usize,
    ratio: f64,
    rng: &mut impl Rng,
) -> Result<Vec<(Vec<u8>, usize, usize)>, MlError> {
    let count = (ratio * minority.len() as f64).ceil() as usize;
    if count == 0 {
        return Ok(Vec::new());
    }
    if minority.len() <= k || k == 0 {
        return Err(MlError::TooFewSamples {
            have: minority.len(),
            need: k + 1,
        });
    }
    let neighbours: Vec<Vec<usize>> = (0..minority.len())
        .map(|i| {
            let mut others: Vec<(usize, usize)> = (0..minority.len())
                .filter(|&j| j != i)
                .map(|j| (hamming(&minority[i], &minority[j]), j))
                .collect();
            others.sort_unstable();
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();
    Ok((0..count)
        .map(|_| {
            let i = rng.random_range(0..minority.len());
            let j = neighbours[i][rng.random_range(0..k)];
            let p = minority[i]
                .iter()
                .zip(&minority[j])
                .map(|(&a, &b)| {
                    let lambda: f64 = rng.random();
                    let v = a as f64 + lambda * (b as f64 - a as f64);
                    (v >= 0.5) as u8
                })
                .collect();
            (p, i, j)
        })
        .collect())
}
