// SPDX-License-Identifier: Apache-2.0

//! Labeled training data from repeated random masking.
//!
//! For each design the baseline leakage is measured once. Then, batch by
//! batch, a random set of still-unused maskable gates is masked (fresh from
//! the original each time), leakage is measured again, and every gate in the
//! batch becomes a sample labeled by how much its own leakage dropped.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{graphify, structural_features, FeatureSchema};
use crate::masking::{maskable_gates, modify, MaskError};
use crate::netlist::{GateId, Netlist};
use crate::serde_util;
use crate::tvla::{
    compare_leakage, leak_estimate, AcquisitionConfig, TvlaError, NEGLIGIBLE_BASELINE,
};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("cannot draw {k} gates from a pool of {pool}")]
    PoolExhausted { k: usize, pool: usize },
    #[error("no samples were produced")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is corrupt: {0}")]
    Corrupt(String),
    #[error("design `{design}`: {source}")]
    Tvla { design: String, source: TvlaError },
    #[error("design `{design}`: {source}")]
    Mask { design: String, source: MaskError },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatagenConfig {
    /// Gates masked per iteration.
    pub mask_size: usize,
    pub locality: usize,
    /// Maximum iterations per design.
    pub iterations: usize,
    /// Minimum leakage reduction ratio for a "good" label.
    pub good_ratio: f64,
    pub acquisition: AcquisitionConfig,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        DatagenConfig {
            mask_size: 200,
            locality: 7,
            iterations: 100,
            good_ratio: 0.70,
            acquisition: AcquisitionConfig::default(),
        }
    }
}

impl DatagenConfig {
    fn check(&self) -> Result<(), DatagenError> {
        if !(self.good_ratio > 0.0 && self.good_ratio < 1.0) {
            return Err(DatagenError::InvalidConfig(format!(
                "good-label threshold must lie in (0, 1), got {}",
                self.good_ratio
            )));
        }
        if self.mask_size == 0 || self.locality == 0 {
            return Err(DatagenError::InvalidConfig(
                "mask size and locality must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Generation settings echoed into the dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    #[serde(rename = "M_size")]
    pub mask_size: usize,
    #[serde(rename = "itr")]
    pub iterations: usize,
    #[serde(rename = "theta_r")]
    pub good_ratio: f64,
    pub traces: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub design: String,
    /// Gate name in the original design.
    pub gate: String,
    pub iter: usize,
    #[serde(rename = "r_ratio")]
    pub reduction_ratio: f64,
    pub label: u8,
    #[serde(with = "serde_util::bitstring")]
    pub features: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub config: DatasetConfig,
    pub samples: Vec<LabeledSample>,
    /// `design:gate` entries left out because their baseline leakage was
    /// negligible.
    #[serde(default)]
    pub skipped: Vec<String>,
}

impl Dataset {
    /// Sample counts for labels 0 and 1.
    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.samples.iter().filter(|s| s.label == 1).count();
        [self.samples.len() - pos, pos]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Dataset, DatagenError> {
        let d: Dataset =
            serde_json::from_str(text).map_err(|e| DatagenError::Corrupt(e.to_string()))?;
        let len = d.schema.feature_len();
        for s in &d.samples {
            if s.features.len() != len {
                return Err(DatagenError::Corrupt(format!(
                    "sample {}:{} has {} features, schema needs {len}",
                    s.design,
                    s.gate,
                    s.features.len()
                )));
            }
            if s.label > 1 {
                return Err(DatagenError::Corrupt(format!(
                    "label {} is not binary",
                    s.label
                )));
            }
        }
        Ok(d)
    }

    /// Hex SHA-256 of the serialized dataset.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// Uniform sample of `k` distinct entries of `pool`, in draw order.
pub fn random_select(
    pool: &[GateId],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<GateId>, DatagenError> {
    if k > pool.len() {
        return Err(DatagenError::PoolExhausted {
            k,
            pool: pool.len(),
        });
    }
    Ok(index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}

struct DesignSamples {
    samples: Vec<LabeledSample>,
    skipped: Vec<String>,
}

fn design_samples(
    n: &Netlist,
    index: usize,
    cfg: &DatagenConfig,
    schema: &FeatureSchema,
) -> Result<DesignSamples, DatagenError> {
    let tvla_err = |source| DatagenError::Tvla {
        design: n.name().to_string(),
        source,
    };
    let acq = cfg.acquisition.pinned_to(n).map_err(tvla_err)?;
    let baseline = leak_estimate(n, &acq).map_err(tvla_err)?.abs_t();
    let graph = graphify(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.acquisition.seed);
    rng.set_stream(index as u64);

    let mut pool = maskable_gates(n);
    let mut out = DesignSamples {
        samples: Vec::new(),
        skipped: Vec::new(),
    };
    let mut run = 0;
    while cfg.mask_size <= pool.len() && run < cfg.iterations {
        let mut selected = random_select(&pool, cfg.mask_size, &mut rng)?;
        selected.sort_unstable();
        let masked = modify(n, &selected).map_err(|source| DatagenError::Mask {
            design: n.name().to_string(),
            source,
        })?;
        pool.retain(|g| selected.binary_search(g).is_err());
        let after = masked
            .project_report(&leak_estimate(&masked.netlist, &acq).map_err(tvla_err)?)
            .abs_t();
        for &i in &selected {
            let name = &n.gate(i).name;
            if baseline[i] < NEGLIGIBLE_BASELINE {
                out.skipped.push(format!("{}:{name}", n.name()));
                continue;
            }
            let r = compare_leakage(&baseline, &after, i).map_err(tvla_err)?;
            out.samples.push(LabeledSample {
                design: n.name().to_string(),
                gate: name.clone(),
                iter: run,
                reduction_ratio: r,
                label: (r >= cfg.good_ratio) as u8,
                features: structural_features(&graph, schema, i).values,
            });
        }
        run += 1;
    }
    Ok(out)
}

/// Builds the labeled dataset over `designs`. Designs run in parallel;
/// samples are ordered by design, then iteration, then gate id.
pub fn cognition_generate(
    designs: &[Netlist],
    cfg: &DatagenConfig,
) -> Result<Dataset, DatagenError> {
    cfg.check()?;
    let schema = FeatureSchema::new(cfg.locality);
    let per_design: Vec<DesignSamples> = designs
        .par_iter()
        .enumerate()
        .map(|(k, n)| design_samples(n, k, cfg, &schema))
        .collect::<Result<_, _>>()?;
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for d in per_design {
        samples.extend(d.samples);
        skipped.extend(d.skipped);
    }
    if samples.is_empty() {
        return Err(DatagenError::EmptyDataset);
    }
    Ok(Dataset {
        schema,
        config: DatasetConfig {
            mask_size: cfg.mask_size,
            iterations: cfg.iterations,
            good_ratio: cfg.good_ratio,
            traces: cfg.acquisition.n_traces,
            seed: cfg.acquisition.seed,
        },
        samples,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;
    use crate::synth;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn small_cfg() -> DatagenConfig {
        DatagenConfig {
            mask_size: 4,
            iterations: 3,
            acquisition: AcquisitionConfig {
                n_traces: 2000,
                seed: 5,
                ..AcquisitionConfig::default()
            },
            ..DatagenConfig::default()
        }
    }

    #[test]
    fn select_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pool = [3, 5, 7, 9, 11];
        let mut all = random_select(&pool, 5, &mut rng).unwrap();
        all.sort_unstable();
        assert_eq!(all, pool);
        assert!(random_select(&pool, 0, &mut rng).unwrap().is_empty());
        assert!(matches!(
            random_select(&pool, 6, &mut rng),
            Err(DatagenError::PoolExhausted { .. })
        ));
    }

    #[test]
    fn select_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pool: Vec<GateId> = (0..10).collect();
        let mut counts = [0f64; 10];
        for _ in 0..10_000 {
            counts[random_select(&pool, 1, &mut rng).unwrap()[0]] += 1.0;
        }
        let stat: f64 = counts.iter().map(|c| (c - 1000.0).powi(2) / 1000.0).sum();
        let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(stat);
        assert!(p > 0.01, "chi2 = {stat}, p = {p}");
    }

    #[test]
    fn single_gate_design() {
        let n = parse_bench("INPUT(k)\nINPUT(p)\nOUTPUT(f)\nf = AND(k, p)").unwrap();
        let cfg = DatagenConfig {
            mask_size: 1,
            iterations: 1,
            ..small_cfg()
        };
        let d = cognition_generate(&[n], &cfg).unwrap();
        assert_eq!(d.samples.len(), 1);
        let s = &d.samples[0];
        assert_eq!(s.gate, "f");
        assert_eq!(s.label, (s.reduction_ratio >= 0.7) as u8);
        assert!(
            s.reduction_ratio > 0.7,
            "masking a leaky AND helps: {}",
            s.reduction_ratio
        );
    }

    #[test]
    fn bounded_deterministic_and_consistent() {
        let designs = [synth::ripple_adder("rca4", 4), synth::comparator("cmp4", 4)];
        let cfg = small_cfg();
        let a = cognition_generate(&designs, &cfg).unwrap();
        let b = cognition_generate(&designs, &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let mut bound = 0;
        for n in &designs {
            bound += (cfg.iterations * cfg.mask_size).min(maskable_gates(n).len());
        }
        assert!(a.samples.len() <= bound);
        for s in &a.samples {
            assert_eq!(s.label == 1, s.reduction_ratio >= cfg.good_ratio);
            assert_eq!(s.features.len(), a.schema.feature_len());
        }
        // no gate sampled twice within a design
        let mut keys: Vec<_> = a.samples.iter().map(|s| (&s.design, &s.gate)).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), a.samples.len());
        let [neg, pos] = a.class_counts();
        assert_eq!(neg + pos, a.samples.len());
    }

    #[test]
    fn json_round_trip() {
        let d = cognition_generate(&[synth::ripple_adder("rca4", 4)], &small_cfg()).unwrap();
        let text = d.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["config"]["M_size"], 4);
        assert_eq!(v["schema"]["L"], 7);
        assert!(v["samples"][0]["features"]
            .as_str()
            .unwrap()
            .chars()
            .all(|c| c == '0' || c == '1'));
        assert_eq!(Dataset::from_json(&text).unwrap(), d);
        assert!(Dataset::from_json(&text[..text.len() / 2]).is_err());
    }

    #[test]
    fn config_checks() {
        let cfg = DatagenConfig {
            good_ratio: 1.0,
            ..small_cfg()
        };
        assert!(matches!(
            cognition_generate(&[synth::ripple_adder("r", 2)], &cfg),
            Err(DatagenError::InvalidConfig(_))
        ));
        let cfg = DatagenConfig {
            mask_size: 1000,
            ..small_cfg()
        };
        assert!(matches!(
            cognition_generate(&[synth::ripple_adder("r", 2)], &cfg),
            Err(DatagenError::EmptyDataset)
        ));
    }
}
