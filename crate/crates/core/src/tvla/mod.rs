// SPDX-License-Identifier: Apache-2.0

//! Fixed-vs-random Welch t-test leakage assessment.

mod moments;
mod welch;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{GateId, GateType, Netlist};
use crate::serde_util;
use crate::sim::{Group, PowerModel, SimError, StimulusSpec, TraceGenerator};

pub use moments::{naive_variance, MomentAccumulator};
pub use welch::{welch_t, GroupStats, WelchResult};

pub const DEFAULT_THRESHOLD: f64 = 4.5;
pub const MIN_TRACES: u64 = 200;
pub const PROTECTED_LABEL: &str = "protected with 99.999% confidence";

/// Baselines below this carry no usable leakage signal.
pub const NEGLIGIBLE_BASELINE: f64 = 1e-6;

/// Traces per parallel work unit. Fixed so merge order, and therefore every
/// floating-point result, does not depend on the thread count.
const CHUNK: u64 = 512;

#[derive(Debug, Error)]
pub enum TvlaError {
    #[error("at least 2 samples are needed, got {n}")]
    InsufficientSamples { n: u64 },
    #[error("both groups have zero variance (mean difference {mean_diff})")]
    ZeroVariance { mean_diff: f64 },
    #[error("at least {min} traces per group are required, got {got}")]
    TooFewTraces { got: u64, min: u64 },
    #[error("no secret inputs selected")]
    NoSecretInputs,
    #[error("baseline leakage of gate {gate} is negligible")]
    NegligibleBaseline { gate: GateId },
    #[error("total baseline leakage is zero")]
    ZeroTotal,
    #[error("reports cover different gates")]
    UniverseMismatch,
    #[error("secret input `{0}` not found")]
    UnknownSecret(String),
    #[error(transparent)]
    Sim(SimError),
}

impl From<SimError> for TvlaError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NoSecretInputs => TvlaError::NoSecretInputs,
            other => TvlaError::Sim(other),
        }
    }
}

/// Which primary inputs are the secret.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecretSelection {
    /// The first quarter (rounded up) of the primary inputs.
    Auto,
    Names(Vec<String>),
}

impl SecretSelection {
    pub fn resolve(&self, n: &Netlist) -> Result<Vec<GateId>, TvlaError> {
        match self {
            SecretSelection::Auto => {
                let k = n.inputs().len().div_ceil(4);
                Ok(n.inputs()[..k].to_vec())
            }
            SecretSelection::Names(names) => names
                .iter()
                .map(|s| {
                    n.find(s)
                        .filter(|&id| n.gate(id).gtype == GateType::Input)
                        .ok_or_else(|| TvlaError::UnknownSecret(s.clone()))
                })
                .collect(),
        }
    }

    /// Resolves against `n` and returns the explicit name list, so a derived
    /// netlist with extra inputs keeps the same secret.
    pub fn pinned(&self, n: &Netlist) -> Result<SecretSelection, TvlaError> {
        let ids = self.resolve(n)?;
        Ok(SecretSelection::Names(
            ids.iter().map(|&i| n.gate(i).name.clone()).collect(),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    /// Traces per group.
    pub n_traces: u64,
    pub secret: SecretSelection,
    /// Secret value in the fixed group; `None` means all ones.
    pub fixed_value: Option<Vec<bool>>,
    pub cycles_per_trace: u32,
    pub power: PowerModel,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            n_traces: 10_000,
            secret: SecretSelection::Auto,
            fixed_value: None,
            cycles_per_trace: 2,
            power: PowerModel::default(),
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
        }
    }
}

impl AcquisitionConfig {
    /// Copy with the secret pinned to names resolved against `original`.
    pub fn pinned_to(&self, original: &Netlist) -> Result<AcquisitionConfig, TvlaError> {
        Ok(AcquisitionConfig {
            secret: self.secret.pinned(original)?,
            ..self.clone()
        })
    }

    fn stimulus(&self, n: &Netlist, group: Group) -> Result<StimulusSpec, TvlaError> {
        let secret = self.secret.resolve(n)?;
        if secret.is_empty() {
            return Err(TvlaError::NoSecretInputs);
        }
        let mut spec = StimulusSpec::new(secret, group, self.seed);
        if let Some(v) = &self.fixed_value {
            spec.fixed_value = v.clone();
        }
        spec.cycles_per_trace = self.cycles_per_trace;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateLeakage {
    pub id: GateId,
    pub name: String,
    #[serde(rename = "type")]
    pub gtype: GateType,
    #[serde(with = "serde_util::float")]
    pub t: f64,
    /// Degrees of freedom; absent when both groups had zero variance.
    #[serde(with = "serde_util::opt_float")]
    pub v: Option<f64>,
    pub leaky: bool,
}

impl GateLeakage {
    pub fn abs_t(&self) -> f64 {
        self.t.abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvlaSummary {
    #[serde(with = "serde_util::float")]
    pub mean_abs_t: f64,
    #[serde(with = "serde_util::float")]
    pub median_abs_t: f64,
    pub leaky_count: usize,
    pub leaky_gates: Vec<String>,
    pub protected: bool,
    pub verdict: String,
}

/// Per-gate leakage map plus a design summary. Summary statistics cover the
/// non-`INPUT` gates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvlaReport {
    pub design: String,
    pub n_traces: u64,
    pub threshold: f64,
    pub gates: Vec<GateLeakage>,
    pub summary: TvlaSummary,
}

impl TvlaReport {
    /// Builds a report from per-gate t values, deriving leaky flags and the
    /// summary.
    pub fn from_gates(
        design: impl Into<String>,
        n_traces: u64,
        threshold: f64,
        mut gates: Vec<GateLeakage>,
    ) -> Self {
        for g in &mut gates {
            g.leaky = g.abs_t() > threshold;
        }
        let logic: Vec<&GateLeakage> = gates
            .iter()
            .filter(|g| g.gtype != GateType::Input)
            .collect();
        let mut abs: Vec<f64> = logic.iter().map(|g| g.abs_t()).collect();
        abs.sort_by(f64::total_cmp);
        let mean_abs_t = if abs.is_empty() {
            0.0
        } else {
            abs.iter().sum::<f64>() / abs.len() as f64
        };
        let median_abs_t = match abs.len() {
            0 => 0.0,
            k if k % 2 == 1 => abs[k / 2],
            k => 0.5 * (abs[k / 2 - 1] + abs[k / 2]),
        };
        let leaky_gates: Vec<String> = logic
            .iter()
            .filter(|g| g.leaky)
            .map(|g| g.name.clone())
            .collect();
        let protected = leaky_gates.is_empty();
        TvlaReport {
            design: design.into(),
            n_traces,
            threshold,
            summary: TvlaSummary {
                mean_abs_t,
                median_abs_t,
                leaky_count: leaky_gates.len(),
                leaky_gates,
                protected,
                verdict: if protected {
                    PROTECTED_LABEL.to_string()
                } else {
                    "leaky".to_string()
                },
            },
            gates,
        }
    }

    pub fn abs_t(&self) -> Vec<f64> {
        self.gates.iter().map(|g| g.abs_t()).collect()
    }

    pub fn gate_by_name(&self, name: &str) -> Option<&GateLeakage> {
        self.gates.iter().find(|g| g.name == name)
    }
}

/// Fixed-vs-random t-test on every gate of `n`.
pub fn leak_estimate(n: &Netlist, cfg: &AcquisitionConfig) -> Result<TvlaReport, TvlaError> {
    if cfg.n_traces < MIN_TRACES {
        return Err(TvlaError::TooFewTraces {
            got: cfg.n_traces,
            min: MIN_TRACES,
        });
    }
    let fixed = TraceGenerator::new(n, &cfg.stimulus(n, Group::Fixed)?, &cfg.power)?;
    let random = TraceGenerator::new(n, &cfg.stimulus(n, Group::Random)?, &cfg.power)?;
    let g0 = accumulate(&fixed, cfg.n_traces);
    let g1 = accumulate(&random, cfg.n_traces);

    let gates = n
        .gates()
        .iter()
        .zip(g0.iter().zip(&g1))
        .map(|(g, (a, b))| {
            let (t, v) = match welch_t(&GroupStats::from_acc(a)?, &GroupStats::from_acc(b)?) {
                Ok(r) => (r.t, Some(r.v)),
                Err(TvlaError::ZeroVariance { mean_diff }) => {
                    let t = if mean_diff == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY.copysign(mean_diff)
                    };
                    (t, None)
                }
                Err(e) => return Err(e),
            };
            Ok(GateLeakage {
                id: g.id,
                name: g.name.clone(),
                gtype: g.gtype,
                t,
                v,
                leaky: false,
            })
        })
        .collect::<Result<Vec<_>, TvlaError>>()?;
    Ok(TvlaReport::from_gates(
        n.name(),
        cfg.n_traces,
        cfg.threshold,
        gates,
    ))
}

fn accumulate(gen: &TraceGenerator, n_traces: u64) -> Vec<MomentAccumulator> {
    let width = gen.gate_count();
    let shards: Vec<Vec<MomentAccumulator>> = (0..n_traces.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut accs = vec![MomentAccumulator::new(); width];
            let first = c * CHUNK;
            gen.accumulate(first, CHUNK.min(n_traces - first), &mut accs);
            accs
        })
        .collect();
    let mut total = vec![MomentAccumulator::new(); width];
    for shard in &shards {
        for (t, s) in total.iter_mut().zip(shard) {
            *t = t.merge(s);
        }
    }
    total
}

/// Relative leakage reduction of gate `i`: `(before - after) / before`.
/// Negative when leakage got worse.
pub fn compare_leakage(before: &[f64], after: &[f64], i: GateId) -> Result<f64, TvlaError> {
    let b = before[i];
    if b < NEGLIGIBLE_BASELINE {
        return Err(TvlaError::NegligibleBaseline { gate: i });
    }
    Ok((b - after[i]) / b)
}

/// Percentage drop of total |t| over the non-`INPUT` gates. Both reports
/// must list the same gates in the same order.
pub fn aggregate_reduction(before: &TvlaReport, after: &TvlaReport) -> Result<f64, TvlaError> {
    if before.gates.len() != after.gates.len()
        || before
            .gates
            .iter()
            .zip(&after.gates)
            .any(|(a, b)| a.name != b.name)
    {
        return Err(TvlaError::UniverseMismatch);
    }
    let total = |r: &TvlaReport| -> f64 {
        r.gates
            .iter()
            .filter(|g| g.gtype != GateType::Input)
            .map(|g| g.abs_t())
            .sum()
    };
    let tb = total(before);
    if tb == 0.0 {
        return Err(TvlaError::ZeroTotal);
    }
    Ok(100.0 * (tb - total(after)) / tb)
}
