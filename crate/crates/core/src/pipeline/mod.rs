// SPDX-License-Identifier: Apache-2.0

//! End-to-end model-guided masking of a design, its report, and the
//! command-line front end.

pub mod cli;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::datagen::DatagenError;
use crate::graph::{graphify, structural_features, FeatureSchema};
use crate::masking::{
    maskable_gates, modify, overhead_estimate, MaskError, MaskedNetlist, OverheadReport,
};
use crate::ml::{MlError, Model};
use crate::netlist::{GateId, Netlist, NetlistError};
use crate::sim::SimError;
use crate::tvla::{
    aggregate_reduction, leak_estimate, AcquisitionConfig, TvlaError, TvlaReport, TvlaSummary,
};
use crate::xai::{apply_rules, Decision, Procedure, RuleSet, XaiError};

pub use report::{report_render, timings_render};

/// Score given to a gate matched by a MASK rule, unless the model already
/// scores it higher.
pub const RULE_MASK_SCORE: f64 = 0.99;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: NetlistError },
    #[error("{0}")]
    Usage(String),
    #[error("model uses locality {expected}, requested {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("rule set was built for a different feature schema")]
    RulesSchemaMismatch,
    #[error("{}: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Tvla(#[from] TvlaError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Xai(#[from] XaiError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl Error {
    /// Whether the error traces back to the caller's inputs rather than a
    /// defect in this crate.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::Mask(MaskError::Netlist(_) | MaskError::Sim(_) | MaskError::UnknownGate(_))
                | Error::Datagen(DatagenError::Mask { .. })
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MaskBudget {
    /// Percent of the baseline leaky-gate count, in (0, 100].
    PercentOfLeaky(u32),
    Absolute(usize),
}

impl MaskBudget {
    /// Gate count for a design with `leaky` leaky gates.
    pub fn resolve(self, leaky: usize) -> usize {
        match self {
            MaskBudget::PercentOfLeaky(p) => leaky * p as usize / 100,
            MaskBudget::Absolute(k) => k,
        }
    }

    fn needs_baseline(self) -> bool {
        matches!(self, MaskBudget::PercentOfLeaky(_))
    }
}

impl FromStr for MaskBudget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(p) = s.strip_suffix('%') {
            let p: u32 = p
                .trim()
                .parse()
                .map_err(|_| format!("bad percentage `{s}`"))?;
            if p == 0 || p > 100 {
                return Err(format!("percentage must be in 1..=100, got {p}"));
            }
            Ok(MaskBudget::PercentOfLeaky(p))
        } else {
            let k: usize = s.parse().map_err(|_| format!("bad budget `{s}`"))?;
            if k == 0 {
                return Err("absolute budget must be at least 1".into());
            }
            Ok(MaskBudget::Absolute(k))
        }
    }
}

impl fmt::Display for MaskBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskBudget::PercentOfLeaky(p) => write!(f, "{p}% of leaky gates"),
            MaskBudget::Absolute(k) => write!(f, "{k} gates"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskOptions {
    pub budget: MaskBudget,
    pub locality: usize,
    pub acquisition: AcquisitionConfig,
    /// Rank by rules alone and ignore any model.
    pub rules_only: bool,
}

/// A maskable gate with its ranking score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: GateId,
    pub name: String,
    pub score: f64,
    /// Procedure of the first matching rule, if any.
    pub rule: Option<Procedure>,
}

/// Maskable gates of `d` ranked by score (descending, ties by ascending id),
/// and the names of gates excluded by DO_NOT_MASK rules.
///
/// Without a model (rules-only) a MASK rule scores 1, no match scores 0.5.
pub fn rank_candidates(
    d: &Netlist,
    model: Option<&Model>,
    rules: Option<&RuleSet>,
    locality: usize,
) -> Result<(Vec<Candidate>, Vec<String>), Error> {
    let schema = FeatureSchema::new(locality);
    if let Some(m) = model {
        if m.schema() != &schema {
            return Err(Error::SchemaMismatch {
                expected: m.schema().locality,
                found: locality,
            });
        }
    }
    if let Some(rs) = rules {
        if rs.schema_digest != schema.digest() {
            return Err(Error::RulesSchemaMismatch);
        }
    }
    if model.is_none() && rules.is_none() {
        return Err(Error::Usage("ranking needs a model or a rule set".into()));
    }
    let g = graphify(d);
    let scored: Vec<(Candidate, bool)> = maskable_gates(d)
        .into_par_iter()
        .map(|id| {
            let x = structural_features(&g, &schema, id).values;
            let decision = rules.map_or(Decision::NoMatch, |rs| apply_rules(rs, &x));
            let base = match model {
                Some(m) => m.predict_score(&x)?,
                None => 0.5,
            };
            let (score, rule) = match decision {
                Decision::Mask if model.is_some() => {
                    (base.max(RULE_MASK_SCORE), Some(Procedure::Mask))
                }
                Decision::Mask => (1.0, Some(Procedure::Mask)),
                Decision::DoNotMask => (base, Some(Procedure::DoNotMask)),
                Decision::NoMatch => (base, None),
            };
            let c = Candidate {
                id,
                name: d.gate(id).name.clone(),
                score,
                rule,
            };
            Ok((c, decision == Decision::DoNotMask))
        })
        .collect::<Result<_, MlError>>()?;
    let mut excluded = Vec::new();
    let mut ranked = Vec::new();
    for (c, skip) in scored {
        if skip {
            excluded.push(c.name);
        } else {
            ranked.push(c);
        }
    }
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    Ok((ranked, excluded))
}

/// Settings echoed into the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub budget: MaskBudget,
    pub locality: usize,
    pub traces: u64,
    pub seed: u64,
    pub secret_inputs: Vec<String>,
    pub noise_sigma: f64,
    pub threshold: f64,
    pub rules_only: bool,
    /// Hex SHA-256 of the model file contents.
    pub model_digest: Option<String>,
    pub rules_digest: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageTimes {
    pub stages: Vec<(&'static str, f64)>,
}

impl StageTimes {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.stages.push((stage, t0.elapsed().as_secs_f64()));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub design: String,
    pub config: RunConfig,
    /// Gates the budget resolved to, after clamping.
    pub budget_gates: usize,
    pub candidates: Vec<Candidate>,
    pub excluded: Vec<String>,
    pub selected: Vec<String>,
    pub before: TvlaReport,
    /// Leakage of the masked design projected onto the original gates.
    pub after: TvlaReport,
    /// Summary over every gate of the masked design, mask inputs included.
    pub masked_summary: TvlaSummary,
    /// Total leakage reduction in percent, `aggregate_reduction(before, after)`.
    pub reduction: f64,
    pub overhead: OverheadReport,
    pub warnings: Vec<String>,
    /// Wall-clock seconds per stage; left out of the report file so seeded
    /// runs stay byte-identical.
    #[serde(skip)]
    pub timings: StageTimes,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Ranks the maskable gates of `d`, masks the top entries within the budget
/// and measures the result.
pub fn polaris_mask(
    d: &Netlist,
    model: Option<&Model>,
    rules: Option<&RuleSet>,
    opts: &MaskOptions,
) -> Result<(MaskedNetlist, RunReport), Error> {
    let mut times = StageTimes::default();
    let mut warnings = Vec::new();
    let model = if opts.rules_only {
        if rules.is_none() {
            return Err(Error::Usage("rules-only mode needs a rule set".into()));
        }
        None
    } else {
        model
    };
    let acq = opts.acquisition.pinned_to(d)?;

    let before = times.time("baseline tvla", || leak_estimate(d, &acq))?;
    let (ranked, excluded) = times.time("inference", || {
        rank_candidates(d, model, rules, opts.locality)
    })?;

    let mut want = opts.budget.resolve(before.summary.leaky_count);
    if opts.budget.needs_baseline() && want == 0 {
        warnings.push(format!(
            "{} resolves to no gates ({} leaky); nothing masked",
            opts.budget, before.summary.leaky_count
        ));
    }
    if want > ranked.len() {
        warnings.push(format!(
            "budget of {want} gates exceeds the {} candidates; clamped",
            ranked.len()
        ));
        want = ranked.len();
    }
    let chosen: Vec<GateId> = ranked[..want].iter().map(|c| c.id).collect();
    let masked = times.time("modify", || modify(d, &chosen))?;

    let (after, masked_summary) = if chosen.is_empty() {
        (before.clone(), before.summary.clone())
    } else {
        let raw = times.time("final tvla", || leak_estimate(&masked.netlist, &acq))?;
        (masked.project_report(&raw), raw.summary)
    };
    let reduction = match aggregate_reduction(&before, &after) {
        Ok(r) => r,
        Err(TvlaError::ZeroTotal) => {
            warnings.push("baseline leakage is zero; reduction reported as 0%".into());
            0.0
        }
        Err(e) => return Err(e.into()),
    };
    let overhead = times.time("overhead", || {
        overhead_estimate(d, &masked.netlist, &acq.power)
    })?;

    let secret_inputs = match &acq.secret {
        crate::tvla::SecretSelection::Names(v) => v.clone(),
        crate::tvla::SecretSelection::Auto => Vec::new(),
    };
    let report = RunReport {
        design: d.name().to_string(),
        config: RunConfig {
            budget: opts.budget,
            locality: opts.locality,
            traces: acq.n_traces,
            seed: acq.seed,
            secret_inputs,
            noise_sigma: acq.power.noise_sigma,
            threshold: acq.threshold,
            rules_only: opts.rules_only,
            model_digest: model.map(|m| sha256_hex(m.to_json().as_bytes())),
            rules_digest: rules.map(|r| sha256_hex(r.to_json().as_bytes())),
        },
        budget_gates: want,
        selected: chosen.iter().map(|&i| d.gate(i).name.clone()).collect(),
        candidates: ranked,
        excluded,
        before,
        after,
        masked_summary,
        reduction,
        overhead,
        warnings,
        timings: times,
    };
    Ok((masked, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FeatureSchema;
    use crate::ml::{AdaBoostModel, Polarity, Stump, TrainConfig};
    use crate::netlist::{parse_bench, GateType};
    use crate::xai::{Condition, Rule};

    fn design() -> Netlist {
        parse_bench(
            "INPUT(k0)\nINPUT(k1)\nINPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(d)\nINPUT(e)\nINPUT(f)\n\
             OUTPUT(y)\nOUTPUT(z)\n\
             g1 = AND(k0, a)\ng2 = OR(k1, b)\ng3 = AND(k0, c)\ng4 = XOR(g1, d)\n\
             g5 = NAND(g2, e)\ny = OR(g4, g5)\nz = AND(g3, f)\n",
        )
        .unwrap()
        .with_name("toy")
    }

    fn model(l: usize, stumps: Vec<Stump>) -> Model {
        Model::Adaboost(AdaBoostModel {
            schema: FeatureSchema::new(l),
            stumps,
            shrinkage: 1.0,
            offset: 0.0,
            train_config: TrainConfig::default(),
            dataset_digest: String::new(),
            errors: vec![],
        })
    }

    fn opts(budget: MaskBudget) -> MaskOptions {
        MaskOptions {
            budget,
            locality: 3,
            acquisition: AcquisitionConfig {
                n_traces: 2000,
                seed: 3,
                ..AcquisitionConfig::default()
            },
            rules_only: false,
        }
    }

    #[test]
    fn budget_parsing() {
        assert_eq!("50%".parse(), Ok(MaskBudget::PercentOfLeaky(50)));
        assert_eq!("7".parse(), Ok(MaskBudget::Absolute(7)));
        assert!("0%".parse::<MaskBudget>().is_err());
        assert!("101%".parse::<MaskBudget>().is_err());
        assert!("0".parse::<MaskBudget>().is_err());
        assert!("x".parse::<MaskBudget>().is_err());
        assert_eq!(MaskBudget::PercentOfLeaky(50).resolve(7), 3);
        assert_eq!(MaskBudget::PercentOfLeaky(100).resolve(7), 7);
    }

    #[test]
    fn equal_scores_rank_by_id() {
        let d = design();
        let m = model(3, vec![]);
        let (ranked, excluded) = rank_candidates(&d, Some(&m), None, 3).unwrap();
        assert!(excluded.is_empty());
        let ids: Vec<GateId> = ranked.iter().map(|c| c.id).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn rules_boost_and_exclude() {
        let d = design();
        let schema = FeatureSchema::new(3);
        let and_root =
            Condition::new(&schema, schema.type_index(0, Some(GateType::And)), 1).unwrap();
        let or_root = Condition::new(&schema, schema.type_index(0, Some(GateType::Or)), 1).unwrap();
        let rs = RuleSet {
            schema_digest: schema.digest(),
            rules: vec![
                Rule {
                    conditions: vec![or_root],
                    procedure: Procedure::DoNotMask,
                    support: 1,
                    mean_abs_phi: 0.0,
                },
                Rule {
                    conditions: vec![and_root],
                    procedure: Procedure::Mask,
                    support: 1,
                    mean_abs_phi: 0.0,
                },
            ],
        };
        let m = model(3, vec![]);
        let (ranked, excluded) = rank_candidates(&d, Some(&m), Some(&rs), 3).unwrap();
        assert_eq!(excluded, vec!["g2", "y"]);
        let top: Vec<&str> = ranked.iter().take(3).map(|c| c.name.as_str()).collect();
        assert_eq!(top, vec!["g1", "g3", "z"]);
        assert_eq!(ranked[0].score, RULE_MASK_SCORE);

        let (only, _) = rank_candidates(&d, None, Some(&rs), 3).unwrap();
        assert_eq!(only[0].score, 1.0);
        assert!(rank_candidates(&d, None, None, 3).is_err());
    }

    #[test]
    fn schema_mismatch() {
        let d = design();
        assert!(matches!(
            rank_candidates(&d, Some(&model(5, vec![])), None, 3),
            Err(Error::SchemaMismatch {
                expected: 5,
                found: 3
            })
        ));
    }

    #[test]
    fn full_run_and_budget_prefixes() {
        let d = design();
        let schema = FeatureSchema::new(3);
        let m = model(
            3,
            vec![Stump {
                feature: schema.type_index(0, Some(GateType::And)),
                polarity: Polarity::Set,
                alpha: 1.0,
            }],
        );
        let mut picks = Vec::new();
        for pct in [50, 75, 100] {
            let (masked, r) =
                polaris_mask(&d, Some(&m), None, &opts(MaskBudget::PercentOfLeaky(pct))).unwrap();
            assert_eq!(
                r.budget_gates,
                r.before.summary.leaky_count * pct as usize / 100
            );
            assert_eq!(masked.masked().len(), r.budget_gates);
            let again = aggregate_reduction(&r.before, &r.after).unwrap();
            assert_eq!(again, r.reduction);
            picks.push(r.selected);
        }
        assert!(picks[1].starts_with(&picks[0]));
        assert!(picks[2].starts_with(&picks[1]));
    }

    #[test]
    fn oversized_budget_is_clamped() {
        let d = design();
        let (masked, r) = polaris_mask(
            &d,
            Some(&model(3, vec![])),
            None,
            &opts(MaskBudget::Absolute(50)),
        )
        .unwrap();
        let n_maskable = maskable_gates(&d).len();
        assert_eq!(r.budget_gates, n_maskable);
        assert_eq!(masked.masked().len(), n_maskable);
        assert_eq!(r.warnings.len(), 1);
        assert!(r.reduction > 0.0);
    }

    #[test]
    fn deterministic_report() {
        let d = design();
        let m = model(3, vec![]);
        let a = polaris_mask(&d, Some(&m), None, &opts(MaskBudget::Absolute(2)))
            .unwrap()
            .1;
        let b = polaris_mask(&d, Some(&m), None, &opts(MaskBudget::Absolute(2)))
            .unwrap()
            .1;
        assert_eq!(a.to_json(), b.to_json());
    }
}
