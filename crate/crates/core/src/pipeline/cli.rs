// SPDX-License-Identifier: Apache-2.0

//! `polaris` command-line interface.
//!
//! Exit codes: 0 success, 1 user error (bad flags, unreadable or invalid
//! input), 2 internal error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::{
    polaris_mask, report_render, timings_render, Error, MaskBudget, MaskOptions, RunReport,
};
use crate::datagen::{cognition_generate, DatagenConfig, Dataset};
use crate::graph::FeatureSchema;
use crate::ml::{load_model, save_model, train, ModelKind, TrainConfig};
use crate::netlist::{parse_bench, write_bench, GateType, Netlist};
use crate::sim::{gen_traces, write_trace_dump, Group, PowerModel, StimulusSpec};
use crate::tvla::{leak_estimate, AcquisitionConfig, SecretSelection, TvlaReport};
use crate::xai::{explain_sample, extract_rules, waterfall_render, Cutoff, RuleConfig, RuleSet};

#[derive(Parser, Debug)]
#[command(
    name = "polaris",
    version,
    about = "Power side-channel assessment and model-guided masking for gate-level netlists"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a .bench netlist
    Parse(ParseArgs),
    /// Fixed-vs-random leakage assessment of every gate
    Tvla(TvlaArgs),
    /// Generate a labelled training set by random masking
    Datagen(DatagenArgs),
    /// Train a masking-benefit classifier
    Train(TrainArgs),
    /// Explain one sample or distil masking rules
    Explain(ExplainArgs),
    /// Mask the highest-ranked gates of a design
    Mask(MaskArgs),
    /// Render a saved run report
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Adaboost,
    RandomForest,
}

#[derive(Args, Debug)]
struct Acquisition {
    /// Traces per group
    #[arg(long, default_value_t = 10_000)]
    traces: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated input names, or "auto" for the first quarter of inputs
    #[arg(long, default_value = "auto")]
    secret_inputs: String,
    /// Standard deviation of additive Gaussian noise per gate sample
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct ParseArgs {
    #[arg(long)]
    netlist: PathBuf,
    /// Write the netlist back out in canonical form
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct TvlaArgs {
    #[arg(long)]
    netlist: PathBuf,
    #[command(flatten)]
    acq: Acquisition,
    /// Write the JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for raw per-gate trace dumps (fixed.ptrc, random.ptrc)
    #[arg(long)]
    dump_traces: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct DatagenArgs {
    /// Directory of .bench files, or a comma-separated list of files
    #[arg(long)]
    designs: String,
    #[arg(long, default_value_t = 200)]
    mask_size: usize,
    #[arg(long, default_value_t = 7)]
    locality: usize,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 0.70)]
    theta: f64,
    #[command(flatten)]
    acq: Acquisition,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Adaboost)]
    kind: Kind,
    /// Boosting rounds
    #[arg(long, default_value_t = 200)]
    rounds: usize,
    /// Forest size
    #[arg(long, default_value_t = 50)]
    trees: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Dataset whose samples form the SHAP background (default: --dataset)
    #[arg(long)]
    background: Option<PathBuf>,
    /// Explain this sample index instead of extracting rules
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = 10)]
    min_support: usize,
    /// Confidence cutoff: a score such as 0.8, or qF for the top/bottom F
    /// fraction of scores
    #[arg(long, default_value = "q0.25")]
    cutoff: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct MaskArgs {
    #[arg(long)]
    netlist: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Rank gates by rules alone
    #[arg(long)]
    rules_only: bool,
    /// Percent of the baseline leaky-gate count ("50%") or a gate count
    #[arg(long)]
    budget: String,
    /// Neighbourhood size (default: the model's)
    #[arg(long)]
    locality: Option<usize>,
    #[command(flatten)]
    acq: Acquisition,
    /// Directory for the masked netlist, report and origin map
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Report JSON written by `mask`
    #[arg(long)]
    from: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

/// Runs the CLI on the process's stdout and stderr and returns the exit
/// code. `POLARIS_THREADS` caps the worker count.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    if let Some(n) = std::env::var("POLARIS_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
    {
        // Fails only when a pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    run(
        argv,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}

/// [`cli_main`] with explicit output streams.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    1
                }
            };
        }
    };
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli, out, err)));
    match result {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_user_error() {
                1
            } else {
                2
            }
        }
        Err(_) => {
            let _ = writeln!(err, "error: internal failure");
            2
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Error> {
    let text = match cli.cmd {
        Command::Parse(a) => cmd_parse(a)?,
        Command::Tvla(a) => cmd_tvla(a)?,
        Command::Datagen(a) => cmd_datagen(a)?,
        Command::Train(a) => cmd_train(a)?,
        Command::Explain(a) => cmd_explain(a)?,
        Command::Mask(a) => {
            let (text, timings) = cmd_mask(a)?;
            let _ = err.write_all(timings.as_bytes());
            text
        }
        Command::Report(a) => cmd_report(a)?,
    };
    out.write_all(text.as_bytes()).map_err(|e| Error::Io {
        path: "<stdout>".into(),
        source: e,
    })
}

fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn to_json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializes");
    s.push('\n');
    s
}

/// Reads a netlist and names it after the file stem.
pub fn read_netlist(path: &Path) -> Result<Netlist, Error> {
    let text = read_text(path)?;
    let name = path.file_stem().map_or_else(
        || "design".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    let n = parse_bench(&text).map_err(|e| Error::Parse {
        path: path.into(),
        source: e,
    })?;
    Ok(n.with_name(name))
}

fn read_dataset(path: &Path) -> Result<Dataset, Error> {
    Dataset::from_json(&read_text(path)?).map_err(|e| Error::Corrupt {
        path: path.into(),
        message: e.to_string(),
    })
}

/// Design files named by `spec`: every `.bench` in a directory (sorted), or
/// a comma-separated list.
fn design_paths(spec: &str) -> Result<Vec<PathBuf>, Error> {
    let p = Path::new(spec);
    if p.is_dir() {
        let entries = std::fs::read_dir(p).map_err(|e| Error::Io {
            path: p.into(),
            source: e,
        })?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|f| f.extension().is_some_and(|x| x == "bench"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Usage(format!("no .bench files in {spec}")));
        }
        return Ok(files);
    }
    Ok(spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .collect())
}

fn acquisition(a: &Acquisition) -> Result<AcquisitionConfig, Error> {
    let secret = if a.secret_inputs.trim().eq_ignore_ascii_case("auto") {
        SecretSelection::Auto
    } else {
        let names: Vec<String> = a
            .secret_inputs
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if names.is_empty() {
            return Err(Error::Usage("--secret-inputs names no inputs".into()));
        }
        SecretSelection::Names(names)
    };
    let mut power = PowerModel::default();
    if let Some(s) = a.noise_sigma {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::Usage(format!(
                "--noise-sigma must be a non-negative number, got {s}"
            )));
        }
        power = power.with_noise(s);
    }
    Ok(AcquisitionConfig {
        n_traces: a.traces,
        secret,
        power,
        seed: a.seed,
        ..AcquisitionConfig::default()
    })
}

fn cmd_parse(a: ParseArgs) -> Result<String, Error> {
    let n = read_netlist(&a.netlist)?;
    if let Some(out) = &a.out {
        write_text(out, &write_bench(&n))?;
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        design: &'a str,
        inputs: usize,
        outputs: usize,
        gates: usize,
        types: Vec<(&'static str, usize)>,
    }
    let types: Vec<(&'static str, usize)> = GateType::ALL
        .iter()
        .map(|&t| {
            (
                t.keyword(),
                n.gates().iter().filter(|g| g.gtype == t).count(),
            )
        })
        .filter(|&(_, c)| c > 0)
        .collect();
    let s = Summary {
        design: n.name(),
        inputs: n.inputs().len(),
        outputs: n.outputs().len(),
        gates: n.logic_gate_count(),
        types,
    };
    Ok(match a.format {
        Format::Json => to_json(&s),
        Format::Text => {
            let mut t = format!(
                "{}: {} inputs, {} outputs, {} gates\n",
                s.design, s.inputs, s.outputs, s.gates
            );
            for (k, c) in &s.types {
                let _ = writeln!(t, "  {k:<6}{c}");
            }
            t
        }
    })
}

fn tvla_render(r: &TvlaReport) -> String {
    let s = &r.summary;
    let mut t = format!(
        "{}: {} traces per group, threshold {}\nmean |t| {:.4}, median |t| {:.4}, {} leaky gate(s)\nverdict: {}\n",
        r.design, r.n_traces, r.threshold, s.mean_abs_t, s.median_abs_t, s.leaky_count, s.verdict
    );
    for g in r
        .gates
        .iter()
        .filter(|g| g.leaky && g.gtype != GateType::Input)
    {
        let _ = writeln!(t, "  {:<20}{:<6}t = {:+.4}", g.name, g.gtype.keyword(), g.t);
    }
    t
}

fn cmd_tvla(a: TvlaArgs) -> Result<String, Error> {
    let n = read_netlist(&a.netlist)?;
    let acq = acquisition(&a.acq)?;
    let report = leak_estimate(&n, &acq)?;
    if let Some(dir) = &a.dump_traces {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let secret = acq.secret.resolve(&n)?;
        for (group, file) in [(Group::Fixed, "fixed.ptrc"), (Group::Random, "random.ptrc")] {
            let mut spec = StimulusSpec::new(secret.clone(), group, acq.seed);
            spec.cycles_per_trace = acq.cycles_per_trace;
            let traces: Vec<_> = gen_traces(&n, &spec, &acq.power, acq.n_traces)?.collect();
            let path = dir.join(file);
            let mut f = std::fs::File::create(&path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            write_trace_dump(&mut f, n.len(), &traces)?;
        }
    }
    let json = to_json(&report);
    if let Some(out) = &a.out {
        write_text(out, &json)?;
    }
    Ok(match a.format {
        Format::Json => json,
        Format::Text => tvla_render(&report),
    })
}

fn cmd_datagen(a: DatagenArgs) -> Result<String, Error> {
    let designs = design_paths(&a.designs)?
        .iter()
        .map(|p| read_netlist(p))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = DatagenConfig {
        mask_size: a.mask_size,
        locality: a.locality,
        iterations: a.iters,
        good_ratio: a.theta,
        acquisition: acquisition(&a.acq)?,
    };
    let d = cognition_generate(&designs, &cfg)?;
    write_text(&a.out, &d.to_json())?;
    let [neg, pos] = d.class_counts();
    #[derive(Serialize)]
    struct Summary {
        designs: usize,
        samples: usize,
        negatives: usize,
        positives: usize,
        skipped: usize,
        digest: String,
    }
    let s = Summary {
        designs: designs.len(),
        samples: d.samples.len(),
        negatives: neg,
        positives: pos,
        skipped: d.skipped.len(),
        digest: d.digest(),
    };
    Ok(match a.format {
        Format::Json => to_json(&s),
        Format::Text => format!(
            "{} samples ({} negative, {} positive) from {} design(s), {} skipped\n",
            s.samples, s.negatives, s.positives, s.designs, s.skipped
        ),
    })
}

fn cmd_train(a: TrainArgs) -> Result<String, Error> {
    let d = read_dataset(&a.dataset)?;
    let cfg = TrainConfig {
        kind: match a.kind {
            Kind::Adaboost => ModelKind::Adaboost,
            Kind::RandomForest => ModelKind::RandomForest,
        },
        rounds: a.rounds,
        trees: a.trees,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let m = train(&d, &cfg)?;
    save_model(&m, &a.out).map_err(|e| match e {
        crate::ml::MlError::Io(source) => Error::Io {
            path: a.out.clone(),
            source,
        },
        other => other.into(),
    })?;
    let correct = d
        .samples
        .iter()
        .map(|s| Ok((m.predict_score(&s.features)? >= 0.5) == (s.label == 1)))
        .collect::<Result<Vec<bool>, crate::ml::MlError>>()?
        .into_iter()
        .filter(|&c| c)
        .count();
    let accuracy = correct as f64 / d.samples.len() as f64;
    Ok(match a.format {
        Format::Json => to_json(&serde_json::json!({
            "kind": format!("{:?}", cfg.kind).to_lowercase(),
            "samples": d.samples.len(),
            "training_accuracy": accuracy,
        })),
        Format::Text => format!(
            "trained {:?} on {} samples, training accuracy {:.4}\n",
            cfg.kind,
            d.samples.len(),
            accuracy
        ),
    })
}

fn parse_cutoff(s: &str) -> Result<Cutoff, Error> {
    let bad = || Error::Usage(format!("bad --cutoff `{s}`"));
    if let Some(q) = s.strip_prefix('q') {
        let q: f64 = q.parse().map_err(|_| bad())?;
        if !(q > 0.0 && q <= 0.5) {
            return Err(Error::Usage("quantile cutoff must be in (0, 0.5]".into()));
        }
        Ok(Cutoff::Quantile(q))
    } else {
        let c: f64 = s.parse().map_err(|_| bad())?;
        if !(0.5..=1.0).contains(&c) {
            return Err(Error::Usage("score cutoff must be in [0.5, 1]".into()));
        }
        Ok(Cutoff::Score(c))
    }
}

fn cmd_explain(a: ExplainArgs) -> Result<String, Error> {
    let model = load_model(&a.model)?;
    let d = read_dataset(&a.dataset)?;
    if let Some(i) = a.sample {
        let bg_set = match &a.background {
            Some(p) => read_dataset(p)?,
            None => d.clone(),
        };
        let background: Vec<Vec<u8>> = bg_set.samples.iter().map(|s| s.features.clone()).collect();
        let s = d.samples.get(i).ok_or_else(|| {
            Error::Usage(format!(
                "sample {i} out of range ({} samples)",
                d.samples.len()
            ))
        })?;
        let e = explain_sample(&model, &background, &s.features)?;
        let json = to_json(&e);
        if let Some(out) = &a.out {
            write_text(out, &json)?;
        }
        return Ok(match a.format {
            Format::Json => json,
            Format::Text => format!(
                "sample {i}: gate {} of {}\n{}",
                s.gate,
                s.design,
                waterfall_render(&e, &FeatureSchema::clone(model.schema()), a.top_k)?
            ),
        });
    }
    let cfg = RuleConfig {
        top_k: a.top_k,
        min_support: a.min_support,
        cutoff: parse_cutoff(&a.cutoff)?,
    };
    let rs = extract_rules(&model, &d, &cfg)?;
    let json = rs.to_json() + "\n";
    if let Some(out) = &a.out {
        write_text(out, &json)?;
    }
    Ok(match a.format {
        Format::Json => json,
        Format::Text => {
            let mut t = format!("{} rule(s)\n", rs.rules.len());
            for (k, r) in rs.rules.iter().enumerate() {
                let _ = writeln!(
                    t,
                    "{:>3}. {}  (support {}, mean |phi| {:.4})",
                    k + 1,
                    r.text(),
                    r.support,
                    r.mean_abs_phi
                );
            }
            t
        }
    })
}

fn cmd_mask(a: MaskArgs) -> Result<(String, String), Error> {
    let n = read_netlist(&a.netlist)?;
    let budget: MaskBudget = a.budget.parse().map_err(Error::Usage)?;
    let model = a.model.as_deref().map(load_model).transpose()?;
    let rules = match &a.rules {
        Some(p) => Some(
            RuleSet::from_json(&read_text(p)?).map_err(|e| Error::Corrupt {
                path: p.clone(),
                message: e.to_string(),
            })?,
        ),
        None => None,
    };
    if model.is_none() && !a.rules_only {
        return Err(Error::Usage(
            "--model is required unless --rules-only is given".into(),
        ));
    }
    let locality = a
        .locality
        .or_else(|| model.as_ref().map(|m| m.schema().locality))
        .unwrap_or(7);
    let opts = MaskOptions {
        budget,
        locality,
        acquisition: acquisition(&a.acq)?,
        rules_only: a.rules_only,
    };
    let (masked, report) = polaris_mask(&n, model.as_ref(), rules.as_ref(), &opts)?;
    let json = report.to_json() + "\n";
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let stem = n.name();
        write_text(
            &dir.join(format!("{stem}.masked.bench")),
            &write_bench(&masked.netlist),
        )?;
        write_text(&dir.join(format!("{stem}.report.json")), &json)?;
        write_text(
            &dir.join(format!("{stem}.origin.json")),
            &(masked.origin_map_json() + "\n"),
        )?;
    }
    let text = match a.format {
        Format::Json => json,
        Format::Text => report_render(&report),
    };
    Ok((text, timings_render(&report)))
}

fn cmd_report(a: ReportArgs) -> Result<String, Error> {
    let r: RunReport = serde_json::from_str(&read_text(&a.from)?).map_err(|e| Error::Corrupt {
        path: a.from.clone(),
        message: e.to_string(),
    })?;
    Ok(match a.format {
        Format::Json => r.to_json() + "\n",
        Format::Text => report_render(&r),
    })
}
