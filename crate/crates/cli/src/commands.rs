use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use minipatch::bench::{self, BenchReport, TargetOptions};
use minipatch::conformal;
use minipatch::ensemble::{train_ensemble, Ensemble};
use minipatch::loco::{infer_all, FeatureOutcome, InferenceOptions};
use minipatch::oracle::{self, LinearTargetParams, McOptions};
use minipatch::report::{self, DatasetSummary, InferenceDocument};
use minipatch::rng::derive_seed;
use minipatch::simgen;
use minipatch::{load_dataset, ErrorFn, Task};

use crate::args::{BenchArgs, BenchCommand, Format, InferArgs, OracleArgs, PredictArgs, SimulateArgs};

/// A run that produced its report but hit per-feature coverage failures.
#[derive(Debug)]
pub struct PartialCoverage(pub Vec<usize>);

impl std::fmt::Display for PartialCoverage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "coverage failure for features {:?}; increase --K", self.0)
    }
}

impl std::error::Error for PartialCoverage {}

/// Where a report goes.
pub struct Sink {
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Sink {
    fn path(&self, default_stem: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            PathBuf::from(format!(
                "{default_stem}.{}",
                if self.format == Format::Json { "json" } else { "csv" }
            ))
        })
    }

    /// JSON goes inline when no path was given; everything else is written to
    /// a file whose path is printed.
    fn emit(&self, default_stem: &str, json: impl FnOnce() -> Result<String>, csv: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        if self.format == Format::Json && self.out.is_none() {
            say(json()?);
            return Ok(());
        }
        let path = self.path(default_stem);
        let mut w = create(&path)?;
        match self.format {
            Format::Json => writeln!(w, "{}", json()?)?,
            Format::Csv => csv(&mut w)?,
        }
        w.flush()?;
        say(path.display());
        Ok(())
    }
}

/// Print a stdout line; a closed pipe ends the process quietly.
fn say(line: impl std::fmt::Display) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = writeln!(out, "{line}") {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

pub fn simulate(args: &SimulateArgs, sink: &Sink) -> Result<()> {
    let spec = args.sim.spec(args.seed);
    let ds = simgen::generate(&spec)?;
    let csv_path = match (&sink.out, sink.format) {
        (Some(p), Format::Csv) => p.clone(),
        _ => PathBuf::from("simulated.csv"),
    };
    minipatch::data::save_dataset(&ds, &csv_path)?;
    let sidecar = simgen::sidecar(&spec);
    let sidecar_text = serde_json::to_string_pretty(&sidecar)?;
    let sidecar_path = csv_path.with_extension("json");
    std::fs::write(&sidecar_path, format!("{sidecar_text}\n"))
        .with_context(|| format!("cannot write {}", sidecar_path.display()))?;
    eprintln!("wrote {} rows to {}", ds.n_obs(), csv_path.display());
    match sink.format {
        Format::Json => say(&sidecar_text),
        Format::Csv => say(csv_path.display()),
    }
    Ok(())
}

pub fn infer(args: &InferArgs, sink: &Sink) -> Result<()> {
    let ds = load_dataset(&args.data.data, args.data.task.into(), &args.data.target_col)?;
    let summary = DatasetSummary::of(&ds);
    let cfg = args.ensemble.config();
    eprintln!("training {} minipatches on {} x {}", cfg.k, ds.n_obs(), ds.n_features());
    let ens = train_ensemble(ds, &cfg)?;
    if let Some(path) = &args.save_ensemble {
        ens.save_snapshot(path)?;
        eprintln!("saved ensemble to {}", path.display());
    }
    let opts = InferenceOptions {
        bonferroni: args.ensemble.bonferroni,
        ..InferenceOptions::from_ensemble(&ens)
    };
    let report = infer_all(&ens, &opts)?;
    let uncovered: Vec<usize> = report
        .features
        .iter()
        .filter_map(|f| match f {
            FeatureOutcome::Failed { feature, coverage_failure: true, .. } => Some(*feature),
            _ => None,
        })
        .collect();
    let doc = InferenceDocument { config: cfg, dataset: summary, report };
    sink.emit(
        "inference",
        || Ok(serde_json::to_string_pretty(&doc)?),
        |w| Ok(report::write_inference_csv(&doc.report, &doc.dataset.feature_names, w)?),
    )?;
    if !uncovered.is_empty() {
        return Err(PartialCoverage(uncovered).into());
    }
    Ok(())
}

pub fn predict(args: &PredictArgs, sink: &Sink) -> Result<()> {
    let ens = match (&args.ensemble, &args.data) {
        (Some(path), _) => Ensemble::load_snapshot(path)?,
        (None, Some(data)) => {
            let ds = load_dataset(data, args.task.into(), &args.target_col)?;
            let cfg = args.ensemble_args.config();
            eprintln!("training {} minipatches on {} x {}", cfg.k, ds.n_obs(), ds.n_features());
            train_ensemble(ds, &cfg)?
        }
        (None, None) => unreachable!("clap requires --data or --ensemble"),
    };
    let names = DatasetSummary::of(ens.dataset()).feature_names;
    let x_new = minipatch::data::load_features(&args.test, &names)?;
    let res = conformal::loo_residuals(&ens)?;
    let alpha = args.ensemble_args.alpha;
    let preds = conformal::predict_batch(&ens, &res, x_new.view(), alpha)?;
    let classes = ens.dataset().class_labels.clone();
    sink.emit(
        "predictions",
        || {
            Ok(serde_json::to_string_pretty(&serde_json::json!({
                "alpha": alpha,
                "task": ens.dataset().task(),
                "class_labels": classes,
                "predictions": preds,
            }))?)
        },
        |w| Ok(conformal::write_batch_csv(&preds, classes.as_deref(), w)?),
    )
}

pub fn oracle(args: &OracleArgs, sink: &Sink) -> Result<()> {
    let seed = args.ensemble.seed;
    let spec = args.sim.spec(derive_seed(seed, 0));
    let train = simgen::generate(&spec)?;
    let cfg = minipatch::MPConfig {
        strict_coverage: false,
        ..args.ensemble.config()
    };
    // The closed form is stated for squared error.
    let error = match spec.task {
        Task::Regression => ErrorFn::Squared,
        Task::Classification => ErrorFn::OneMinusProb,
    };
    let opts = McOptions {
        n_test: args.n_test,
        seed: derive_seed(seed, 3),
        error: Some(error),
    };
    eprintln!("Monte Carlo target with {} minipatches and {} test points", cfg.k, opts.n_test);
    let mc = oracle::monte_carlo_target(&train, &cfg, Some(&spec), args.feature, &opts)?;
    let closed = match (spec.true_beta(), spec.task) {
        (Some(beta), Task::Regression) => {
            let (_, m) = cfg.patch_sizes(spec.n_obs, spec.n_features)?;
            Some(oracle::linear_closed_form_target(&LinearTargetParams {
                beta,
                gamma: m as f64 / spec.n_features as f64,
                feature: args.feature,
            })?)
        }
        _ => None,
    };
    let doc = serde_json::json!({
        "target_mc": mc.value,
        "target_closed_form": closed,
        "gap": closed.map(|c| mc.value - c),
        "mc_se": mc.std_error,
        "feature": args.feature,
        "n_test": mc.n_test,
        "error": error,
        "spec": spec,
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&doc)?;
    match &sink.out {
        None => say(&text),
        Some(path) => {
            std::fs::write(path, format!("{text}\n")).with_context(|| format!("cannot write {}", path.display()))?;
            say(path.display());
        }
    }
    Ok(())
}

pub fn bench(cmd: &BenchCommand, sink: &Sink) -> Result<()> {
    let (args, kind) = match cmd {
        BenchCommand::Coverage(a) => (a, "coverage"),
        BenchCommand::Width(a) => (a, "width"),
        BenchCommand::Power(a) => (a, "power"),
        BenchCommand::Selection(a) => (a, "selection"),
    };
    let report = run_bench(args, kind)?;
    emit_bench(&report, kind, sink)
}

fn run_bench(args: &BenchArgs, kind: &str) -> Result<BenchReport> {
    let seed = args.ensemble.seed;
    let spec = args.sim.spec(seed);
    let cfg = args.ensemble.config();
    let sizes = if args.sizes.is_empty() { vec![spec.n_obs] } else { args.sizes.clone() };
    let target = TargetOptions { n_test: args.n_test };
    eprintln!("bench {kind}: {} replicates, master seed {seed}", args.replicates);
    Ok(match kind {
        "coverage" => bench::run_coverage(&spec, &cfg, args.feature, &sizes, args.replicates, seed, &target)?,
        "width" => bench::run_width(&spec, &cfg, args.feature, &sizes, args.replicates, seed, &target)?,
        "power" => bench::run_power(&spec, &args.snrs, &cfg, args.feature, args.replicates, seed)?,
        _ => bench::run_selection(&spec, &cfg, args.replicates, seed)?,
    })
}

fn emit_bench(report: &BenchReport, kind: &str, sink: &Sink) -> Result<()> {
    match sink.format {
        Format::Json => sink.emit(kind, || Ok(report.to_json()?), |_| Ok(())),
        Format::Csv => {
            let raw_path = sink.path(kind);
            let summary_path = sibling(&raw_path, "_summary", "csv");
            let mut w = create(&raw_path)?;
            report::write_bench_raw_csv(report, &mut w)?;
            w.flush()?;
            let mut w = create(&summary_path)?;
            report::write_bench_summary_csv(report, &mut w)?;
            w.flush()?;
            say(raw_path.display());
            say(summary_path.display());
            Ok(())
        }
    }
}
