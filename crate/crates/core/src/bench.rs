//! Replicated simulation experiments: interval coverage and width, test
//! power against the split baseline, feature-selection accuracy and
//! predictive coverage.
//!
//! Each replicate derives all of its seeds from the master seed and its
//! (cell, replicate) index, so replicates can run in any order on any number
//! of threads. Summaries are computed from the raw rows alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::MPConfig;
use crate::conformal::{self, BatchPrediction};
use crate::data::{ErrorFn, Response, Task};
use crate::ensemble::train_ensemble;
use crate::error::{Error, Result};
use crate::loco::{self, InferenceOptions};
use crate::oracle::{self, McOptions};
use crate::par;
use crate::rng::derive_seed;
use crate::simgen::{self, SimSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Coverage,
    Width,
    Power,
    Selection,
    Predictive,
}

/// Interval for one replicate against its Monte Carlo target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub cell: String,
    pub replicate: usize,
    pub seed: u64,
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub b_hat: f64,
    pub epsilon: f64,
    pub target: f64,
    pub target_se: f64,
    pub covered: bool,
}

/// One test decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub cell: String,
    pub method: String,
    pub replicate: usize,
    pub seed: u64,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

/// Selected set against the true support for one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub cell: String,
    pub replicate: usize,
    pub seed: u64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// One fresh test point against one trained ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveRow {
    pub cell: String,
    pub ensemble: usize,
    pub point: usize,
    pub seed: u64,
    /// Interval width, or set size for classification.
    pub size: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RawRow {
    Interval(IntervalRow),
    Test(TestRow),
    Selection(SelectionRow),
    Predictive(PredictiveRow),
}

/// Metrics for one (cell, method) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub cell: String,
    pub method: String,
    pub count: usize,
    pub metrics: BTreeMap<String, f64>,
}

impl SummaryCell {
    pub fn metric(&self, name: &str) -> f64 {
        self.metrics.get(name).copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub experiment: Experiment,
    pub replicates: usize,
    pub master_seed: u64,
    pub settings: serde_json::Value,
    pub summary: Vec<SummaryCell>,
    pub raw: Vec<RawRow>,
}

impl BenchReport {
    fn new(experiment: Experiment, replicates: usize, master_seed: u64, settings: serde_json::Value, raw: Vec<RawRow>) -> Self {
        BenchReport {
            experiment,
            replicates,
            master_seed,
            settings,
            summary: summarize(&raw),
            raw,
        }
    }

    pub fn cell(&self, cell: &str, method: &str) -> Option<&SummaryCell> {
        self.summary.iter().find(|c| c.cell == cell && c.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn frac(flags: impl Iterator<Item = bool>) -> f64 {
    let (hits, total) = flags.fold((0usize, 0usize), |(h, t), f| (h + usize::from(f), t + 1));
    hits as f64 / total as f64
}

/// Selection metrics; F1, TPR and FNR use 0 and 1 when their denominators
/// vanish.
pub fn selection_metrics(tp: usize, fp: usize, tn: usize, fn_: usize) -> BTreeMap<String, f64> {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let tpr = ratio(tp, tp + fn_);
    let fpr = ratio(fp, fp + tn);
    BTreeMap::from([
        ("f1".to_string(), ratio(2 * tp, 2 * tp + fp + fn_)),
        ("tpr".to_string(), tpr),
        ("fpr".to_string(), fpr),
        ("tnr".to_string(), 1.0 - fpr),
        ("fnr".to_string(), 1.0 - tpr),
    ])
}

/// Group raw rows by (cell, method) in first-appearance order and compute
/// each group's metrics.
pub fn summarize(raw: &[RawRow]) -> Vec<SummaryCell> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<&RawRow>> = BTreeMap::new();
    for row in raw {
        let key = match row {
            RawRow::Interval(r) => (r.cell.clone(), "loco_mp".to_string()),
            RawRow::Test(r) => (r.cell.clone(), r.method.clone()),
            RawRow::Selection(r) => (r.cell.clone(), "loco_mp".to_string()),
            RawRow::Predictive(r) => (r.cell.clone(), "jackknife_plus_mp".to_string()),
        };
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(row);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let mut metrics = BTreeMap::new();
            match rows[0] {
                RawRow::Interval(_) => {
                    let rs: Vec<&IntervalRow> = rows.iter().filter_map(|r| if let RawRow::Interval(x) = r { Some(x) } else { None }).collect();
                    let mut widths: Vec<f64> = rs.iter().map(|r| r.width).collect();
                    metrics.insert("coverage".into(), frac(rs.iter().map(|r| r.covered)));
                    metrics.insert("mean_width".into(), mean(&widths));
                    metrics.insert("median_width".into(), median(&mut widths));
                    metrics.insert("mean_target".into(), mean(&rs.iter().map(|r| r.target).collect::<Vec<_>>()));
                    metrics.insert("mean_estimate".into(), mean(&rs.iter().map(|r| r.mean).collect::<Vec<_>>()));
                }
                RawRow::Test(_) => {
                    metrics.insert(
                        "rejection_rate".into(),
                        frac(rows.iter().map(|r| matches!(r, RawRow::Test(t) if t.reject))),
                    );
                }
                RawRow::Selection(_) => {
                    let per: Vec<BTreeMap<String, f64>> = rows
                        .iter()
                        .filter_map(|r| if let RawRow::Selection(s) = r { Some(selection_metrics(s.tp, s.fp, s.tn, s.fn_)) } else { None })
                        .collect();
                    for name in ["f1", "tpr", "fpr", "tnr", "fnr"] {
                        metrics.insert(name.to_string(), mean(&per.iter().map(|m| m[name]).collect::<Vec<_>>()));
                    }
                }
                RawRow::Predictive(_) => {
                    let rs: Vec<&PredictiveRow> = rows.iter().filter_map(|r| if let RawRow::Predictive(x) = r { Some(x) } else { None }).collect();
                    let mut sizes: Vec<f64> = rs.iter().map(|r| r.size).collect();
                    metrics.insert("coverage".into(), frac(rs.iter().map(|r| r.covered)));
                    metrics.insert("mean_size".into(), mean(&sizes));
                    metrics.insert("median_size".into(), median(&mut sizes));
                }
            }
            SummaryCell {
                cell: key.0,
                method: key.1,
                count: rows.len(),
                metrics,
            }
        })
        .collect()
}

/// Monte Carlo settings for the per-replicate target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetOptions {
    pub n_test: usize,
}

impl Default for TargetOptions {
    fn default() -> Self {
        TargetOptions { n_test: 10_000 }
    }
}

fn replicate_seed(master: u64, cell: usize, replicate: usize) -> u64 {
    derive_seed(derive_seed(master, cell as u64), replicate as u64)
}

fn check_grid<T>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidSpec("experiment grid is empty".into()));
    }
    Ok(())
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates == 0 {
        return Err(Error::InvalidSpec("need at least one replicate".into()));
    }
    Ok(())
}

/// Buffered-interval coverage of the Monte Carlo target for feature `j`,
/// one cell per sample size in `sizes`.
pub fn run_coverage(
    spec: &SimSpec,
    config: &MPConfig,
    j: usize,
    sizes: &[usize],
    replicates: usize,
    seed: u64,
    target: &TargetOptions,
) -> Result<BenchReport> {
    interval_experiment(Experiment::Coverage, spec, config, j, sizes, replicates, seed, target)
}

/// Same replicates as [`run_coverage`], reported for interval width.
pub fn run_width(
    spec: &SimSpec,
    config: &MPConfig,
    j: usize,
    sizes: &[usize],
    replicates: usize,
    seed: u64,
    target: &TargetOptions,
) -> Result<BenchReport> {
    interval_experiment(Experiment::Width, spec, config, j, sizes, replicates, seed, target)
}

#[allow(clippy::too_many_arguments)]
fn interval_experiment(
    experiment: Experiment,
    spec: &SimSpec,
    config: &MPConfig,
    j: usize,
    sizes: &[usize],
    replicates: usize,
    seed: u64,
    target: &TargetOptions,
) -> Result<BenchReport> {
    check_grid(sizes)?;
    check_replicates(replicates)?;
    spec.validate()?;
    config.validate()?;
    if j >= spec.n_features {
        return Err(Error::InvalidSize(format!("feature {j} out of range")));
    }
    let tasks: Vec<(usize, usize)> = (0..sizes.len()).flat_map(|c| (0..replicates).map(move |r| (c, r))).collect();
    let rows = par::try_map_indexed(tasks.len(), |t| {
        let (c, r) = tasks[t];
        let rep_seed = replicate_seed(seed, c, r);
        let data_spec = spec.resized(sizes[c], derive_seed(rep_seed, 0));
        let data = simgen::generate(&data_spec)?;
        let cfg = MPConfig {
            seed: derive_seed(rep_seed, 1),
            ..config.clone()
        };
        let ens = train_ensemble(data, &cfg)?;
        let opts = InferenceOptions::from_ensemble(&ens);
        let b_hat = loco::estimate_b(&ens, opts.pairs_per_sample, opts.b_seed)?;
        let eps = if cfg.use_buffer {
            loco::variance_barrier(b_hat, opts.lipschitz, ens.n(), ens.n_obs(), cfg.buffer_c)
        } else {
            0.0
        };
        let res = loco::occlusion_scores(&ens, j)?;
        let iv = loco::buffered_interval(&res, cfg.alpha, eps)?;
        // The target is conditional on the fitted predictor, so it is
        // evaluated on this replicate's own patches and models.
        let mc_opts = McOptions {
            n_test: target.n_test,
            seed: derive_seed(rep_seed, 3),
            error: None,
        };
        let mc = oracle::monte_carlo_target_for(&ens, spec, &[j], &mc_opts)?[0];
        Ok::<RawRow, Error>(RawRow::Interval(IntervalRow {
            cell: format!("n_obs={}", sizes[c]),
            replicate: r,
            seed: rep_seed,
            mean: iv.mean,
            sd: iv.sd,
            lo: iv.lo,
            hi: iv.hi,
            width: iv.width(),
            b_hat,
            epsilon: eps,
            target: mc.value,
            target_se: mc.std_error,
            covered: iv.contains(mc.value),
        }))
    })?;
    let settings = serde_json::json!({
        "spec": spec, "config": config, "feature": j, "sizes": sizes, "target": target,
    });
    Ok(BenchReport::new(experiment, replicates, seed, settings, rows))
}

/// Rejection rates for feature `j` across an SNR grid, for the minipatch
/// test and the split baseline.
pub fn run_power(spec: &SimSpec, snrs: &[f64], config: &MPConfig, j: usize, replicates: usize, seed: u64) -> Result<BenchReport> {
    check_grid(snrs)?;
    check_replicates(replicates)?;
    config.validate()?;
    let tasks: Vec<(usize, usize)> = (0..snrs.len()).flat_map(|c| (0..replicates).map(move |r| (c, r))).collect();
    let rows = par::try_map_indexed(tasks.len(), |t| {
        let (c, r) = tasks[t];
        let rep_seed = replicate_seed(seed, c, r);
        let data_spec = SimSpec {
            snr: snrs[c],
            ..spec.resized(spec.n_obs, derive_seed(rep_seed, 0))
        };
        let data = simgen::generate(&data_spec)?;
        let cell = format!("snr={}", snrs[c]);
        let split = loco::loco_split_baseline(&data, j, config.alpha, &config.learner, derive_seed(rep_seed, 4))?;
        let cfg = MPConfig {
            seed: derive_seed(rep_seed, 1),
            ..config.clone()
        };
        let ens = train_ensemble(data, &cfg)?;
        let opts = InferenceOptions::from_ensemble(&ens);
        let eps = if cfg.use_buffer {
            let b_hat = loco::estimate_b(&ens, opts.pairs_per_sample, opts.b_seed)?;
            loco::variance_barrier(b_hat, opts.lipschitz, ens.n(), ens.n_obs(), cfg.buffer_c)
        } else {
            0.0
        };
        let iv = loco::buffered_interval(&loco::occlusion_scores(&ens, j)?, cfg.alpha, eps)?;
        let row = |method: &str, statistic: f64, p_value: f64, reject: bool| {
            RawRow::Test(TestRow {
                cell: cell.clone(),
                method: method.to_string(),
                replicate: r,
                seed: rep_seed,
                statistic,
                p_value,
                reject,
            })
        };
        Ok::<[RawRow; 2], Error>([
            row("loco_mp", iv.statistic, iv.p_value, iv.reject),
            row("loco_split", split.statistic, split.p_value, split.reject),
        ])
    })?;
    // Keep each method's rows contiguous per cell: all MP rows, then split.
    let mut raw = Vec::with_capacity(rows.len() * 2);
    for c in 0..snrs.len() {
        let cell_rows = &rows[c * replicates..(c + 1) * replicates];
        raw.extend(cell_rows.iter().map(|p| p[0].clone()));
        raw.extend(cell_rows.iter().map(|p| p[1].clone()));
    }
    let settings = serde_json::json!({ "spec": spec, "snrs": snrs, "config": config, "feature": j });
    Ok(BenchReport::new(Experiment::Power, replicates, seed, settings, raw))
}

/// Bonferroni-corrected selection against the simulation's true support.
pub fn run_selection(spec: &SimSpec, config: &MPConfig, replicates: usize, seed: u64) -> Result<BenchReport> {
    check_replicates(replicates)?;
    config.validate()?;
    let truth = spec.true_support();
    let rows = par::try_map_indexed(replicates, |r| {
        let rep_seed = replicate_seed(seed, 0, r);
        let data = simgen::generate(&spec.resized(spec.n_obs, derive_seed(rep_seed, 0)))?;
        let cfg = MPConfig {
            seed: derive_seed(rep_seed, 1),
            ..config.clone()
        };
        let ens = train_ensemble(data, &cfg)?;
        let opts = InferenceOptions {
            bonferroni: true,
            ..InferenceOptions::from_ensemble(&ens)
        };
        let report = loco::infer_all(&ens, &opts)?;
        if let Some(loco::FeatureOutcome::Failed { error, .. }) = report.first_failure() {
            return Err(Error::InvalidSpec(format!("selection replicate {r}: {error}")));
        }
        let selected = report.selected();
        let tp = selected.iter().filter(|j| truth.contains(j)).count();
        let fp = selected.len() - tp;
        let fn_ = truth.len() - tp;
        let tn = spec.n_features - tp - fp - fn_;
        Ok::<RawRow, Error>(RawRow::Selection(SelectionRow {
            cell: format!("n_obs={}", spec.n_obs),
            replicate: r,
            seed: rep_seed,
            tp,
            fp,
            tn,
            fn_,
        }))
    })?;
    let settings = serde_json::json!({ "spec": spec, "config": config, "support": truth });
    Ok(BenchReport::new(Experiment::Selection, replicates, seed, settings, rows))
}

/// Jackknife+ coverage of fresh test responses: `ensembles` training sets,
/// `points` fresh test points each, pooled.
pub fn run_predictive(spec: &SimSpec, config: &MPConfig, ensembles: usize, points: usize, seed: u64) -> Result<BenchReport> {
    check_replicates(ensembles)?;
    check_replicates(points)?;
    config.validate()?;
    let per_ensemble = par::try_map_indexed(ensembles, |e| {
        let rep_seed = replicate_seed(seed, 0, e);
        let data = simgen::generate(&spec.resized(spec.n_obs, derive_seed(rep_seed, 0)))?;
        let cfg = MPConfig {
            seed: derive_seed(rep_seed, 1),
            ..config.clone()
        };
        let ens = train_ensemble(data, &cfg)?;
        let res = conformal::loo_residuals(&ens)?;
        let test = simgen::generate(&spec.resized(points, derive_seed(rep_seed, 3)))?;
        let preds = conformal::predict_batch(&ens, &res, test.x.view(), cfg.alpha)?;
        Ok::<Vec<RawRow>, Error>(
            preds
                .iter()
                .enumerate()
                .map(|(p, pred)| {
                    let (size, covered) = match (pred, &test.y) {
                        (BatchPrediction::Interval(iv), Response::Real(y)) => (iv.width(), iv.contains(y[p])),
                        (BatchPrediction::Set(s), Response::Class { labels, .. }) => (s.labels.len() as f64, s.contains(labels[p])),
                        _ => unreachable!("prediction kind follows the task"),
                    };
                    RawRow::Predictive(PredictiveRow {
                        cell: format!("{}_{}", spec.model.name(), spec.task.name()),
                        ensemble: e,
                        point: p,
                        seed: rep_seed,
                        size,
                        covered,
                    })
                })
                .collect(),
        )
    })?;
    let settings = serde_json::json!({ "spec": spec, "config": config, "ensembles": ensembles, "points": points });
    Ok(BenchReport::new(Experiment::Predictive, ensembles, seed, settings, per_ensemble.concat()))
}

/// Monte Carlo target against the linear closed form, one row per replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormRow {
    pub replicate: usize,
    pub seed: u64,
    pub target_mc: f64,
    pub mc_se: f64,
    pub target_closed_form: f64,
    pub gap: f64,
    pub within: bool,
}

/// Replicated comparison of the squared-error Monte Carlo target with the
/// closed form for a linear-model spec. `within` uses `tolerance_se` standard
/// errors.
pub fn run_closed_form_check(
    spec: &SimSpec,
    config: &MPConfig,
    j: usize,
    n_test: usize,
    replicates: usize,
    seed: u64,
    tolerance_se: f64,
) -> Result<Vec<ClosedFormRow>> {
    check_replicates(replicates)?;
    let beta = spec
        .true_beta()
        .ok_or_else(|| Error::InvalidSpec("closed form needs a linear model".into()))?;
    if spec.task != Task::Regression {
        return Err(Error::TaskMismatch { expected: "regression" });
    }
    let (_, m) = config.patch_sizes(spec.n_obs, spec.n_features)?;
    let closed = oracle::linear_closed_form_target(&oracle::LinearTargetParams {
        beta,
        gamma: m as f64 / spec.n_features as f64,
        feature: j,
    })?;
    par::try_map_indexed(replicates, |r| {
        let rep_seed = replicate_seed(seed, 0, r);
        let train = simgen::generate(&spec.resized(spec.n_obs, derive_seed(rep_seed, 0)))?;
        let cfg = MPConfig {
            seed: derive_seed(rep_seed, 1),
            strict_coverage: false,
            ..config.clone()
        };
        let opts = McOptions {
            n_test,
            seed: derive_seed(rep_seed, 3),
            error: Some(ErrorFn::Squared),
        };
        let mc = oracle::monte_carlo_target(&train, &cfg, Some(spec), j, &opts)?;
        let gap = mc.value - closed;
        Ok(ClosedFormRow {
            replicate: r,
            seed: rep_seed,
            target_mc: mc.value,
            mc_se: mc.std_error,
            target_closed_form: closed,
            gap,
            within: gap.abs() < tolerance_se * mc.std_error,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LearnerSpec;
    use crate::simgen::SimModel;

    fn small_spec() -> SimSpec {
        SimSpec::new(SimModel::Linear, Task::Regression, 60, 10)
    }

    fn small_config() -> MPConfig {
        MPConfig { k: 300, ..MPConfig::default() }
    }

    #[test]
    fn selection_metric_conventions() {
        let none = selection_metrics(0, 0, 40, 10);
        assert_eq!(none["f1"], 0.0);
        assert_eq!(none["tpr"], 0.0);
        let perfect = selection_metrics(10, 0, 40, 0);
        assert_eq!(perfect["f1"], 1.0);
        assert_eq!(perfect["fpr"], 0.0);
        let mixed = selection_metrics(8, 2, 38, 2);
        assert!((mixed["f1"] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn summary_is_recomputable_and_bounded() {
        let target = TargetOptions { n_test: 200 };
        let rep = run_coverage(&small_spec(), &small_config(), 0, &[40, 60], 4, 1, &target).unwrap();
        assert_eq!(rep.raw.len(), 8);
        assert_eq!(summarize(&rep.raw), rep.summary);
        for cell in &rep.summary {
            let c = cell.metric("coverage");
            assert!((0.0..=1.0).contains(&c));
        }
        let again = run_coverage(&small_spec(), &small_config(), 0, &[40, 60], 4, 1, &target).unwrap();
        assert_eq!(rep.to_json().unwrap(), again.to_json().unwrap());
    }

    #[test]
    fn power_rows_and_empty_grid() {
        let cfg = MPConfig { k: 200, learner: LearnerSpec::ridge(), ..MPConfig::default() };
        let rep = run_power(&small_spec(), &[0.0, 10.0], &cfg, 0, 3, 2).unwrap();
        assert_eq!(rep.raw.len(), 12);
        assert_eq!(rep.summary.len(), 4);
        assert!(rep.cell("snr=10", "loco_mp").is_some());
        assert!(matches!(run_power(&small_spec(), &[], &cfg, 0, 3, 2), Err(Error::InvalidSpec(_))));
        assert_eq!(summarize(&rep.raw), rep.summary);
    }

    #[test]
    fn thread_count_does_not_change_reports() {
        let cfg = MPConfig { k: 200, ..MPConfig::default() };
        let a = par::with_threads(1, || run_selection(&small_spec(), &cfg, 3, 5).unwrap());
        let b = par::with_threads(3, || run_selection(&small_spec(), &cfg, 3, 5).unwrap());
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let p1 = par::with_threads(1, || run_predictive(&small_spec(), &cfg, 2, 10, 5).unwrap());
        let p2 = par::with_threads(2, || run_predictive(&small_spec(), &cfg, 2, 10, 5).unwrap());
        assert_eq!(p1, p2);
        assert_eq!(p1.raw.len(), 20);
    }

    #[test]
    fn closed_form_rows() {
        let spec = SimSpec::new(SimModel::Linear, Task::Regression, 200, 12).with_snr(5.0);
        let cfg = MPConfig { k: 300, m: Some(3), learner: LearnerSpec::Ridge { lambda: 0.0 }, ..MPConfig::default() };
        let rows = run_closed_form_check(&spec, &cfg, 0, 500, 2, 3, 3.0).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.target_closed_form == rows[0].target_closed_form && r.mc_se > 0.0));
        let nonlinear = SimSpec::new(SimModel::Nonlinear, Task::Regression, 50, 6);
        assert!(run_closed_form_check(&nonlinear, &cfg, 0, 100, 1, 0, 3.0).is_err());
    }
}
