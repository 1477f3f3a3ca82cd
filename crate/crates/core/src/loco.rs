//! Feature-importance inference from cached LOO and LOO+LOCO predictions.
//!
//! For feature j the per-row occlusion score is
//! `Error(Y_i, μ̂_{−i}^{−j}(X_i)) − Error(Y_i, μ̂_{−i}(X_i))`. Their mean and
//! sample s.d. give a normal interval, optionally widened by a small variance
//! barrier `ε = c·L·B̂·n·ln N / N` that keeps null features covered when the
//! score variance collapses.

use ndarray::Axis;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::config::LearnerSpec;
use crate::data::{Dataset, ErrorFn};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::learners;
use crate::normal;
use crate::par;
use crate::rng::stream_rng;

/// Per-row occlusion scores for one feature with their mean and sample s.d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionResult {
    pub feature: usize,
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (divisor N − 1).
    pub sd: f64,
    pub n_obs: usize,
}

impl OcclusionResult {
    pub fn from_scores(feature: usize, scores: Vec<f64>) -> Result<Self> {
        let n = scores.len();
        if n < 2 {
            return Err(Error::TooFewRows(n));
        }
        let mean = scores.iter().sum::<f64>() / n as f64;
        let ss: f64 = scores.iter().map(|s| (s - mean) * (s - mean)).sum();
        Ok(OcclusionResult {
            feature,
            mean,
            sd: (ss / (n - 1) as f64).sqrt(),
            n_obs: n,
            scores,
        })
    }

    /// σ̂/√N.
    pub fn std_error(&self) -> f64 {
        self.sd / (self.n_obs as f64).sqrt()
    }
}

/// Confidence interval and one-sided test for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInterval {
    pub feature: usize,
    pub mean: f64,
    pub sd: f64,
    pub n_obs: usize,
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
    pub buffered: bool,
    pub b_hat: Option<f64>,
    pub epsilon: Option<f64>,
    /// T = mean / (σ̂/√N + ε).
    pub statistic: f64,
    /// One-sided p-value for H₀: Δ ≤ 0.
    pub p_value: f64,
    pub reject: bool,
}

impl FeatureInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

/// Occlusion scores for feature `j` under the task's default error function.
pub fn occlusion_scores(ens: &Ensemble, j: usize) -> Result<OcclusionResult> {
    occlusion_scores_with(ens, j, ErrorFn::default_for(ens.dataset().task()))
}

pub fn occlusion_scores_with(ens: &Ensemble, j: usize, error: ErrorFn) -> Result<OcclusionResult> {
    let loo = loo_errors(ens, error)?;
    scores_against(ens, j, error, &loo)
}

/// Error(Y_i, μ̂_{−i}(X_i)) for every row.
pub(crate) fn loo_errors(ens: &Ensemble, error: ErrorFn) -> Result<Vec<f64>> {
    let ds = ens.dataset();
    par::try_map_indexed(ens.n_obs(), |i| {
        let mut pred = vec![0.0; ens.output_dim()];
        ens.loo_into(i, &mut pred)?;
        error.score(ds.y.target(i), &pred)
    })
}

fn scores_against(ens: &Ensemble, j: usize, error: ErrorFn, loo: &[f64]) -> Result<OcclusionResult> {
    let ds = ens.dataset();
    let scores = par::try_map_indexed(ens.n_obs(), |i| {
        let mut pred = vec![0.0; ens.output_dim()];
        ens.loo_loco_into(i, j, &mut pred)?;
        Ok::<f64, Error>(error.score(ds.y.target(i), &pred)? - loo[i])
    })?;
    OcclusionResult::from_scores(j, scores)
}

/// Test statistic, p-value and decision. `None` when the denominator is 0.
fn test_parts(mean: f64, se: f64, epsilon: f64, alpha: f64) -> Option<(f64, f64, bool)> {
    let denom = se + epsilon;
    if !(denom > 0.0) {
        return None;
    }
    let t = mean / denom;
    Some((t, normal::sf(t), t >= normal::upper_quantile(alpha)))
}

/// With a zero denominator the sign of the mean decides: a positive mean is
/// infinitely significant, zero is the symmetric null.
fn degenerate_test(mean: f64) -> (f64, f64, bool) {
    if mean > 0.0 {
        (f64::INFINITY, 0.0, true)
    } else if mean < 0.0 {
        (f64::NEG_INFINITY, 1.0, false)
    } else {
        (0.0, 0.5, false)
    }
}

fn interval(res: &OcclusionResult, alpha: f64, epsilon: f64, buffered: bool) -> FeatureInterval {
    let z = normal::upper_quantile(alpha / 2.0);
    let half = z * (res.std_error() + epsilon);
    let (statistic, p_value, reject) =
        test_parts(res.mean, res.std_error(), epsilon, alpha).unwrap_or_else(|| degenerate_test(res.mean));
    FeatureInterval {
        feature: res.feature,
        mean: res.mean,
        sd: res.sd,
        n_obs: res.n_obs,
        lo: res.mean - half,
        hi: res.mean + half,
        alpha,
        buffered,
        b_hat: None,
        epsilon: buffered.then_some(epsilon),
        statistic,
        p_value,
        reject,
    }
}

/// `mean ± z_{α/2}·σ̂/√N`.
pub fn plain_interval(res: &OcclusionResult, alpha: f64) -> FeatureInterval {
    interval(res, alpha, 0.0, false)
}

/// `mean ± z_{α/2}·(σ̂/√N + ε)`.
pub fn buffered_interval(res: &OcclusionResult, alpha: f64, epsilon: f64) -> Result<FeatureInterval> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidSpec(format!("barrier must be >= 0, got {epsilon}")));
    }
    Ok(interval(res, alpha, epsilon, true))
}

/// One-sided test of H₀: Δ ≤ 0. Returns (T, p, reject).
pub fn test_feature(res: &OcclusionResult, alpha: f64, epsilon: f64) -> Result<(f64, f64, bool)> {
    test_parts(res.mean, res.std_error(), epsilon, alpha).ok_or(Error::DegenerateDenominator)
}

/// `c·L·B̂·n·ln N / N`.
pub fn variance_barrier(b_hat: f64, lipschitz: f64, n: usize, n_obs: usize, c: f64) -> f64 {
    c * lipschitz * b_hat * n as f64 * (n_obs as f64).ln() / n_obs as f64
}

/// Empirical bound on the gap between two minipatch predictions.
///
/// For each row, `pairs_per_sample` pairs of distinct patches that exclude
/// the row are drawn and the mean ‖μ̂_{k₁}(X_i) − μ̂_{k₂}(X_i)‖₂ is taken; B̂ is
/// the average over rows. Row i draws from its own substream of `seed`.
pub fn estimate_b(ens: &Ensemble, pairs_per_sample: usize, seed: u64) -> Result<f64> {
    if pairs_per_sample == 0 {
        return Err(Error::InvalidSize("need at least one pair per row".into()));
    }
    let per_row = par::try_map_indexed(ens.n_obs(), |i| {
        let qualifying: Vec<usize> = ens.excluding_row(i).collect();
        if qualifying.len() < 2 {
            return Err(Error::coverage(i));
        }
        let mut rng = stream_rng(seed, i as u64);
        let mut total = 0.0;
        for _ in 0..pairs_per_sample {
            let pick = index::sample(&mut rng, qualifying.len(), 2);
            total += l2_gap(ens.cached(qualifying[pick.index(0)], i), ens.cached(qualifying[pick.index(1)], i));
        }
        Ok(total / pairs_per_sample as f64)
    })?;
    Ok(per_row.iter().sum::<f64>() / per_row.len() as f64)
}

pub(crate) fn l2_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Settings for a full per-feature sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceOptions {
    pub alpha: f64,
    pub bonferroni: bool,
    pub use_buffer: bool,
    pub buffer_c: f64,
    pub lipschitz: f64,
    pub pairs_per_sample: usize,
    pub b_seed: u64,
    pub error: Option<ErrorFn>,
}

impl InferenceOptions {
    /// Options taken from an ensemble's config.
    pub fn from_ensemble(ens: &Ensemble) -> Self {
        let cfg = ens.config();
        InferenceOptions {
            alpha: cfg.alpha,
            bonferroni: false,
            use_buffer: cfg.use_buffer,
            buffer_c: cfg.buffer_c,
            lipschitz: 1.0,
            pairs_per_sample: 10,
            b_seed: crate::rng::derive_seed(cfg.seed, 2),
            error: None,
        }
    }
}

/// Outcome for one feature of a sweep; failures do not affect other features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FeatureOutcome {
    Ok(FeatureInterval),
    Failed {
        feature: usize,
        coverage_failure: bool,
        error: String,
    },
}

impl FeatureOutcome {
    pub fn interval(&self) -> Option<&FeatureInterval> {
        match self {
            FeatureOutcome::Ok(iv) => Some(iv),
            FeatureOutcome::Failed { .. } => None,
        }
    }

    pub fn is_coverage_failure(&self) -> bool {
        matches!(
            self,
            FeatureOutcome::Failed {
                coverage_failure: true,
                ..
            }
        )
    }
}

/// Result of [`infer_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub alpha: f64,
    /// Level each feature is tested at (α/M under Bonferroni).
    pub effective_alpha: f64,
    pub bonferroni: bool,
    pub b_hat: Option<f64>,
    pub epsilon: f64,
    pub lipschitz: f64,
    pub buffer_c: f64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub n_obs: usize,
    pub features: Vec<FeatureOutcome>,
}

impl InferenceReport {
    pub fn intervals(&self) -> impl Iterator<Item = &FeatureInterval> {
        self.features.iter().filter_map(FeatureOutcome::interval)
    }

    pub fn selected(&self) -> Vec<usize> {
        self.intervals().filter(|iv| iv.reject).map(|iv| iv.feature).collect()
    }

    pub fn first_failure(&self) -> Option<&FeatureOutcome> {
        self.features.iter().find(|f| f.interval().is_none())
    }
}

/// Occlusion scores, interval and test for every feature, sharing one B̂ and
/// one barrier. Degenerate zero-width cases get T = ±∞ or 0 by the sign of
/// the mean rather than an error.
pub fn infer_all(ens: &Ensemble, opts: &InferenceOptions) -> Result<InferenceReport> {
    let n_features = ens.n_features();
    let effective_alpha = if opts.bonferroni {
        opts.alpha / n_features as f64
    } else {
        opts.alpha
    };
    let b_hat = if opts.use_buffer {
        Some(estimate_b(ens, opts.pairs_per_sample, opts.b_seed)?)
    } else {
        None
    };
    let epsilon = b_hat.map_or(0.0, |b| variance_barrier(b, opts.lipschitz, ens.n(), ens.n_obs(), opts.buffer_c));
    let error = opts.error.unwrap_or_else(|| ErrorFn::default_for(ens.dataset().task()));
    let loo = loo_errors(ens, error)?;
    let features = (0..n_features)
        .map(|j| match scores_against(ens, j, error, &loo) {
            Ok(res) => {
                let mut iv = interval(&res, effective_alpha, epsilon, opts.use_buffer);
                iv.b_hat = b_hat;
                FeatureOutcome::Ok(iv)
            }
            Err(e) => FeatureOutcome::Failed {
                feature: j,
                coverage_failure: e.is_coverage_failure(),
                error: e.to_string(),
            },
        })
        .collect();
    Ok(InferenceReport {
        alpha: opts.alpha,
        effective_alpha,
        bonferroni: opts.bonferroni,
        b_hat,
        epsilon,
        lipschitz: opts.lipschitz,
        buffer_c: opts.buffer_c,
        n: ens.n(),
        m: ens.m(),
        k: ens.k(),
        n_obs: ens.n_obs(),
        features,
    })
}

/// Row split used by the split baseline: the first ⌈N/2⌉ shuffled rows fit,
/// the rest score.
pub fn split_rows(n_obs: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rows: Vec<usize> = (0..n_obs).collect();
    rows.shuffle(&mut stream_rng(seed, 0));
    let fit = rows[..n_obs.div_ceil(2)].to_vec();
    let score = rows[n_obs.div_ceil(2)..].to_vec();
    (fit, score)
}

/// Split-sample LOCO: fit the full and the leave-j-out model on one half,
/// score the error increase on the other half, and build a plain interval
/// and one-sided test from those scores.
pub fn loco_split_baseline(
    dataset: &Dataset,
    j: usize,
    alpha: f64,
    learner: &LearnerSpec,
    split_seed: u64,
) -> Result<FeatureInterval> {
    let n_obs = dataset.n_obs();
    if n_obs < 4 {
        return Err(Error::TooFewRows(n_obs));
    }
    if j >= dataset.n_features() {
        return Err(Error::InvalidSize(format!("feature {j} out of range")));
    }
    let (fit_rows, score_rows) = split_rows(n_obs, split_seed);
    let keep: Vec<usize> = (0..dataset.n_features()).filter(|&c| c != j).collect();
    let x_fit = dataset.x.select(Axis(0), &fit_rows);
    let y_fit = dataset.y.subset(&fit_rows);
    let full = learners::fit(learner, x_fit.view(), y_fit.as_targets())?;
    let reduced = learners::fit(learner, x_fit.select(Axis(1), &keep).view(), y_fit.as_targets())?;
    let error = ErrorFn::default_for(dataset.task());
    let d = dataset.output_dim();
    let scores = score_rows
        .iter()
        .map(|&i| {
            let x = dataset.x.row(i);
            let mut with = vec![0.0; d];
            let mut without = vec![0.0; d];
            full.predict_with(|s| x[s], &mut with);
            reduced.predict_with(|s| x[keep[s]], &mut without);
            let y = dataset.y.target(i);
            Ok(error.score(y, &without)? - error.score(y, &with)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(plain_interval(&OcclusionResult::from_scores(j, scores)?, alpha))
}
