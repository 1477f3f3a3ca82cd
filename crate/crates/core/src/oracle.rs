//! Ground truth for validation: exact enumeration of every minipatch on tiny
//! problems, Monte Carlo evaluation of the occlusion target on fresh data,
//! and closed forms for the linear model.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::config::{LearnerSpec, MPConfig};
use crate::data::{Dataset, ErrorFn, Prediction};
use crate::ensemble::{fit_patches, sample_minipatches, Ensemble, Minipatch};
use crate::error::{Error, Result};
use crate::learners::FittedModel;
use crate::par;
use crate::simgen::{self, SimSpec};

/// Most patches [`BruteForce::new`] will enumerate.
pub const MAX_ENUMERATED: u128 = 1_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Every (rows, features) pair of sizes (n, m), rows-major lexicographic.
pub fn enumerate_patches(n_obs: usize, n_features: usize, n: usize, m: usize) -> Result<Vec<Minipatch>> {
    let total = binomial(n_obs, n).saturating_mul(binomial(n_features, m));
    if total > MAX_ENUMERATED {
        return Err(Error::TooLarge(total));
    }
    let feature_sets: Vec<Vec<usize>> = (0..n_features).combinations(m).collect();
    Ok((0..n_obs)
        .combinations(n)
        .flat_map(|rows| feature_sets.iter().map(move |f| Minipatch::new(rows.clone(), f.clone())))
        .collect())
}

/// The deterministic minipatch predictor: one model per possible patch,
/// queried by direct averaging (no cache, no bitsets).
#[derive(Debug, Clone)]
pub struct BruteForce {
    dataset: Dataset,
    patches: Vec<Minipatch>,
    models: Vec<FittedModel>,
}

impl BruteForce {
    pub fn new(dataset: &Dataset, n: usize, m: usize, learner: &LearnerSpec) -> Result<Self> {
        if n == 0 || n >= dataset.n_obs() || m == 0 || m >= dataset.n_features() {
            return Err(Error::InvalidSize(format!("need 1 <= n < N and 1 <= m < M, got n={n}, m={m}")));
        }
        let patches = enumerate_patches(dataset.n_obs(), dataset.n_features(), n, m)?;
        let config = MPConfig {
            learner: *learner,
            ..MPConfig::default()
        };
        let models = fit_patches(dataset, &config, &patches)?;
        Ok(BruteForce {
            dataset: dataset.clone(),
            patches,
            models,
        })
    }

    /// Number of models fitted.
    pub fn n_fits(&self) -> usize {
        self.models.len()
    }

    pub fn patches(&self) -> &[Minipatch] {
        &self.patches
    }

    fn average(&self, x: &[f64], keep: impl Fn(&Minipatch) -> bool) -> Option<Prediction> {
        let mut sum = vec![0.0; self.dataset.output_dim()];
        let mut count = 0usize;
        for (p, model) in self.patches.iter().zip(&self.models) {
            if !keep(p) {
                continue;
            }
            let sub: Vec<f64> = p.features.iter().map(|&j| x[j]).collect();
            let pred = model.predict(&sub).expect("patch width matches model");
            for (s, v) in sum.iter_mut().zip(pred.values()) {
                *s += v;
            }
            count += 1;
        }
        (count > 0).then(|| Prediction(sum.into_iter().map(|s| s / count as f64).collect()))
    }

    fn row(&self, i: usize) -> Vec<f64> {
        self.dataset.x.row(i).to_vec()
    }

    /// Average over all patches.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check_width(x)?;
        Ok(self.average(x, |_| true).expect("enumeration is nonempty"))
    }

    /// Average over patches without feature j.
    pub fn predict_without(&self, x: &[f64], j: usize) -> Result<Prediction> {
        self.check_width(x)?;
        self.average(x, |p| !p.features.contains(&j)).ok_or(Error::FeatureNeverExcluded(j))
    }

    pub fn loo(&self, i: usize) -> Result<Prediction> {
        self.average(&self.row(i), |p| !p.rows.contains(&i)).ok_or(Error::coverage(i))
    }

    pub fn loo_loco(&self, i: usize, j: usize) -> Result<Prediction> {
        self.average(&self.row(i), |p| !p.rows.contains(&i) && !p.features.contains(&j))
            .ok_or(Error::coverage_pair(i, j))
    }

    pub fn loo_new(&self, i: usize, x: &[f64]) -> Result<Prediction> {
        self.check_width(x)?;
        self.average(x, |p| !p.rows.contains(&i)).ok_or(Error::coverage(i))
    }

    fn check_width(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dataset.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.dataset.n_features(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Enumerates the exact minipatch predictor on a tiny problem.
pub fn brute_force_predictor(dataset: &Dataset, n: usize, m: usize, learner: &LearnerSpec) -> Result<BruteForce> {
    BruteForce::new(dataset, n, m, learner)
}

/// Source of fresh test points from the data distribution.
pub trait TestSampler: Sync {
    fn sample(&self, n: usize, seed: u64) -> Result<Dataset>;
}

impl TestSampler for SimSpec {
    fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        simgen::generate(&self.resized(n, seed))
    }
}

/// Monte Carlo estimate of the occlusion target with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McTarget {
    pub feature: usize,
    pub value: f64,
    /// Standard error of the mean over test points.
    pub std_error: f64,
    pub n_test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub n_test: usize,
    pub seed: u64,
    /// Error function; the task default when unset.
    pub error: Option<ErrorFn>,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            n_test: 10_000,
            seed: 0,
            error: None,
        }
    }
}

/// Mean over fresh test points of `Error(Y, μ^{−j}(X)) − Error(Y, μ(X))`,
/// where μ averages all K patches of a freshly trained random ensemble and
/// μ^{−j} those without feature j. Patches come from `config.seed`, test
/// points from `opts.seed`.
pub fn monte_carlo_target(
    train: &Dataset,
    config: &MPConfig,
    sampler: Option<&dyn TestSampler>,
    j: usize,
    opts: &McOptions,
) -> Result<McTarget> {
    let sampler = sampler.ok_or(Error::NoSampler)?;
    config.validate()?;
    let (n, m) = config.patch_sizes(train.n_obs(), train.n_features())?;
    let patches = sample_minipatches(train.n_obs(), train.n_features(), n, m, config.k, config.seed)?;
    let models = fit_patches(train, config, &patches)?;
    let test = sampler.sample(opts.n_test, opts.seed)?;
    let error = opts.error.unwrap_or_else(|| ErrorFn::default_for(train.task()));
    Ok(mc_from_models(&patches, &models, &test, &[j], error)?[0])
}

/// As [`monte_carlo_target`] but reusing an already trained ensemble's
/// models (all K, no LOO restriction).
pub fn monte_carlo_target_for(
    ens: &Ensemble,
    sampler: &dyn TestSampler,
    features: &[usize],
    opts: &McOptions,
) -> Result<Vec<McTarget>> {
    let test = sampler.sample(opts.n_test, opts.seed)?;
    let error = opts.error.unwrap_or_else(|| ErrorFn::default_for(ens.dataset().task()));
    mc_from_models(ens.patches(), ens.models(), &test, features, error)
}

fn mc_from_models(
    patches: &[Minipatch],
    models: &[FittedModel],
    test: &Dataset,
    features: &[usize],
    error: ErrorFn,
) -> Result<Vec<McTarget>> {
    let n_features = test.n_features();
    for &j in features {
        if j >= n_features {
            return Err(Error::InvalidSize(format!("feature {j} out of range")));
        }
        if patches.iter().all(|p| p.has_feature(j)) {
            return Err(Error::FeatureNeverExcluded(j));
        }
    }
    let d = test.output_dim();
    // Which patches exclude each requested feature.
    let excluded: Vec<Vec<bool>> = features
        .iter()
        .map(|&j| patches.iter().map(|p| !p.has_feature(j)).collect())
        .collect();
    let n_test = test.n_obs();
    let diffs = par::try_map_indexed(n_test, |t| {
        let x = test.x.row(t);
        let mut full = vec![0.0; d];
        let mut partial = vec![vec![0.0; d]; features.len()];
        let mut counts = vec![0usize; features.len()];
        let mut pred = vec![0.0; d];
        for (k, (p, model)) in patches.iter().zip(models).enumerate() {
            model.predict_with(|s| x[p.features[s]], &mut pred);
            for (f, v) in full.iter_mut().zip(&pred) {
                *f += v;
            }
            for (f, ex) in excluded.iter().enumerate() {
                if ex[k] {
                    counts[f] += 1;
                    for (a, v) in partial[f].iter_mut().zip(&pred) {
                        *a += v;
                    }
                }
            }
        }
        full.iter_mut().for_each(|v| *v /= patches.len() as f64);
        let y = test.y.target(t);
        let base = error.score(y, &full)?;
        partial
            .iter_mut()
            .zip(&counts)
            .map(|(p, &c)| {
                p.iter_mut().for_each(|v| *v /= c as f64);
                Ok(error.score(y, p)? - base)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(features
        .iter()
        .enumerate()
        .map(|(f, &j)| {
            let values: Vec<f64> = diffs.iter().map(|row| row[f]).collect();
            let mean = values.iter().sum::<f64>() / n_test as f64;
            let var = if n_test > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_test - 1) as f64
            } else {
                0.0
            };
            McTarget {
                feature: j,
                value: mean,
                std_error: (var / n_test as f64).sqrt(),
                n_test,
            }
        })
        .collect())
}

/// Parameters of the linear-model closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTargetParams {
    pub beta: Vec<f64>,
    /// Feature minipatch ratio m/M.
    pub gamma: f64,
    pub feature: usize,
}

fn norm_sq_except(beta: &[f64], skip: &[usize]) -> f64 {
    beta.iter()
        .enumerate()
        .filter(|(j, _)| !skip.contains(j))
        .map(|(_, b)| b * b)
        .sum()
}

/// Occlusion target of least squares minipatches under squared error with
/// independent standard normal features:
/// γ[(2−γ)β_j² − (2 − (2M−1)γ/(M−1))·‖β_{−j}‖²/(M−1)].
pub fn linear_closed_form_target(p: &LinearTargetParams) -> Result<f64> {
    let big_m = p.beta.len();
    if big_m < 2 || p.feature >= big_m {
        return Err(Error::InvalidSpec("need M >= 2 and feature < M".into()));
    }
    if !(p.gamma > 0.0 && p.gamma < 1.0) {
        return Err(Error::InvalidSpec(format!("gamma must be in (0,1), got {}", p.gamma)));
    }
    let mf = big_m as f64;
    let g = p.gamma;
    let bj = p.beta[p.feature];
    let rest = norm_sq_except(&p.beta, &[p.feature]);
    Ok(g * ((2.0 - g) * bj * bj - (2.0 - (2.0 * mf - 1.0) * g / (mf - 1.0)) * rest / (mf - 1.0)))
}

/// Limits of the target for feature `j` ∈ {0, 1} when features 0 and 1 have
/// correlation ρ → 0 and ρ → 1 (all others independent). Returns
/// (limit at 0, limit at 1).
pub fn correlated_closed_form_limits(beta: &[f64], m: usize, j: usize) -> Result<(f64, f64)> {
    let big_m = beta.len();
    if big_m < 3 || m == 0 || m >= big_m {
        return Err(Error::InvalidSpec(format!("need M >= 3 and 1 <= m < M, got M={big_m}, m={m}")));
    }
    if j > 1 {
        return Err(Error::InvalidSpec("limits are defined for the correlated pair only".into()));
    }
    let (mf, mm) = (big_m as f64, m as f64);
    let g = mm / mf;
    let shrink = g * (2.0 / (mf - 1.0) - mm * (2.0 * mf - 1.0) / ((mf - 1.0).powi(2) * mf));
    let at_zero = g * (2.0 - g) * beta[j] * beta[j] - shrink * norm_sq_except(beta, &[j]);
    let pair = beta[0] + beta[1];
    let ratio = (mf - mm - 1.0) / (mf - 1.0);
    let at_one = g * (2.0 - g) * ratio * ratio * pair * pair - shrink * norm_sq_except(beta, &[0, 1]);
    Ok((at_zero, at_one))
}
