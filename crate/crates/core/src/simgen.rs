//! Synthetic data: sparse linear (independent or correlated features) and
//! sparse nonlinear models, for regression or logistic classification.
//!
//! Row i is generated from its own substream of the seed: M standard normals
//! through the covariance factor, then the noise or label draw. Rows are
//! therefore independent of generation order and thread count.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Response, Task};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{open_unit, std_normal, stream_rng};

/// Number of fixed-magnitude signal features after the tested first one.
pub const FIXED_SIGNALS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    /// Independent N(0, I) features, β = [snr, 5·1₉, 0, …].
    Linear,
    /// As `Linear` with Σ_{j,j+1} = ρ for all adjacent pairs.
    Correlated,
    /// As `Linear` with only features 0 and 1 correlated at ρ.
    CorrelatedPair,
    /// Independent features, spline-like signal on the first five.
    Nonlinear,
}

impl SimModel {
    pub fn name(self) -> &'static str {
        match self {
            SimModel::Linear => "linear",
            SimModel::Correlated => "correlated",
            SimModel::CorrelatedPair => "correlated_pair",
            SimModel::Nonlinear => "nonlinear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub model: SimModel,
    pub task: Task,
    pub n_obs: usize,
    pub n_features: usize,
    /// Coefficient magnitude of the first feature.
    pub snr: f64,
    /// Correlation for the correlated models; ignored otherwise.
    pub rho: f64,
    /// Magnitude of the fixed signal features (5 by default; 0 gives pure
    /// noise apart from the first feature).
    pub signal: f64,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(model: SimModel, task: Task, n_obs: usize, n_features: usize) -> Self {
        SimSpec {
            model,
            task,
            n_obs,
            n_features,
            snr: 0.0,
            rho: 0.0,
            signal: 5.0,
            seed: 0,
        }
    }

    pub fn with_snr(mut self, snr: f64) -> Self {
        self.snr = snr;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let min_features = match self.model {
            SimModel::Nonlinear => 5,
            _ => FIXED_SIGNALS + 1,
        };
        if self.n_features < min_features {
            return Err(Error::InvalidSpec(format!(
                "{} model needs M >= {min_features}, got {}",
                self.model.name(),
                self.n_features
            )));
        }
        if self.n_obs < 2 {
            return Err(Error::InvalidSpec(format!("need N >= 2, got {}", self.n_obs)));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidSpec(format!("|rho| must be < 1, got {}", self.rho)));
        }
        if !self.snr.is_finite() || !self.signal.is_finite() {
            return Err(Error::InvalidSpec("snr and signal must be finite".into()));
        }
        Ok(())
    }

    /// True coefficients for the linear models.
    pub fn true_beta(&self) -> Option<Vec<f64>> {
        match self.model {
            SimModel::Nonlinear => None,
            _ => {
                let mut beta = vec![0.0; self.n_features];
                beta[0] = self.snr;
                for b in beta.iter_mut().skip(1).take(FIXED_SIGNALS) {
                    *b = self.signal;
                }
                Some(beta)
            }
        }
    }

    /// Indices of features that enter the signal.
    pub fn true_support(&self) -> Vec<usize> {
        match self.true_beta() {
            Some(beta) => (0..beta.len()).filter(|&j| beta[j] != 0.0).collect(),
            None => {
                let mut s = Vec::new();
                if self.snr != 0.0 {
                    s.push(0);
                }
                if self.signal != 0.0 {
                    s.extend(1..5);
                }
                s
            }
        }
    }

    /// Mean function f(x).
    pub fn signal_at(&self, x: &[f64]) -> f64 {
        match self.model {
            SimModel::Nonlinear => {
                let first = if (-2.0..=2.0).contains(&x[0]) { self.snr * x[0] } else { 0.0 };
                first + self.signal * (x[1].max(0.0) + x[2].min(0.0) + x[3].max(0.0) + sign(x[4]))
            }
            _ => {
                let tail: f64 = x[1..=FIXED_SIGNALS].iter().sum();
                self.snr * x[0] + self.signal * tail
            }
        }
    }

    /// Same model with a different size and seed, e.g. for fresh test data.
    pub fn resized(&self, n_obs: usize, seed: u64) -> SimSpec {
        SimSpec {
            n_obs,
            seed,
            ..self.clone()
        }
    }
}

/// sign with sign(0) = 0.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn sigmoid(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + (-f).exp())
    } else {
        let e = f.exp();
        e / (1.0 + e)
    }
}

/// Lower bidiagonal Cholesky factor of the tridiagonal correlation matrix:
/// returns (diagonal, sub-diagonal) with `sub[j]` multiplying z_{j−1}.
fn tridiagonal_factor(rho: f64, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut diag = vec![1.0; m];
    let mut sub = vec![0.0; m];
    for j in 1..m {
        sub[j] = rho / diag[j - 1];
        let pivot = 1.0 - sub[j] * sub[j];
        if !(pivot > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "tridiagonal correlation {rho} is not positive definite for M={m}"
            )));
        }
        diag[j] = pivot.sqrt();
    }
    Ok((diag, sub))
}

/// Draw a dataset from `spec`.
pub fn generate(spec: &SimSpec) -> Result<Dataset> {
    spec.validate()?;
    let m = spec.n_features;
    let (diag, sub) = match spec.model {
        SimModel::Correlated => tridiagonal_factor(spec.rho, m)?,
        SimModel::CorrelatedPair => {
            let mut diag = vec![1.0; m];
            let mut sub = vec![0.0; m];
            diag[1] = (1.0 - spec.rho * spec.rho).sqrt();
            sub[1] = spec.rho;
            (diag, sub)
        }
        _ => (vec![1.0; m], vec![0.0; m]),
    };
    let rows = par::map_indexed(spec.n_obs, |i| {
        let mut rng = stream_rng(spec.seed, i as u64);
        let z: Vec<f64> = (0..m).map(|_| std_normal(&mut rng)).collect();
        let x: Vec<f64> = (0..m)
            .map(|j| if j == 0 { z[0] } else { sub[j] * z[j - 1] + diag[j] * z[j] })
            .collect();
        let f = spec.signal_at(&x);
        let y = match spec.task {
            Task::Regression => f + std_normal(&mut rng),
            Task::Classification => f64::from(u8::from(open_unit(&mut rng) < sigmoid(f))),
        };
        (x, y)
    });
    let mut x = Array2::zeros((spec.n_obs, m));
    let mut ys = Vec::with_capacity(spec.n_obs);
    for (i, (row, y)) in rows.into_iter().enumerate() {
        x.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
        ys.push(y);
    }
    let response = match spec.task {
        Task::Regression => Response::Real(ys),
        Task::Classification => Response::Class {
            labels: ys.into_iter().map(|v| v as usize).collect(),
            n_classes: 2,
        },
    };
    Dataset::new(x, response)
}

/// JSON sidecar: the simulation settings, plus the true β for linear models and the true
/// support.
pub fn sidecar(spec: &SimSpec) -> serde_json::Value {
    serde_json::json!({
        "spec": spec,
        "beta": spec.true_beta(),
        "support": spec.true_support(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn col(ds: &Dataset, j: usize) -> Vec<f64> {
        ds.x.column(j).to_vec()
    }

    fn ys(ds: &Dataset) -> Vec<f64> {
        match &ds.y {
            Response::Real(v) => v.clone(),
            Response::Class { labels, .. } => labels.iter().map(|&l| l as f64).collect(),
        }
    }

    #[test]
    fn null_first_feature_is_uncorrelated_with_response() {
        let ds = generate(&SimSpec::new(SimModel::Linear, Task::Regression, 50_000, 10).with_seed(1)).unwrap();
        assert!(corr(&col(&ds, 0), &ys(&ds)).abs() < 0.015);
    }

    #[test]
    fn correlated_adjacent_columns() {
        let spec = SimSpec::new(SimModel::Correlated, Task::Regression, 50_000, 12).with_rho(0.5).with_seed(2);
        let ds = generate(&spec).unwrap();
        assert!((corr(&col(&ds, 0), &col(&ds, 1)) - 0.5).abs() < 0.02);
        assert!((corr(&col(&ds, 6), &col(&ds, 7)) - 0.5).abs() < 0.02);
        assert!(corr(&col(&ds, 0), &col(&ds, 2)).abs() < 0.02);
        let bad = SimSpec::new(SimModel::Correlated, Task::Regression, 10, 12).with_rho(0.9);
        assert!(matches!(generate(&bad), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn correlated_pair_allows_strong_correlation() {
        let spec = SimSpec::new(SimModel::CorrelatedPair, Task::Regression, 20_000, 10).with_rho(0.95).with_seed(3);
        let ds = generate(&spec).unwrap();
        assert!((corr(&col(&ds, 0), &col(&ds, 1)) - 0.95).abs() < 0.01);
        assert!(corr(&col(&ds, 1), &col(&ds, 2)).abs() < 0.03);
    }

    #[test]
    fn nonlinear_indicator_and_sign() {
        let spec = SimSpec::new(SimModel::Nonlinear, Task::Regression, 10, 5).with_snr(4.0);
        assert_eq!(spec.signal_at(&[3.0, 0.0, 0.0, 0.0, 0.0]), 0.0);
        assert_eq!(spec.signal_at(&[1.5, 0.0, 0.0, 0.0, 0.0]), 6.0);
        assert_eq!(spec.signal_at(&[0.0, 1.0, 1.0, -1.0, -2.0]), 5.0 - 5.0);
        assert_eq!(spec.signal_at(&[0.0, 0.0, -1.0, 0.0, 0.0]), -5.0);
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let spec = SimSpec::new(SimModel::Nonlinear, Task::Classification, 300, 8).with_snr(2.0).with_seed(9);
        let a = generate(&spec).unwrap();
        let b = par::with_threads(1, || generate(&spec).unwrap());
        assert_eq!(a, b);
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        crate::data::write_dataset(&a, &mut ba).unwrap();
        crate::data::write_dataset(&b, &mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_ne!(a, generate(&spec.clone().with_seed(10)).unwrap());
    }

    #[test]
    fn independent_columns_have_small_covariance() {
        let n = 20_000;
        let ds = generate(&SimSpec::new(SimModel::Linear, Task::Regression, n, 10).with_seed(4)).unwrap();
        let tol = 4.0 / (n as f64).sqrt();
        for a in 0..10 {
            for b in a + 1..10 {
                let (ca, cb) = (col(&ds, a), col(&ds, b));
                let cov = ca.iter().zip(&cb).map(|(x, y)| x * y).sum::<f64>() / n as f64;
                assert!(cov.abs() < tol, "({a},{b}) {cov}");
            }
        }
    }

    #[test]
    fn logistic_labels_follow_probabilities() {
        let spec = SimSpec::new(SimModel::Linear, Task::Classification, 100_000, 10).with_snr(1.0).with_seed(1);
        let ds = generate(&spec).unwrap();
        let y = ys(&ds);
        // Bucket rows by probability; label count vs summed probability, with
        // the exact variance of a sum of independent Bernoullis.
        let mut buckets = vec![(0.0, 0.0, 0.0); 8];
        for i in 0..ds.n_obs() {
            let p = sigmoid(spec.signal_at(ds.x.row(i).as_slice().unwrap()));
            let b = &mut buckets[((p * 8.0) as usize).min(7)];
            b.0 += y[i];
            b.1 += p;
            b.2 += p * (1.0 - p);
        }
        for (hits, expected, var) in buckets {
            assert!((hits - expected).abs() <= 3.0 * var.sqrt(), "{hits} vs {expected}");
        }
    }

    #[test]
    fn truth_and_validation() {
        let spec = SimSpec::new(SimModel::Linear, Task::Regression, 10, 12).with_snr(3.0);
        assert_eq!(spec.true_beta().unwrap()[..11], [3.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 0.0]);
        assert_eq!(spec.true_support(), (0..10).collect::<Vec<_>>());
        assert_eq!(SimSpec::new(SimModel::Nonlinear, Task::Regression, 10, 6).true_support(), vec![1, 2, 3, 4]);
        assert!(generate(&SimSpec::new(SimModel::Linear, Task::Regression, 10, 9)).is_err());
        assert!(generate(&SimSpec::new(SimModel::Nonlinear, Task::Regression, 10, 4)).is_err());
        assert!(generate(&SimSpec::new(SimModel::CorrelatedPair, Task::Regression, 10, 10).with_rho(1.0)).is_err());
        let side = sidecar(&spec);
        assert_eq!(side["support"].as_array().unwrap().len(), 10);
    }
}
