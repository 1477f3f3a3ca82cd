//! Jackknife+ predictive inference on top of a minipatch ensemble.
//!
//! LOO residuals `R_i = Error(Y_i, μ̂_{−i}(X_i))` come straight from the
//! cache. For a new point the N leave-i-out predictions `μ̂_{−i}(x)` are
//! combined with the residuals through order statistics.

use std::io::Write;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::data::{ErrorFn, Task};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::par;

pub use crate::ensemble::sample_k_binomial;

// Guards ⌈·⌉ and ⌊·⌋ of (1−α)(N+1) and α(N+1) against representation error,
// e.g. 0.9 * 10 = 9.000000000000002.
const INDEX_SLACK: f64 = 1e-10;

/// Per-row LOO nonconformity scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooResiduals {
    pub values: Vec<f64>,
    pub error: ErrorFn,
}

/// Regression predictive interval; endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveInterval {
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
}

impl PredictiveInterval {
    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Classification predictive set of label indices, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSet {
    pub labels: Vec<usize>,
    pub alpha: f64,
}

impl PredictiveSet {
    pub fn new(labels: Vec<usize>, alpha: f64) -> Self {
        PredictiveSet { labels, alpha }
    }

    pub fn contains(&self, label: usize) -> bool {
        self.labels.binary_search(&label).is_ok()
    }
}

/// LOO residuals under the task's default error function.
pub fn loo_residuals(ens: &Ensemble) -> Result<LooResiduals> {
    let error = ErrorFn::default_for(ens.dataset().task());
    Ok(LooResiduals {
        values: crate::loco::loo_errors(ens, error)?,
        error,
    })
}

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Rank ⌈(1−α)(N+1)⌉ (1-based), possibly N+1 or more.
pub fn upper_rank(n: usize, alpha: f64) -> usize {
    ((1.0 - alpha) * (n as f64 + 1.0) - INDEX_SLACK).ceil().max(0.0) as usize
}

/// Rank ⌊α(N+1)⌋ (1-based), possibly 0.
pub fn lower_rank(n: usize, alpha: f64) -> usize {
    (alpha * (n as f64 + 1.0) + INDEX_SLACK).floor().max(0.0) as usize
}

/// The ⌈(1−α)(N+1)⌉-th smallest value, or +∞ when that exceeds N.
pub fn quantile_plus(values: &[f64], alpha: f64) -> Result<f64> {
    let v = sorted(values)?;
    let r = upper_rank(v.len(), alpha);
    Ok(if r > v.len() {
        f64::INFINITY
    } else {
        v[r.max(1) - 1]
    })
}

/// The ⌊α(N+1)⌋-th smallest value, or −∞ when that is below 1.
pub fn quantile_minus(values: &[f64], alpha: f64) -> Result<f64> {
    let v = sorted(values)?;
    let r = lower_rank(v.len(), alpha);
    Ok(if r < 1 {
        f64::NEG_INFINITY
    } else {
        v[r.min(v.len()) - 1]
    })
}

/// Interval from LOO predictions at the new point and LOO residuals.
pub fn interval_from_predictions(preds: &[f64], residuals: &[f64], alpha: f64) -> Result<PredictiveInterval> {
    if preds.len() != residuals.len() {
        return Err(Error::DimensionMismatch {
            expected: residuals.len(),
            got: preds.len(),
        });
    }
    let lows: Vec<f64> = preds.iter().zip(residuals).map(|(p, r)| p - r).collect();
    let highs: Vec<f64> = preds.iter().zip(residuals).map(|(p, r)| p + r).collect();
    Ok(PredictiveInterval {
        lo: quantile_minus(&lows, alpha)?,
        hi: quantile_plus(&highs, alpha)?,
        alpha,
    })
}

/// Label set from per-row LOO probability vectors at the new point: label y
/// is kept iff #{i : 1 − p_i[y] ≥ R_i} ≤ (1−α)(N+1).
pub fn set_from_probabilities(probs: &[Vec<f64>], residuals: &[f64], n_classes: usize, alpha: f64) -> Result<PredictiveSet> {
    if probs.len() != residuals.len() {
        return Err(Error::DimensionMismatch {
            expected: residuals.len(),
            got: probs.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let bound = (1.0 - alpha) * (residuals.len() as f64 + 1.0) + INDEX_SLACK;
    let labels = (0..n_classes)
        .filter(|&y| {
            let count = probs.iter().zip(residuals).filter(|(p, &r)| 1.0 - p[y] >= r).count();
            count as f64 <= bound
        })
        .collect();
    Ok(PredictiveSet::new(labels, alpha))
}

fn check_residuals(ens: &Ensemble, res: &LooResiduals) -> Result<()> {
    if res.values.len() != ens.n_obs() {
        return Err(Error::DimensionMismatch {
            expected: ens.n_obs(),
            got: res.values.len(),
        });
    }
    Ok(())
}

/// Jackknife+ regression interval at `x_new`. Requires absolute-error
/// residuals.
pub fn predict_interval(
    ens: &Ensemble,
    res: &LooResiduals,
    x_new: ArrayView1<'_, f64>,
    alpha: f64,
) -> Result<PredictiveInterval> {
    if ens.dataset().task() != Task::Regression {
        return Err(Error::TaskMismatch { expected: "regression" });
    }
    if res.error != ErrorFn::Absolute {
        return Err(Error::InvalidSpec("predictive intervals need absolute-error residuals".into()));
    }
    check_residuals(ens, res)?;
    let preds: Vec<f64> = ens.loo_predictions_new(x_new)?.into_iter().map(|p| p.0[0]).collect();
    interval_from_predictions(&preds, &res.values, alpha)
}

/// Jackknife+ classification label set at `x_new`.
pub fn predict_set(ens: &Ensemble, res: &LooResiduals, x_new: ArrayView1<'_, f64>, alpha: f64) -> Result<PredictiveSet> {
    if ens.dataset().task() != Task::Classification {
        return Err(Error::TaskMismatch {
            expected: "classification",
        });
    }
    check_residuals(ens, res)?;
    let probs: Vec<Vec<f64>> = ens.loo_predictions_new(x_new)?.into_iter().map(|p| p.0).collect();
    set_from_probabilities(&probs, &res.values, ens.output_dim(), alpha)
}

/// Output for one new row of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchPrediction {
    Interval(PredictiveInterval),
    Set(PredictiveSet),
}

/// Predict every row of `x_new` (rows are new points). Rows run in parallel;
/// output order follows input order.
pub fn predict_batch(ens: &Ensemble, res: &LooResiduals, x_new: ndarray::ArrayView2<'_, f64>, alpha: f64) -> Result<Vec<BatchPrediction>> {
    let task = ens.dataset().task();
    par::try_map_indexed(x_new.nrows(), |r| match task {
        Task::Regression => predict_interval(ens, res, x_new.row(r), alpha).map(BatchPrediction::Interval),
        Task::Classification => predict_set(ens, res, x_new.row(r), alpha).map(BatchPrediction::Set),
    })
}

/// CSV with `row_id,lo,hi` or `row_id,labels`. Set members are joined by
/// semicolons, written as `class_names[idx]` when names are given.
pub fn write_batch_csv(preds: &[BatchPrediction], class_names: Option<&[String]>, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    match preds.first() {
        Some(BatchPrediction::Set(_)) => out.write_record(["row_id", "labels"])?,
        _ => out.write_record(["row_id", "lo", "hi"])?,
    }
    for (row, p) in preds.iter().enumerate() {
        match p {
            BatchPrediction::Interval(iv) => {
                out.write_record([row.to_string(), iv.lo.to_string(), iv.hi.to_string()])?;
            }
            BatchPrediction::Set(s) => {
                let labels: Vec<String> = s
                    .labels
                    .iter()
                    .map(|&l| class_names.and_then(|n| n.get(l).cloned()).unwrap_or_else(|| l.to_string()))
                    .collect();
                out.write_record([row.to_string(), labels.join(";")])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{LearnerSpec, MPConfig};
    use crate::data::{Dataset, Response};
    use crate::ensemble::train_ensemble;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    // Independent reference: literal 1-based order statistics.
    fn reference_plus(values: &[f64], alpha: f64) -> f64 {
        let n = values.len();
        let target = (1.0 - alpha) * (n as f64 + 1.0);
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut r = 1;
        while (r as f64) < target - 1e-10 {
            r += 1;
        }
        if r > n {
            f64::INFINITY
        } else {
            v[r - 1]
        }
    }

    fn reference_minus(values: &[f64], alpha: f64) -> f64 {
        let n = values.len();
        let target = alpha * (n as f64 + 1.0);
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut r = 0;
        while ((r + 1) as f64) <= target + 1e-10 {
            r += 1;
        }
        if r == 0 {
            f64::NEG_INFINITY
        } else {
            v[r.min(n) - 1]
        }
    }

    #[test]
    fn quantile_examples() {
        let v: Vec<f64> = (1..=10).rev().map(f64::from).collect();
        assert_eq!(quantile_plus(&v, 0.1).unwrap(), 10.0);
        assert_eq!(quantile_minus(&v, 0.1).unwrap(), 1.0);
        assert_eq!(quantile_plus(&[1.0, 2.0, 3.0], 0.2).unwrap(), f64::INFINITY);
        assert_eq!(quantile_minus(&[1.0, 2.0, 3.0], 0.2).unwrap(), f64::NEG_INFINITY);
        assert_eq!(quantile_plus(&[4.0; 20], 0.3).unwrap(), 4.0);
        assert_eq!(quantile_minus(&[5.0, 7.0, 5.0, 5.0], 0.4).unwrap(), 5.0);
        assert_eq!(quantile_plus(&[], 0.1), Err(Error::EmptyInput));
        assert_eq!(quantile_minus(&[], 0.1), Err(Error::EmptyInput));
    }

    proptest! {
        #[test]
        fn quantiles_match_reference(
            raw in prop::collection::vec(0u8..12, 1..40),
            alpha in prop::sample::select(vec![0.01, 0.05, 0.1, 0.2, 0.25, 0.4, 0.5, 0.9]),
        ) {
            let values: Vec<f64> = raw.iter().map(|&v| f64::from(v) * 0.5).collect();
            prop_assert_eq!(quantile_plus(&values, alpha).unwrap(), reference_plus(&values, alpha));
            prop_assert_eq!(quantile_minus(&values, alpha).unwrap(), reference_minus(&values, alpha));
        }

        #[test]
        fn wider_alpha_never_grows_interval(
            preds in prop::collection::vec(-5.0..5.0f64, 30),
            res in prop::collection::vec(0.0..3.0f64, 30),
            a1 in 0.01..0.5f64, extra in 0.0..0.4f64,
        ) {
            let narrow = interval_from_predictions(&preds, &res, a1).unwrap();
            let wide_alpha = interval_from_predictions(&preds, &res, a1 + extra).unwrap();
            prop_assert!(wide_alpha.hi <= narrow.hi && wide_alpha.lo >= narrow.lo);
            if narrow.hi.is_finite() && narrow.lo.is_finite() {
                let lo_env = preds.iter().zip(&res).map(|(p, r)| p - r).fold(f64::INFINITY, f64::min);
                let hi_env = preds.iter().zip(&res).map(|(p, r)| p + r).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo_env <= narrow.lo && narrow.hi <= hi_env);
            }
        }

        #[test]
        fn wider_alpha_never_grows_set(
            p0 in prop::collection::vec(0.0..1.0f64, 15),
            res in prop::collection::vec(0.0..1.0f64, 15),
            a1 in 0.01..0.5f64, extra in 0.0..0.4f64,
        ) {
            let probs: Vec<Vec<f64>> = p0.iter().map(|&p| vec![p, 1.0 - p]).collect();
            let a = set_from_probabilities(&probs, &res, 2, a1).unwrap();
            let b = set_from_probabilities(&probs, &res, 2, a1 + extra).unwrap();
            prop_assert!(b.labels.iter().all(|l| a.contains(*l)));
        }
    }

    #[test]
    fn interval_examples() {
        let res: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let iv = interval_from_predictions(&[0.0; 9], &res, 0.1).unwrap();
        assert_eq!((iv.lo, iv.hi), (-0.9, 0.9));
        let iv = interval_from_predictions(&[2.5; 40], &[0.0; 40], 0.1).unwrap();
        assert_eq!((iv.lo, iv.hi), (2.5, 2.5));
        let iv = interval_from_predictions(&[1.0, 2.0, 3.0], &[0.1, 0.2, 0.3], 0.2).unwrap();
        assert_eq!((iv.lo, iv.hi), (f64::NEG_INFINITY, f64::INFINITY));
    }

    #[test]
    fn set_examples() {
        let r = [0.5; 9];
        let p06: Vec<Vec<f64>> = (0..9).map(|_| vec![0.6, 0.4]).collect();
        assert!(set_from_probabilities(&p06, &r, 2, 0.1).unwrap().contains(0));
        let s = set_from_probabilities(&p06, &r, 2, 0.2).unwrap();
        // Label 1 has probability 0.4: error 0.6 ≥ 0.5 for all 9 rows > 8.
        assert!(!s.contains(1));
        let p: Vec<Vec<f64>> = (0..9).map(|i| vec![0.1 + i as f64 * 0.05, 0.9 - i as f64 * 0.05]).collect();
        assert_eq!(set_from_probabilities(&p, &[1.0; 9], 2, 0.1).unwrap().labels, vec![0, 1]);
    }

    #[test]
    fn ensemble_level_checks() {
        let x = Array2::from_shape_fn((30, 3), |(i, j)| ((i * 5 + j * 11) % 13) as f64);
        let y: Vec<f64> = (0..30).map(|i| x[[i, 0]] * 0.5 + (i % 3) as f64).collect();
        let ds = Dataset::new(x.clone(), Response::Real(y)).unwrap();
        let ens = train_ensemble(ds, &MPConfig { k: 300, ..MPConfig::default() }).unwrap();
        let res = loo_residuals(&ens).unwrap();
        assert!(res.values.iter().all(|&r| r >= 0.0));
        let iv = predict_interval(&ens, &res, array![3.0, 1.0, 2.0].view(), 0.2).unwrap();
        assert!(iv.lo <= iv.hi);
        assert!(matches!(
            predict_set(&ens, &res, array![3.0, 1.0, 2.0].view(), 0.2),
            Err(Error::TaskMismatch { .. })
        ));
        let wrong = LooResiduals { error: ErrorFn::Squared, ..res.clone() };
        assert!(predict_interval(&ens, &wrong, array![3.0, 1.0, 2.0].view(), 0.2).is_err());

        let labels = (0..30).map(|i| usize::from(x[[i, 0]] > 6.0)).collect();
        let ds = Dataset::new(x, Response::Class { labels, n_classes: 2 }).unwrap();
        let cfg = MPConfig { k: 300, learner: LearnerSpec::tree(), ..MPConfig::default() };
        let ens = train_ensemble(ds, &cfg).unwrap();
        let res = loo_residuals(&ens).unwrap();
        assert!(res.values.iter().all(|&r| (0.0..=1.0).contains(&r)));
        let set = predict_set(&ens, &res, array![12.0, 0.0, 0.0].view(), 0.1).unwrap();
        assert!(set.labels.iter().all(|&l| l < 2));
        let batch = predict_batch(&ens, &res, ens.dataset().x.view(), 0.1).unwrap();
        assert_eq!(batch.len(), 30);
        let mut buf = Vec::new();
        write_batch_csv(&batch, None, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("row_id,labels\n"));
    }

    #[test]
    fn batch_csv_for_intervals() {
        let preds = vec![
            BatchPrediction::Interval(PredictiveInterval { lo: -1.5, hi: 2.0, alpha: 0.1 }),
            BatchPrediction::Interval(PredictiveInterval { lo: f64::NEG_INFINITY, hi: f64::INFINITY, alpha: 0.1 }),
        ];
        let mut buf = Vec::new();
        write_batch_csv(&preds, None, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "row_id,lo,hi\n0,-1.5,2\n1,-inf,inf\n");
    }
}
