//! Base learners fitted on a single minipatch.
//!
//! Every learner consumes an n×m design (the minipatch's features in sorted
//! order) and produces a [`FittedModel`] whose predictions are length-d
//! vectors: d = 1 for regression, class probabilities for classification.

mod linear;
mod tree;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use linear::{fit_least_squares, LinearModel};
pub use tree::{fit_decision_tree, Node, TreeModel, TreeParams};

use crate::config::LearnerSpec;
use crate::data::{Prediction, Targets};
use crate::error::{Error, Result};

static FIT_CALLS: AtomicU64 = AtomicU64::new(0);

/// Total number of base-learner fits performed by this process.
pub fn fit_calls() -> u64 {
    FIT_CALLS.load(Ordering::Relaxed)
}

pub(crate) fn record_fit() {
    FIT_CALLS.fetch_add(1, Ordering::Relaxed);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    LeastSquares,
    DecisionTree,
    ConstantMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedModel {
    LeastSquares(LinearModel),
    DecisionTree(TreeModel),
    /// Constant prediction: response mean or class frequencies.
    ConstantMean { value: Vec<f64>, feature_slots: usize },
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::LeastSquares(_) => ModelKind::LeastSquares,
            FittedModel::DecisionTree(_) => ModelKind::DecisionTree,
            FittedModel::ConstantMean { .. } => ModelKind::ConstantMean,
        }
    }

    pub fn feature_slots(&self) -> usize {
        match self {
            FittedModel::LeastSquares(m) => m.feature_slots(),
            FittedModel::DecisionTree(t) => t.feature_slots,
            FittedModel::ConstantMean { feature_slots, .. } => *feature_slots,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FittedModel::LeastSquares(m) => m.output_dim(),
            FittedModel::DecisionTree(t) => t.output_dim(),
            FittedModel::ConstantMean { value, .. } => value.len(),
        }
    }

    /// Predict from a length-m input.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.feature_slots() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_slots(),
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.output_dim()];
        self.predict_with(|s| x[s], &mut out);
        Ok(Prediction(out))
    }

    /// Allocation-free prediction; `feature(s)` returns input slot `s`.
    /// `out` must have length [`output_dim`](Self::output_dim).
    pub fn predict_with(&self, feature: impl Fn(usize) -> f64, out: &mut [f64]) {
        match self {
            FittedModel::LeastSquares(m) => m.predict_with(feature, out),
            FittedModel::DecisionTree(t) => t.predict_with(feature, out),
            FittedModel::ConstantMean { value, .. } => out.copy_from_slice(value),
        }
    }
}

/// Response mean (regression) or class frequencies (classification).
pub(crate) fn mean_response(y: Targets<'_>) -> Vec<f64> {
    match y {
        Targets::Real(v) => vec![v.iter().sum::<f64>() / v.len() as f64],
        Targets::Class { labels, n_classes } => {
            let mut freq = vec![0.0; n_classes];
            for &l in labels {
                freq[l] += 1.0;
            }
            let n = labels.len() as f64;
            freq.iter_mut().for_each(|f| *f /= n);
            freq
        }
    }
}

pub fn fit_constant_mean(x: ArrayView2<'_, f64>, y: Targets<'_>) -> Result<FittedModel> {
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    record_fit();
    Ok(FittedModel::ConstantMean {
        value: mean_response(y),
        feature_slots: x.ncols(),
    })
}

/// Fit the learner selected by `spec`.
pub fn fit(spec: &LearnerSpec, x: ArrayView2<'_, f64>, y: Targets<'_>) -> Result<FittedModel> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    match *spec {
        LearnerSpec::Ridge { lambda } => fit_least_squares(x, y, lambda).map(FittedModel::LeastSquares),
        LearnerSpec::Tree { max_depth, min_leaf } => {
            fit_decision_tree(x, y, TreeParams { max_depth, min_leaf }).map(FittedModel::DecisionTree)
        }
        LearnerSpec::ConstantMean => fit_constant_mean(x, y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::seq::SliceRandom;
    use rand::Rng;

    use crate::rng::stream_rng;

    #[test]
    fn constant_model_predicts_mean() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let m = fit_constant_mean(x.view(), Targets::Real(&[4.0, 4.4])).unwrap();
        let p = m.predict(&[9.0, 9.0]).unwrap();
        assert!((p.0[0] - 4.2).abs() < 1e-15);
        assert!(matches!(m.predict(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dispatch_checks_lengths() {
        let x = array![[1.0], [2.0]];
        let err = fit(&LearnerSpec::ridge(), x.view(), Targets::Real(&[1.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn fit_counter_advances() {
        let before = fit_calls();
        let x = array![[1.0], [2.0]];
        fit(&LearnerSpec::ConstantMean, x.view(), Targets::Real(&[1.0, 2.0])).unwrap();
        assert!(fit_calls() > before);
    }

    fn permuted_predictions_agree(spec: LearnerSpec, classification: bool) {
        let mut rng = stream_rng(11, 0);
        let (n, m) = (12, 3);
        let x = Array2::from_shape_fn((n, m), |_| rng.random_range(-2.0..2.0));
        let y_real: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y_class: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let targets = |rows: &[usize]| -> (Vec<f64>, Vec<usize>) {
            (
                rows.iter().map(|&i| y_real[i]).collect(),
                rows.iter().map(|&i| y_class[i]).collect(),
            )
        };
        let fit_rows = |rows: &[usize]| {
            let xs = x.select(ndarray::Axis(0), rows);
            let (yr, yc) = targets(rows);
            let t = if classification {
                Targets::Class { labels: &yc, n_classes: 3 }
            } else {
                Targets::Real(&yr)
            };
            fit(&spec, xs.view(), t).unwrap()
        };
        let base_rows: Vec<usize> = (0..n).collect();
        let base = fit_rows(&base_rows);
        let probes: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..m).map(|_| rng.random_range(-2.5..2.5)).collect())
            .collect();
        for _ in 0..100 {
            let mut rows = base_rows.clone();
            rows.shuffle(&mut rng);
            let model = fit_rows(&rows);
            for p in &probes {
                let a = base.predict(p).unwrap();
                let b = model.predict(p).unwrap();
                for (u, v) in a.0.iter().zip(&b.0) {
                    assert!((u - v).abs() < 1e-10, "{spec:?}: {u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn row_permutation_invariance() {
        for classification in [false, true] {
            permuted_predictions_agree(LearnerSpec::Ridge { lambda: 1e-4 }, classification);
            permuted_predictions_agree(LearnerSpec::Ridge { lambda: 0.0 }, classification);
            permuted_predictions_agree(LearnerSpec::Tree { max_depth: 4, min_leaf: 1 }, classification);
            permuted_predictions_agree(LearnerSpec::ConstantMean, classification);
        }
    }
}
