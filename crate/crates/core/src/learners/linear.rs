use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::Targets;
use crate::error::{Error, Result};

/// Affine model per output. With more than one output (classification) the
/// per-class scores are mapped through a softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `coefficients[c]` has one entry per feature slot.
    pub coefficients: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub softmax: bool,
}

impl LinearModel {
    pub fn feature_slots(&self) -> usize {
        self.coefficients.first().map_or(0, Vec::len)
    }

    pub fn output_dim(&self) -> usize {
        self.intercepts.len()
    }

    pub(crate) fn predict_with(&self, feature: impl Fn(usize) -> f64, out: &mut [f64]) {
        for (c, (beta, b)) in self.coefficients.iter().zip(&self.intercepts).enumerate() {
            out[c] = b + beta.iter().enumerate().map(|(s, w)| w * feature(s)).sum::<f64>();
        }
        if self.softmax {
            let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in out.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            out.iter_mut().for_each(|v| *v /= total);
        }
    }
}

/// Ridge regression with an unpenalized intercept:
/// minimizes ‖y − Xβ − b‖² + λ‖β‖².
///
/// For classification, one-vs-all indicator targets are regressed with the
/// same design and the resulting class scores pass through a softmax.
pub fn fit_least_squares(x: ArrayView2<'_, f64>, y: Targets<'_>, lambda: f64) -> Result<LinearModel> {
    let (n, m) = x.dim();
    if n == 0 || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    super::record_fit();

    let means: Vec<f64> = (0..m).map(|j| x.column(j).sum() / n as f64).collect();
    let xc = DMatrix::from_fn(n, m, |i, j| x[[i, j]] - means[j]);
    let mut gram = xc.tr_mul(&xc);
    for j in 0..m {
        gram[(j, j)] += lambda;
    }
    let max_diag = (0..m).map(|j| gram[(j, j)]).fold(0.0, f64::max);
    let chol = gram.cholesky().ok_or(Error::SingularSystem)?;
    // A numerically rank-deficient Gram matrix can still factor with a
    // vanishing pivot.
    let l = chol.l_dirty();
    if m > 0 && (0..m).any(|j| l[(j, j)] * l[(j, j)] <= 1e-12 * max_diag.max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularSystem);
    }

    let responses: Vec<Vec<f64>> = match y {
        Targets::Real(v) => vec![v.to_vec()],
        Targets::Class { labels, n_classes } => (0..n_classes)
            .map(|c| labels.iter().map(|&l| if l == c { 1.0 } else { 0.0 }).collect())
            .collect(),
    };
    let mut coefficients = Vec::with_capacity(responses.len());
    let mut intercepts = Vec::with_capacity(responses.len());
    for r in &responses {
        let ybar = r.iter().sum::<f64>() / n as f64;
        let yc = DVector::from_iterator(n, r.iter().map(|v| v - ybar));
        let beta = chol.solve(&xc.tr_mul(&yc));
        let b = ybar - beta.iter().zip(&means).map(|(w, mu)| w * mu).sum::<f64>();
        coefficients.push(beta.iter().copied().collect());
        intercepts.push(b);
    }
    Ok(LinearModel {
        coefficients,
        intercepts,
        softmax: matches!(y, Targets::Class { .. }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    use crate::rng::stream_rng;

    #[test]
    fn two_point_exact_solution() {
        let x = array![[1.0], [2.0]];
        let m = fit_least_squares(x.view(), Targets::Real(&[2.0, 4.0]), 0.0).unwrap();
        assert!((m.coefficients[0][0] - 2.0).abs() < 1e-12);
        assert!(m.intercepts[0].abs() < 1e-12);
        let mut out = [0.0];
        m.predict_with(|_| 3.0, &mut out);
        assert!((out[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response_gives_zero_slope() {
        let mut rng = stream_rng(3, 0);
        let x = Array2::from_shape_fn((7, 3), |_| rng.random_range(-1.0..1.0));
        let m = fit_least_squares(x.view(), Targets::Real(&[2.5; 7]), 1e-4).unwrap();
        assert!((m.intercepts[0] - 2.5).abs() < 1e-8);
        assert!(m.coefficients[0].iter().all(|b| b.abs() < 1e-8));
    }

    #[test]
    fn underdetermined_without_penalty_is_singular() {
        let x = array![[1.0, 2.0]];
        assert_eq!(
            fit_least_squares(x.view(), Targets::Real(&[1.0]), 0.0).unwrap_err(),
            Error::SingularSystem
        );
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        assert_eq!(
            fit_least_squares(x.view(), Targets::Real(&[1.0, 2.0, 3.0]), 0.0).unwrap_err(),
            Error::SingularSystem
        );
        assert!(fit_least_squares(x.view(), Targets::Real(&[1.0, 2.0, 3.0]), 1e-4).is_ok());
    }

    #[test]
    fn affine_evaluation() {
        let m = LinearModel {
            coefficients: vec![vec![2.0]],
            intercepts: vec![1.0],
            softmax: false,
        };
        let mut out = [0.0];
        m.predict_with(|_| 3.0, &mut out);
        assert_eq!(out[0], 7.0);
    }

    #[test]
    fn ridge_shrinks_coefficients() {
        let mut rng = stream_rng(5, 0);
        let x = Array2::from_shape_fn((20, 4), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..20)
            .map(|i| 3.0 * x[[i, 0]] - 2.0 * x[[i, 2]] + rng.random_range(-0.1..0.1))
            .collect();
        let norm = |lambda: f64| {
            let m = fit_least_squares(x.view(), Targets::Real(&y), lambda).unwrap();
            m.coefficients[0].iter().map(|b| b * b).sum::<f64>().sqrt()
        };
        let lambdas = [0.0, 1e-4, 0.1, 1.0, 10.0, 100.0];
        for w in lambdas.windows(2) {
            assert!(norm(w[0]) >= norm(w[1]));
        }
    }

    #[test]
    fn classification_outputs_probabilities() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let m = fit_least_squares(
            x.view(),
            Targets::Class { labels: &[0, 0, 1, 1], n_classes: 3 },
            1e-4,
        )
        .unwrap();
        let mut out = [0.0; 3];
        m.predict_with(|_| 3.0, &mut out);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(out.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(out[1] > out[0]);
    }
}
