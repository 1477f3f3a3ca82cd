use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base learner selector and hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    /// Ridge-penalized least squares with an unpenalized intercept.
    Ridge { lambda: f64 },
    /// CART tree (SSE splits for regression, Gini for classification).
    Tree { max_depth: usize, min_leaf: usize },
    /// Ignores the features and predicts the minipatch response mean.
    ConstantMean,
}

impl LearnerSpec {
    pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-4;

    pub fn ridge() -> Self {
        LearnerSpec::Ridge {
            lambda: Self::DEFAULT_RIDGE_LAMBDA,
        }
    }

    pub fn tree() -> Self {
        LearnerSpec::Tree {
            max_depth: 8,
            min_leaf: 3,
        }
    }
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec::ridge()
    }
}

/// Minipatch ensemble and inference settings.
///
/// `n` and `m` default to ⌈√N⌉ and ⌈√M⌉ (clamped below N and M) when unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MPConfig {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub k: usize,
    pub seed: u64,
    pub alpha: f64,
    pub learner: LearnerSpec,
    pub buffer_c: f64,
    pub use_buffer: bool,
    /// Reject ensembles where some (row, feature) pair is never jointly
    /// excluded. When off, such gaps surface as errors at query time.
    pub strict_coverage: bool,
    /// Draw K ~ Binomial(K̃, 1 − n/(N+1)) instead of using `k`.
    pub binomial_k: Option<usize>,
}

impl Default for MPConfig {
    fn default() -> Self {
        MPConfig {
            n: None,
            m: None,
            k: 10_000,
            seed: 0,
            alpha: 0.1,
            learner: LearnerSpec::default(),
            buffer_c: 5e-6,
            use_buffer: true,
            strict_coverage: true,
            binomial_k: None,
        }
    }
}

pub fn default_patch_size(total: usize) -> usize {
    ((total as f64).sqrt().ceil() as usize).clamp(1, total.saturating_sub(1).max(1))
}

impl MPConfig {
    /// Resolved (n, m) for a dataset of `n_obs` × `n_features`.
    pub fn patch_sizes(&self, n_obs: usize, n_features: usize) -> Result<(usize, usize)> {
        let n = self.n.unwrap_or_else(|| default_patch_size(n_obs));
        let m = self.m.unwrap_or_else(|| default_patch_size(n_features));
        if n == 0 || n >= n_obs {
            return Err(Error::InvalidSize(format!(
                "observation minipatch size n={n} must satisfy 1 <= n < N={n_obs}"
            )));
        }
        if m == 0 || m >= n_features {
            return Err(Error::InvalidSize(format!(
                "feature minipatch size m={m} must satisfy 1 <= m < M={n_features}"
            )));
        }
        Ok((n, m))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 && self.binomial_k.is_none() {
            return Err(Error::InvalidSize("K must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidSpec(format!("alpha={} not in (0,1)", self.alpha)));
        }
        if !(self.buffer_c >= 0.0) {
            return Err(Error::InvalidSpec("buffer constant c must be >= 0".into()));
        }
        match self.learner {
            LearnerSpec::Ridge { lambda } if !(lambda >= 0.0) => {
                Err(Error::InvalidSpec("ridge lambda must be >= 0".into()))
            }
            LearnerSpec::Tree { max_depth, min_leaf } if max_depth == 0 || min_leaf == 0 => {
                Err(Error::InvalidSpec("tree max_depth and min_leaf must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes_are_square_roots() {
        let cfg = MPConfig::default();
        assert_eq!(cfg.patch_sizes(500, 50).unwrap(), (23, 8));
        assert_eq!(cfg.patch_sizes(2000, 20).unwrap(), (45, 5));
        assert_eq!(cfg.patch_sizes(2, 2).unwrap(), (1, 1));
        assert_eq!(cfg.k, 10_000);
        assert_eq!(cfg.buffer_c, 5e-6);
    }

    #[test]
    fn rejects_bad_sizes() {
        let cfg = MPConfig {
            n: Some(5),
            ..MPConfig::default()
        };
        assert!(matches!(cfg.patch_sizes(5, 4), Err(Error::InvalidSize(_))));
        let cfg = MPConfig {
            alpha: 1.0,
            ..MPConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
