//! Minipatch sampling, parallel training, the prediction cache and the
//! leave-one-out / leave-one-covariate-out aggregations.
//!
//! After training, every model's prediction at every training row is cached,
//! so all LOO and LOO+LOCO queries are averages over cached values selected by
//! membership bitsets; no model is refit during inference. The cache holds
//! K·N·d doubles (8·K·N·d bytes).

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{ArrayView1, Axis};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::bits::BitSet;
use crate::config::MPConfig;
use crate::data::{Dataset, Prediction};
use crate::error::{Error, Result};
use crate::learners::{self, FittedModel};
use crate::par;
use crate::rng::{derive_seed, stream_rng};

/// One minipatch: sorted observation indices and sorted feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Minipatch {
    pub rows: Vec<usize>,
    pub features: Vec<usize>,
}

impl Minipatch {
    pub fn new(mut rows: Vec<usize>, mut features: Vec<usize>) -> Self {
        rows.sort_unstable();
        features.sort_unstable();
        Minipatch { rows, features }
    }

    pub fn has_row(&self, i: usize) -> bool {
        self.rows.binary_search(&i).is_ok()
    }

    pub fn has_feature(&self, j: usize) -> bool {
        self.features.binary_search(&j).is_ok()
    }
}

/// Draw `k` independent minipatches: n rows and m features each, uniformly
/// without replacement within a patch. Patches may repeat across k.
pub fn sample_minipatches(
    n_obs: usize,
    n_features: usize,
    n: usize,
    m: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<Minipatch>> {
    if n == 0 || n >= n_obs {
        return Err(Error::InvalidSize(format!("need 1 <= n < N, got n={n}, N={n_obs}")));
    }
    if m == 0 || m >= n_features {
        return Err(Error::InvalidSize(format!("need 1 <= m < M, got m={m}, M={n_features}")));
    }
    if k == 0 {
        return Err(Error::InvalidSize("K must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, 0);
    Ok((0..k)
        .map(|_| {
            let rows = index::sample(&mut rng, n_obs, n).into_vec();
            let features = index::sample(&mut rng, n_features, m).into_vec();
            Minipatch::new(rows, features)
        })
        .collect())
}

/// K ~ Binomial(K̃, 1 − n/(N+1)).
pub fn sample_k_binomial(k_tilde: usize, n: usize, n_obs: usize, seed: u64) -> Result<usize> {
    use rand_distr::{Binomial, Distribution};
    if k_tilde == 0 || n == 0 || n > n_obs {
        return Err(Error::InvalidSize(format!(
            "need K~ >= 1 and 1 <= n <= N, got K~={k_tilde}, n={n}, N={n_obs}"
        )));
    }
    let p = 1.0 - n as f64 / (n_obs as f64 + 1.0);
    let dist = Binomial::new(k_tilde as u64, p).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    Ok(dist.sample(&mut stream_rng(seed, 0)) as usize)
}

/// Fit one model on each patch, in parallel. Output order follows `patches`.
pub fn fit_patches(dataset: &Dataset, config: &MPConfig, patches: &[Minipatch]) -> Result<Vec<FittedModel>> {
    let n_obs = dataset.n_obs();
    let n_features = dataset.n_features();
    for p in patches {
        if p.rows.iter().any(|&i| i >= n_obs) || p.features.iter().any(|&j| j >= n_features) {
            return Err(Error::InvalidSize("minipatch index out of range".into()));
        }
    }
    par::try_map_indexed(patches.len(), |k| {
        let p = &patches[k];
        let x = dataset.x.select(Axis(0), &p.rows).select(Axis(1), &p.features);
        let y = dataset.y.subset(&p.rows);
        learners::fit(&config.learner, x.view(), y.as_targets())
    })
}

/// The fitted minipatch ensemble with its prediction cache.
#[derive(Debug, Clone)]
pub struct Ensemble {
    dataset: Arc<Dataset>,
    config: MPConfig,
    n: usize,
    m: usize,
    d: usize,
    patches: Vec<Minipatch>,
    models: Vec<FittedModel>,
    /// Row-major `[i][k][c]`: prediction of model k at training row i.
    cache: Vec<f64>,
    /// `row_excluded[i]` has bit k set iff i ∉ I_k.
    row_excluded: Vec<BitSet>,
    /// `feature_excluded[j]` has bit k set iff j ∉ F_k.
    feature_excluded: Vec<BitSet>,
}

/// Train an ensemble with patches drawn from `config.seed`.
pub fn train_ensemble(dataset: impl Into<Arc<Dataset>>, config: &MPConfig) -> Result<Ensemble> {
    let dataset = dataset.into();
    config.validate()?;
    let (n, m) = config.patch_sizes(dataset.n_obs(), dataset.n_features())?;
    let k = match config.binomial_k {
        Some(k_tilde) => sample_k_binomial(k_tilde, n, dataset.n_obs(), derive_seed(config.seed, 1))?,
        None => config.k,
    };
    let patches = sample_minipatches(dataset.n_obs(), dataset.n_features(), n, m, k, config.seed)?;
    Ensemble::from_patches(dataset, config, patches)
}

impl Ensemble {
    /// Build an ensemble over an explicit patch list (e.g. a full enumeration).
    pub fn from_patches(
        dataset: impl Into<Arc<Dataset>>,
        config: &MPConfig,
        patches: Vec<Minipatch>,
    ) -> Result<Ensemble> {
        let dataset = dataset.into();
        if patches.is_empty() {
            return Err(Error::InvalidSize("K must be at least 1".into()));
        }
        let n = patches[0].rows.len();
        let m = patches[0].features.len();
        let models = fit_patches(&dataset, config, &patches)?;
        let cache = build_cache(&dataset, &patches, &models);
        Self::assemble(dataset, config.clone(), n, m, patches, models, cache)
    }

    fn assemble(
        dataset: Arc<Dataset>,
        config: MPConfig,
        n: usize,
        m: usize,
        patches: Vec<Minipatch>,
        models: Vec<FittedModel>,
        cache: Vec<f64>,
    ) -> Result<Ensemble> {
        let (n_obs, n_features, k) = (dataset.n_obs(), dataset.n_features(), patches.len());
        let mut row_excluded: Vec<BitSet> = (0..n_obs).map(|_| BitSet::new(k)).collect();
        let mut feature_excluded: Vec<BitSet> = (0..n_features).map(|_| BitSet::new(k)).collect();
        for (idx, p) in patches.iter().enumerate() {
            for (i, set) in row_excluded.iter_mut().enumerate() {
                if !p.has_row(i) {
                    set.insert(idx);
                }
            }
            for (j, set) in feature_excluded.iter_mut().enumerate() {
                if !p.has_feature(j) {
                    set.insert(idx);
                }
            }
        }
        let ens = Ensemble {
            d: dataset.output_dim(),
            dataset,
            config,
            n,
            m,
            patches,
            models,
            cache,
            row_excluded,
            feature_excluded,
        };
        if ens.config.strict_coverage {
            ens.check_coverage()?;
        }
        Ok(ens)
    }

    /// Every row must be excluded by some patch, and every (row, feature)
    /// pair jointly excluded by some patch.
    pub fn check_coverage(&self) -> Result<()> {
        let failures = par::map_indexed(self.n_obs(), |i| {
            let rows = &self.row_excluded[i];
            if rows.count() == 0 {
                return Some(Error::coverage(i));
            }
            (0..self.n_features())
                .find(|&j| rows.count_and(&self.feature_excluded[j]) == 0)
                .map(|j| Error::coverage_pair(i, j))
        });
        match failures.into_iter().flatten().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn dataset_arc(&self) -> Arc<Dataset> {
        Arc::clone(&self.dataset)
    }

    pub fn config(&self) -> &MPConfig {
        &self.config
    }

    /// Observation minipatch size n.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Feature minipatch size m.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.patches.len()
    }

    pub fn n_obs(&self) -> usize {
        self.dataset.n_obs()
    }

    pub fn n_features(&self) -> usize {
        self.dataset.n_features()
    }

    pub fn output_dim(&self) -> usize {
        self.d
    }

    pub fn patches(&self) -> &[Minipatch] {
        &self.patches
    }

    pub fn models(&self) -> &[FittedModel] {
        &self.models
    }

    /// Cached μ̂_k(X_i).
    pub fn cached(&self, k: usize, i: usize) -> &[f64] {
        let start = (i * self.k() + k) * self.d;
        &self.cache[start..start + self.d]
    }

    pub fn row_excluded(&self, i: usize) -> &BitSet {
        &self.row_excluded[i]
    }

    pub fn feature_excluded(&self, j: usize) -> &BitSet {
        &self.feature_excluded[j]
    }

    /// Patches with i ∉ I_k, ascending.
    pub fn excluding_row(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_excluded[i].ones()
    }

    fn mean_cached(&self, i: usize, ks: impl Iterator<Item = usize>, out: &mut [f64]) -> usize {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut count = 0;
        for k in ks {
            for (o, v) in out.iter_mut().zip(self.cached(k, i)) {
                *o += v;
            }
            count += 1;
        }
        if count > 0 {
            out.iter_mut().for_each(|v| *v /= count as f64);
        }
        count
    }

    /// μ̂_{−i}(X_i): mean of cached predictions over patches excluding row i.
    pub fn loo_prediction(&self, i: usize) -> Result<Prediction> {
        let mut out = vec![0.0; self.d];
        self.loo_into(i, &mut out)?;
        Ok(Prediction(out))
    }

    pub(crate) fn loo_into(&self, i: usize, out: &mut [f64]) -> Result<()> {
        self.check_row(i)?;
        match self.mean_cached(i, self.row_excluded[i].ones(), out) {
            0 => Err(Error::coverage(i)),
            _ => Ok(()),
        }
    }

    /// μ̂_{−i}^{−j}(X_i): mean over patches excluding both row i and feature j.
    pub fn loo_loco_prediction(&self, i: usize, j: usize) -> Result<Prediction> {
        let mut out = vec![0.0; self.d];
        self.loo_loco_into(i, j, &mut out)?;
        Ok(Prediction(out))
    }

    pub(crate) fn loo_loco_into(&self, i: usize, j: usize, out: &mut [f64]) -> Result<()> {
        self.check_row(i)?;
        self.check_feature(j)?;
        let ks = self.row_excluded[i].and_ones(&self.feature_excluded[j]);
        match self.mean_cached(i, ks, out) {
            0 => Err(Error::coverage_pair(i, j)),
            _ => Ok(()),
        }
    }

    /// Predictions of every model at a new point, `[k][c]` row-major.
    pub fn model_predictions(&self, x_new: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        if x_new.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x_new.len(),
            });
        }
        if let Some(col) = x_new.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: 0, col });
        }
        let d = self.d;
        let per_model = par::map_indexed(self.k(), |k| {
            let mut out = vec![0.0; d];
            let feats = &self.patches[k].features;
            self.models[k].predict_with(|s| x_new[feats[s]], &mut out);
            out
        });
        Ok(per_model.concat())
    }

    /// μ̂_{−i}(x_new).
    pub fn loo_prediction_new(&self, i: usize, x_new: ArrayView1<'_, f64>) -> Result<Prediction> {
        self.check_row(i)?;
        let preds = self.model_predictions(x_new)?;
        let mut out = vec![0.0; self.d];
        match mean_rows(&preds, self.d, self.row_excluded[i].ones(), &mut out) {
            0 => Err(Error::coverage(i)),
            _ => Ok(Prediction(out)),
        }
    }

    /// μ̂_{−i}(x_new) for every training row i, sharing one pass over the
    /// models.
    pub fn loo_predictions_new(&self, x_new: ArrayView1<'_, f64>) -> Result<Vec<Prediction>> {
        let preds = self.model_predictions(x_new)?;
        par::try_map_indexed(self.n_obs(), |i| {
            let mut out = vec![0.0; self.d];
            match mean_rows(&preds, self.d, self.row_excluded[i].ones(), &mut out) {
                0 => Err(Error::coverage(i)),
                _ => Ok(Prediction(out)),
            }
        })
    }

    fn check_row(&self, i: usize) -> Result<()> {
        if i >= self.n_obs() {
            return Err(Error::InvalidSize(format!("row {i} out of range")));
        }
        Ok(())
    }

    fn check_feature(&self, j: usize) -> Result<()> {
        if j >= self.n_features() {
            return Err(Error::InvalidSize(format!("feature {j} out of range")));
        }
        Ok(())
    }
}

/// Mean of the `d`-wide rows of `preds` selected by `ks`; returns the count.
pub(crate) fn mean_rows(preds: &[f64], d: usize, ks: impl Iterator<Item = usize>, out: &mut [f64]) -> usize {
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut count = 0;
    for k in ks {
        for (o, v) in out.iter_mut().zip(&preds[k * d..(k + 1) * d]) {
            *o += v;
        }
        count += 1;
    }
    if count > 0 {
        out.iter_mut().for_each(|v| *v /= count as f64);
    }
    count
}

fn build_cache(dataset: &Dataset, patches: &[Minipatch], models: &[FittedModel]) -> Vec<f64> {
    let (n_obs, d, k_total) = (dataset.n_obs(), dataset.output_dim(), patches.len());
    // Rows are independent; each worker fills its own row block.
    let rows = par::map_indexed(n_obs, |i| {
        let x = dataset.x.row(i);
        let mut block = vec![0.0; k_total * d];
        for (k, (p, model)) in patches.iter().zip(models).enumerate() {
            model.predict_with(|s| x[p.features[s]], &mut block[k * d..(k + 1) * d]);
        }
        block
    });
    rows.concat()
}

const SNAPSHOT_MAGIC: &[u8; 6] = b"MPENS\0";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Snapshot {
    // Tagged enums need a self-describing format, so the config travels as JSON.
    config_json: String,
    n: usize,
    m: usize,
    dataset: Dataset,
    patches: Vec<Minipatch>,
    models: Vec<FittedModel>,
    cache: Vec<f64>,
}

impl Ensemble {
    /// Binary snapshot: 6-byte magic `MPENS\0`, little-endian u32 format
    /// version, then a bincode body holding the config, patch sizes, training
    /// data, patches, model parameters and the prediction cache. The format
    /// is tied to the crate version.
    pub fn write_snapshot(&self, mut w: impl Write) -> Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        let body = Snapshot {
            config_json: serde_json::to_string(&self.config)?,
            n: self.n,
            m: self.m,
            dataset: (*self.dataset).clone(),
            patches: self.patches.clone(),
            models: self.models.clone(),
            cache: self.cache.clone(),
        };
        bincode::serialize_into(w, &body).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn read_snapshot(mut r: impl Read) -> Result<Ensemble> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Serialization("not an ensemble snapshot".into()));
        }
        let mut version = [0u8; 4];
        r.read_exact(&mut version)?;
        let version = u32::from_le_bytes(version);
        if version != SNAPSHOT_VERSION {
            return Err(Error::Serialization(format!("unsupported snapshot version {version}")));
        }
        let s: Snapshot = bincode::deserialize_from(r).map_err(|e| Error::Serialization(e.to_string()))?;
        let config: MPConfig = serde_json::from_str(&s.config_json)?;
        Self::assemble(Arc::new(s.dataset), config, s.n, s.m, s.patches, s.models, s.cache)
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path.as_ref())?;
        let mut w = std::io::BufWriter::new(f);
        self.write_snapshot(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Ensemble> {
        let f = std::fs::File::open(path.as_ref())?;
        Self::read_snapshot(std::io::BufReader::new(f))
    }
}
