use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::Targets;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(Vec<f64>),
    /// Go left when `x[slot] <= threshold`.
    Split {
        slot: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary CART tree stored as a flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub feature_slots: usize,
}

impl TreeModel {
    pub fn output_dim(&self) -> usize {
        self.nodes
            .iter()
            .find_map(|n| match n {
                Node::Leaf(v) => Some(v.len()),
                Node::Split { .. } => None,
            })
            .unwrap_or(1)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub(crate) fn predict_with(&self, feature: impl Fn(usize) -> f64, out: &mut [f64]) {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf(v) => {
                    out.copy_from_slice(v);
                    return;
                }
                Node::Split {
                    slot,
                    threshold,
                    left,
                    right,
                } => idx = if feature(*slot) <= *threshold { *left } else { *right },
            }
        }
    }
}

/// Candidate split found for one node.
struct Split {
    slot: usize,
    threshold: f64,
    score: f64,
}

/// Fit a CART tree. Regression splits minimize the summed child SSE and
/// leaves predict the mean; classification splits minimize the
/// size-weighted Gini impurity and leaves predict class frequencies.
/// Thresholds are midpoints between consecutive distinct values; ties go to
/// the lowest slot, then the lowest threshold.
pub fn fit_decision_tree(x: ArrayView2<'_, f64>, y: Targets<'_>, params: TreeParams) -> Result<TreeModel> {
    let n = x.nrows();
    if n == 0 || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if params.max_depth == 0 || params.min_leaf == 0 {
        return Err(Error::InvalidSpec("tree max_depth and min_leaf must be >= 1".into()));
    }
    super::record_fit();
    let mut builder = Builder {
        x,
        y,
        params,
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..n).collect();
    builder.grow(rows, 0);
    Ok(TreeModel {
        nodes: builder.nodes,
        feature_slots: x.ncols(),
    })
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: Targets<'a>,
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(Vec::new()));
        let split = if depth < self.params.max_depth && rows.len() >= 2 * self.params.min_leaf {
            self.best_split(&rows)
        } else {
            None
        };
        match split {
            Some(s) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| self.x[[i, s.slot]] <= s.threshold);
                let left = self.grow(left_rows, depth + 1);
                let right = self.grow(right_rows, depth + 1);
                self.nodes[id] = Node::Split {
                    slot: s.slot,
                    threshold: s.threshold,
                    left,
                    right,
                };
            }
            None => self.nodes[id] = Node::Leaf(self.leaf_value(&rows)),
        }
        id
    }

    fn leaf_value(&self, rows: &[usize]) -> Vec<f64> {
        match self.y {
            Targets::Real(y) => {
                let mut vals: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
                // Sum in sorted order so the mean does not depend on row order.
                vals.sort_by(f64::total_cmp);
                vec![vals.iter().sum::<f64>() / vals.len() as f64]
            }
            Targets::Class { labels, n_classes } => {
                let mut freq = vec![0.0; n_classes];
                for &i in rows {
                    freq[labels[i]] += 1.0;
                }
                let total = rows.len() as f64;
                freq.iter_mut().for_each(|f| *f /= total);
                freq
            }
        }
    }

    fn best_split(&self, rows: &[usize]) -> Option<Split> {
        let parent = self.impurity_of(rows);
        if parent <= 0.0 {
            return None;
        }
        let tol = 1e-12 * parent.max(1.0);
        let mut best: Option<Split> = None;
        for slot in 0..self.x.ncols() {
            if let Some(candidate) = self.best_split_on(rows, slot) {
                let better = match &best {
                    None => true,
                    Some(b) => candidate.score < b.score - tol,
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        best.filter(|b| b.score < parent - tol)
    }

    fn impurity_of(&self, rows: &[usize]) -> f64 {
        match self.y {
            Targets::Real(y) => {
                let mut vals: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
                vals.sort_by(f64::total_cmp);
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                vals.iter().map(|v| (v - mean).powi(2)).sum()
            }
            Targets::Class { labels, n_classes } => {
                let mut counts = vec![0.0; n_classes];
                for &i in rows {
                    counts[labels[i]] += 1.0;
                }
                weighted_gini(&counts, rows.len() as f64)
            }
        }
    }

    fn best_split_on(&self, rows: &[usize], slot: usize) -> Option<Split> {
        let min_leaf = self.params.min_leaf;
        let total = rows.len();
        let response = |i: usize| match self.y {
            Targets::Real(y) => y[i],
            Targets::Class { labels, .. } => labels[i] as f64,
        };
        let mut order: Vec<(f64, f64, usize)> =
            rows.iter().map(|&i| (self.x[[i, slot]], response(i), i)).collect();
        // Sorting on (value, response) fixes the summation order independent
        // of the input row order.
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

        let mut best: Option<Split> = None;
        let mut consider = |pos: usize, score: f64| {
            let threshold = 0.5 * (order[pos - 1].0 + order[pos].0);
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(Split { slot, threshold, score });
            }
        };
        match self.y {
            Targets::Real(_) => {
                let (mut sum_l, mut sq_l) = (0.0, 0.0);
                let sum_t: f64 = order.iter().map(|o| o.1).sum();
                let sq_t: f64 = order.iter().map(|o| o.1 * o.1).sum();
                for pos in 1..total {
                    let v = order[pos - 1].1;
                    sum_l += v;
                    sq_l += v * v;
                    if pos < min_leaf || total - pos < min_leaf || order[pos - 1].0 == order[pos].0 {
                        continue;
                    }
                    let (nl, nr) = (pos as f64, (total - pos) as f64);
                    let sse_l = (sq_l - sum_l * sum_l / nl).max(0.0);
                    let (sum_r, sq_r) = (sum_t - sum_l, sq_t - sq_l);
                    let sse_r = (sq_r - sum_r * sum_r / nr).max(0.0);
                    consider(pos, sse_l + sse_r);
                }
            }
            Targets::Class { labels, n_classes } => {
                let mut left = vec![0.0; n_classes];
                let mut right = vec![0.0; n_classes];
                for &(_, _, i) in &order {
                    right[labels[i]] += 1.0;
                }
                for pos in 1..total {
                    let c = labels[order[pos - 1].2];
                    left[c] += 1.0;
                    right[c] -= 1.0;
                    if pos < min_leaf || total - pos < min_leaf || order[pos - 1].0 == order[pos].0 {
                        continue;
                    }
                    let score = weighted_gini(&left, pos as f64) + weighted_gini(&right, (total - pos) as f64);
                    consider(pos, score);
                }
            }
        }
        best
    }
}

/// size × Gini impurity.
fn weighted_gini(counts: &[f64], size: f64) -> f64 {
    if size == 0.0 {
        return 0.0;
    }
    size - counts.iter().map(|c| c * c).sum::<f64>() / size
}
