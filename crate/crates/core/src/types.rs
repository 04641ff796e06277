//! Domain types shared by the solvers.
//!
//! Feature matrices follow the column convention used throughout the crate:
//! view `v` is stored as a `d_v × N` matrix whose columns are samples. The
//! first `labeled_count` columns of every view are the labeled samples;
//! [`MultiViewDataset::permutation`] maps storage order back to the order the
//! data was supplied in.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums of a [`SimilarityGraph`] must be within this distance of one.
pub const ROW_SUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    /// One `d_v × N` matrix per view.
    pub views: Vec<DMatrix<f64>>,
    /// Ground-truth class of every sample in storage order. Only the first
    /// `labeled_count` entries are visible to the solvers.
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub labeled_count: usize,
    /// `permutation[storage_index] = original_index`.
    pub permutation: Vec<usize>,
}

impl MultiViewDataset {
    /// Builds a dataset and checks every invariant.
    pub fn new(
        views: Vec<DMatrix<f64>>,
        labels: Vec<usize>,
        class_count: usize,
        labeled_count: usize,
        permutation: Vec<usize>,
    ) -> Result<Self> {
        let ds = Self {
            views,
            labels,
            class_count,
            labeled_count,
            permutation,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n_samples(&self) -> usize {
        self.views.first().map_or(0, |v| v.ncols())
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn unlabeled_count(&self) -> usize {
        self.n_samples() - self.labeled_count
    }

    pub fn labeled_labels(&self) -> &[usize] {
        &self.labels[..self.labeled_count]
    }

    pub fn unlabeled_labels(&self) -> &[usize] {
        &self.labels[self.labeled_count..]
    }

    /// Returns normally iff every dataset invariant holds.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.views.first() else {
            return Err(Error::DimensionMismatch("dataset has no views".into()));
        };
        let n = first.ncols();
        for (v, view) in self.views.iter().enumerate() {
            if view.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "view {v} has {} samples, view 0 has {n}",
                    view.ncols()
                )));
            }
            if view.nrows() == 0 {
                return Err(Error::DimensionMismatch(format!(
                    "view {v} has no features"
                )));
            }
        }
        if self.labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {n} samples",
                self.labels.len()
            )));
        }
        if self.class_count < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {}",
                self.class_count
            )));
        }
        if self.labeled_count == 0 || self.labeled_count >= n {
            return Err(Error::InvalidConfig(format!(
                "labeled count {} must lie in 1..{n}",
                self.labeled_count
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= self.class_count) {
            return Err(Error::Index(format!(
                "label {bad} out of range for {} classes",
                self.class_count
            )));
        }
        let mut seen = vec![false; self.class_count];
        for &y in self.labeled_labels() {
            seen[y] = true;
        }
        if let Some(class) = seen.iter().position(|&s| !s) {
            return Err(Error::LabelCoverage { class });
        }
        check_permutation(&self.permutation, n)
    }

    /// Reorders per-sample values from storage order back to original order.
    pub fn to_original_order<T: Clone>(&self, storage: &[T]) -> Vec<T> {
        assert_eq!(storage.len(), self.permutation.len());
        let mut out = storage.to_vec();
        for (s, &o) in self.permutation.iter().enumerate() {
            out[o] = storage[s].clone();
        }
        out
    }

    /// One-hot indicator of the labeled block (`l × c`).
    pub fn labeled_indicator(&self) -> DMatrix<f64> {
        one_hot(self.labeled_labels(), self.class_count)
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Index(format!(
            "permutation has {} entries for {n} samples",
            perm.len()
        )));
    }
    let mut hit = vec![false; n];
    for &p in perm {
        if p >= n || hit[p] {
            return Err(Error::Index(format!(
                "permutation is not a bijection at {p}"
            )));
        }
        hit[p] = true;
    }
    Ok(())
}

/// Reorders raw data so that the samples selected by `labeled_mask` come
/// first. Relative order inside the labeled and unlabeled groups is kept.
pub fn permute_labeled_first(
    raw_views: &[DMatrix<f64>],
    raw_labels: &[usize],
    class_count: usize,
    labeled_mask: &[bool],
) -> Result<MultiViewDataset> {
    if labeled_mask.len() != raw_labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "mask has {} entries for {} labels",
            labeled_mask.len(),
            raw_labels.len()
        )));
    }
    let permutation: Vec<usize> = (0..labeled_mask.len())
        .filter(|&i| labeled_mask[i])
        .chain((0..labeled_mask.len()).filter(|&i| !labeled_mask[i]))
        .collect();
    let labeled_count = labeled_mask.iter().filter(|&&m| m).count();
    let views = raw_views
        .iter()
        .enumerate()
        .map(|(v, x)| {
            if x.ncols() != labeled_mask.len() {
                return Err(Error::DimensionMismatch(format!(
                    "view {v} has {} samples, mask has {}",
                    x.ncols(),
                    labeled_mask.len()
                )));
            }
            Ok(x.select_columns(&permutation))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = permutation.iter().map(|&i| raw_labels[i]).collect();
    MultiViewDataset::new(views, labels, class_count, labeled_count, permutation)
}

/// `y_ij = 1` iff sample `i` belongs to class `j`.
pub fn one_hot(labels: &[usize], class_count: usize) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(labels.len(), class_count);
    for (i, &c) in labels.iter().enumerate() {
        y[(i, c)] = 1.0;
    }
    y
}

/// Row-stochastic similarity matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub weights: DMatrix<f64>,
    pub neighbor_count_hint: usize,
}

impl SimilarityGraph {
    /// Uniform off-diagonal rows `1/(N-1)`.
    pub fn uniform(n: usize, neighbor_count_hint: usize) -> Self {
        assert!(n >= 2, "a similarity graph needs at least two nodes");
        let w = 1.0 / (n - 1) as f64;
        let weights = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w });
        Self {
            weights,
            neighbor_count_hint,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let s = &self.weights;
        if !s.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "similarity is {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        for i in 0..s.nrows() {
            if s[(i, i)] != 0.0 {
                return Err(Error::InvalidConfig(format!("nonzero diagonal at {i}")));
            }
            let row = s.row(i);
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::InvalidConfig(format!("row {i} leaves [0, 1]")));
            }
            let sum = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidConfig(format!("row {i} sums to {sum}")));
            }
        }
        Ok(())
    }

    /// Number of strictly positive entries in row `i`.
    pub fn row_support(&self, i: usize) -> usize {
        self.weights.row(i).iter().filter(|&&x| x > 0.0).count()
    }
}

/// Graph Laplacian `L = D - A` of the symmetrized affinity `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub matrix: DMatrix<f64>,
    /// The symmetric affinity the Laplacian was assembled from.
    pub affinity: DMatrix<f64>,
}

impl Laplacian {
    pub fn n_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    /// `Tr(Mᵀ L M)` for an `N × p` matrix `M`.
    pub fn quadratic_form(&self, m: &DMatrix<f64>) -> f64 {
        (&self.matrix * m).component_mul(m).sum()
    }

    /// `Tr(M L Mᵀ)` for a `p × N` matrix `M`.
    pub fn quadratic_form_rows(&self, m: &DMatrix<f64>) -> f64 {
        (m * &self.matrix).component_mul(m).sum()
    }
}

/// View-specific factors `W^v` (`d_v × r`) and shared representation `H` (`r × N`).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    pub view_factors: Vec<DMatrix<f64>>,
    pub shared: DMatrix<f64>,
    pub latent_dim: usize,
}

impl LatentModel {
    /// `Σ_v ‖X^v − W^v H‖²_F`.
    pub fn reconstruction_error(&self, views: &[DMatrix<f64>]) -> f64 {
        views
            .iter()
            .zip(&self.view_factors)
            .map(|(x, w)| (x - w * &self.shared).norm_squared())
            .sum()
    }
}

/// Label score matrix `F = [Y_l; F_u]` (`N × c`).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelIndicator {
    pub scores: DMatrix<f64>,
    pub labeled_count: usize,
}

impl LabelIndicator {
    /// `[Y_l; 0]`, the initial state of the alternating solver.
    pub fn clamped_zero(labeled: &DMatrix<f64>, n: usize) -> Self {
        let mut scores = DMatrix::zeros(n, labeled.ncols());
        scores.rows_mut(0, labeled.nrows()).copy_from(labeled);
        Self {
            scores,
            labeled_count: labeled.nrows(),
        }
    }

    pub fn unlabeled_scores(&self) -> DMatrix<f64> {
        let n = self.scores.nrows();
        self.scores
            .rows(self.labeled_count, n - self.labeled_count)
            .into_owned()
    }
}

/// Hyperparameters of the alternating solver. `alpha` is derived from
/// `neighbor_count` at every iteration and is not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmsscConfig {
    pub beta: f64,
    pub gamma: f64,
    pub latent_dim: usize,
    pub neighbor_count: usize,
    pub max_iters: usize,
    pub f_rel_tol: f64,
    pub rng_seed: u64,
}

impl Default for LmsscConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            gamma: 0.01,
            latent_dim: 10,
            neighbor_count: 15,
            max_iters: 100,
            f_rel_tol: 1e-5,
            rng_seed: 0,
        }
    }
}

impl LmsscConfig {
    pub fn validate(&self, n_samples: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.latent_dim == 0 {
            return bad("latent dimension must be at least 1".into());
        }
        if self.neighbor_count == 0 || self.neighbor_count + 1 >= n_samples {
            return bad(format!(
                "neighbor count {} must lie in 1..={} for {n_samples} samples",
                self.neighbor_count,
                n_samples.saturating_sub(2)
            ));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.f_rel_tol > 0.0) {
            return bad(format!(
                "f_rel_tol must be positive, got {}",
                self.f_rel_tol
            ));
        }
        Ok(())
    }
}
