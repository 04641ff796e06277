//! Adaptive-neighbor similarity graphs.
//!
//! Each row of the graph is the Euclidean projection of a scaled negative
//! distance vector onto the probability simplex. The regularization weight
//! `alpha` is chosen from a target neighbor count `k` so that every row keeps
//! roughly `k` nonzero weights.

use nalgebra::DMatrix;
use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};
use crate::types::{Laplacian, SimilarityGraph};

/// Lower bound applied to a non-positive `alpha` before it reaches
/// [`update_similarity`].
pub const ALPHA_FLOOR: f64 = 1e-12;

/// Eigenvalues below this are counted as zero when cross-checking component
/// counts against the Laplacian spectrum.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceSource {
    Latent,
    Labels,
    Features,
    Combined,
}

/// Symmetric matrix of squared Euclidean distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDistances {
    pub matrix: DMatrix<f64>,
    pub source: DistanceSource,
}

impl PairwiseDistances {
    pub fn n_points(&self) -> usize {
        self.matrix.nrows()
    }

    /// `β·d^h + γ·d^f`.
    pub fn combine(latent: &Self, labels: &Self, beta: f64, gamma: f64) -> Self {
        assert_eq!(latent.matrix.shape(), labels.matrix.shape());
        Self {
            matrix: &latent.matrix * beta + &labels.matrix * gamma,
            source: DistanceSource::Combined,
        }
    }

    /// Off-diagonal entries of row `i`, in column order.
    fn off_diagonal_row(&self, i: usize) -> Vec<f64> {
        (0..self.n_points())
            .filter(|&j| j != i)
            .map(|j| self.matrix[(i, j)])
            .collect()
    }
}

/// Squared distances between the columns of `points`.
pub fn squared_distances(points: &DMatrix<f64>, source: DistanceSource) -> PairwiseDistances {
    let n = points.ncols();
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        let pi = points.column(i);
        for j in (i + 1)..n {
            let d: f64 = pi
                .iter()
                .zip(points.column(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            matrix[(i, j)] = d;
            matrix[(j, i)] = d;
        }
    }
    PairwiseDistances { matrix, source }
}

/// Squared distances between the rows of `points` (e.g. the `N × c` label
/// scores).
pub fn squared_row_distances(points: &DMatrix<f64>, source: DistanceSource) -> PairwiseDistances {
    squared_distances(&points.transpose(), source)
}

/// Regularization weight chosen from a neighbor count.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaEstimate {
    /// Mean of `per_point`; may be non-positive on degenerate inputs.
    pub mean: f64,
    /// Per-point upper bounds that give each row exactly `k` neighbors.
    pub per_point: Vec<f64>,
}

impl AlphaEstimate {
    pub fn is_degenerate(&self) -> bool {
        !(self.mean > 0.0)
    }

    /// The mean, floored at [`ALPHA_FLOOR`].
    pub fn clamped(&self) -> f64 {
        if self.mean.is_finite() && self.mean > ALPHA_FLOOR {
            self.mean
        } else {
            ALPHA_FLOOR
        }
    }
}

/// Largest `alpha_i` for which row `i` keeps `k` neighbors, and their mean.
///
/// `combined` holds `β d^h + γ d^f`. Each row is sorted ascending with the
/// self-distance excluded, so `d_{i,1}` is the nearest other point:
///
/// `alpha_i = (k/2 · d_{i,k+1} − 1/2 · Σ_{j≤k} d_ij) / (2β)`.
pub fn alpha_from_k(combined: &PairwiseDistances, k: usize, beta: f64) -> Result<AlphaEstimate> {
    let n = combined.n_points();
    if k == 0 || k + 2 > n {
        return Err(Error::InvalidConfig(format!(
            "neighbor count {k} must lie in 1..={} for {n} points",
            n.saturating_sub(2)
        )));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let kf = k as f64;
    let per_point: Vec<f64> = (0..n)
        .map(|i| {
            let mut row = combined.off_diagonal_row(i);
            row.sort_by(f64::total_cmp);
            let head: f64 = row[..k].iter().sum();
            (0.5 * kf * row[k] - 0.5 * head) / (2.0 * beta)
        })
        .collect();
    let mean = per_point.iter().sum::<f64>() / n as f64;
    Ok(AlphaEstimate { mean, per_point })
}

/// Euclidean projection of `v` onto `{s : Σ s = 1, s ≥ 0}`.
///
/// Coordinates whose shifted value is within rounding noise of the threshold
/// are set to exactly zero, so tied boundary coordinates do not leak into the
/// support.
pub fn project_row_to_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let scale = u[0].abs().max(u[u.len() - 1].abs()).max(1.0);
    let eps = 1e-12 * scale;
    let mut cumsum = 0.0;
    let mut theta = u[0] - 1.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > eps {
            theta = t;
        } else {
            break;
        }
    }
    v.iter()
        .map(|&x| {
            if x - theta > eps {
                (x - theta).min(1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Regularization weight used by [`update_similarity`].
#[derive(Debug, Clone, Copy)]
pub enum AlphaMode<'a> {
    Shared(f64),
    PerPoint(&'a [f64]),
}

impl AlphaMode<'_> {
    fn at(&self, i: usize) -> f64 {
        match self {
            AlphaMode::Shared(a) => *a,
            AlphaMode::PerPoint(a) => a[i],
        }
    }
}

/// Closed-form similarity update.
///
/// Row `i` minimizes `Σ_j β(d^h_ij s_ij / 2 + α s_ij²) + γ d^f_ij s_ij / 2`
/// over the simplex with `s_ii = 0`, i.e. the projection of
/// `−(β d^h_i + γ d^f_i) / (4αβ)`.
pub fn update_similarity(
    latent: &PairwiseDistances,
    labels: &PairwiseDistances,
    beta: f64,
    gamma: f64,
    alpha: AlphaMode<'_>,
    neighbor_count_hint: usize,
) -> Result<SimilarityGraph> {
    let n = latent.n_points();
    if labels.n_points() != n {
        return Err(Error::DimensionMismatch(format!(
            "latent distances are {n}x{n}, label distances {m}x{m}",
            m = labels.n_points()
        )));
    }
    if n < 2 {
        return Err(Error::DimensionMismatch("need at least two points".into()));
    }
    if !(beta > 0.0) || !(gamma >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "beta must be positive and gamma nonnegative, got {beta}, {gamma}"
        )));
    }
    if let AlphaMode::PerPoint(a) = alpha {
        if a.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} per-point alphas for {n} points",
                a.len()
            )));
        }
    }
    for i in 0..n {
        let a = alpha.at(i);
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::DegenerateDistances { alpha: a });
        }
    }

    let row = |i: usize| -> Vec<f64> {
        let scale = -1.0 / (4.0 * alpha.at(i) * beta);
        let target: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| scale * (beta * latent.matrix[(i, j)] + gamma * labels.matrix[(i, j)]))
            .collect();
        let mut projected = project_row_to_simplex(&target);
        projected.insert(i, 0.0);
        projected
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<f64>> = (0..n).map(row).collect();

    let weights = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    Ok(SimilarityGraph {
        weights,
        neighbor_count_hint,
    })
}

/// Laplacian of the symmetrized similarity `(S + Sᵀ)/2`.
pub fn laplacian(graph: &SimilarityGraph) -> Laplacian {
    laplacian_from_affinity(&graph.weights)
}

/// `diag(A·1) − A` with `A = (W + Wᵀ)/2`.
pub fn laplacian_from_affinity(weights: &DMatrix<f64>) -> Laplacian {
    let affinity = (weights + weights.transpose()) * 0.5;
    let mut matrix = -affinity.clone();
    for i in 0..affinity.nrows() {
        let degree: f64 = affinity.row(i).sum();
        matrix[(i, i)] += degree;
    }
    Laplacian { matrix, affinity }
}

/// Component id per node of the graph whose edges are the symmetrized
/// weights strictly above `weight_tol`. Ids are the smallest node index of
/// each component.
pub fn component_labels(weights: &DMatrix<f64>, weight_tol: f64) -> Vec<usize> {
    let n = weights.nrows();
    let mut uf = UnionFind::<usize>::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if 0.5 * (weights[(i, j)] + weights[(j, i)]) > weight_tol {
                uf.union(i, j);
            }
        }
    }
    let roots = uf.into_labeling();
    let mut smallest = vec![usize::MAX; n];
    for (i, &r) in roots.iter().enumerate() {
        smallest[r] = smallest[r].min(i);
    }
    roots.iter().map(|&r| smallest[r]).collect()
}

/// Number of connected components of the thresholded support graph.
pub fn connected_components(graph: &SimilarityGraph, weight_tol: f64) -> usize {
    count_components(&graph.weights, weight_tol)
}

pub fn count_components(weights: &DMatrix<f64>, weight_tol: f64) -> usize {
    let labels = component_labels(weights, weight_tol);
    labels.iter().enumerate().filter(|&(i, &c)| i == c).count()
}

/// Multiplicity of eigenvalues of `L` below `tol`.
pub fn zero_eigenvalue_multiplicity(lap: &Laplacian, tol: f64) -> usize {
    lap.matrix
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .filter(|&&ev| ev < tol)
        .count()
}
