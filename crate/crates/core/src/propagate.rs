//! Harmonic label propagation and the single-view GFHF baseline.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{component_labels, laplacian_from_affinity, squared_distances, DistanceSource};
use crate::types::{one_hot, LabelIndicator, Laplacian};

/// Ridge tried on `L_uu` when the plain solve fails.
pub const HARMONIC_RIDGE: f64 = 1e-8;

/// Partition of a Laplacian into labeled (`l`) and unlabeled (`u`) blocks.
#[derive(Debug, Clone)]
pub struct HarmonicBlocks {
    pub ll: DMatrix<f64>,
    pub lu: DMatrix<f64>,
    pub ul: DMatrix<f64>,
    pub uu: DMatrix<f64>,
}

impl HarmonicBlocks {
    pub fn split(lap: &Laplacian, labeled_count: usize) -> Self {
        let m = &lap.matrix;
        let l = labeled_count;
        let u = m.nrows() - l;
        Self {
            ll: m.view((0, 0), (l, l)).into_owned(),
            lu: m.view((0, l), (l, u)).into_owned(),
            ul: m.view((l, 0), (u, l)).into_owned(),
            uu: m.view((l, l), (u, u)).into_owned(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HarmonicSolution {
    pub labels: LabelIndicator,
    /// Ridge that had to be added to `L_uu`, if any.
    pub ridge: Option<f64>,
}

/// Solves `L_uu F_u = −L_ul Y_l` and returns `F = [Y_l; F_u]`.
///
/// Fails with [`Error::DisconnectedUnlabeled`] when some unlabeled node has no
/// path to a labeled node, since `L_uu` is singular exactly in that case.
pub fn harmonic_solve(lap: &Laplacian, labeled: &DMatrix<f64>) -> Result<HarmonicSolution> {
    let n = lap.n_nodes();
    let l = labeled.nrows();
    if l == 0 || l >= n {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= labeled < {n}, got {l}"
        )));
    }

    let comp = component_labels(&lap.affinity, 0.0);
    let mut anchored = vec![false; n];
    for &c in &comp[..l] {
        anchored[c] = true;
    }
    let stranded: Vec<usize> = (l..n).filter(|&i| !anchored[comp[i]]).collect();
    if !stranded.is_empty() {
        return Err(Error::DisconnectedUnlabeled { nodes: stranded });
    }

    let blocks = HarmonicBlocks::split(lap, l);
    let rhs = -(&blocks.ul * labeled);
    // L_uu is diagonally dominant, so LU is stable here; it also takes no
    // square roots, which keeps dyadic answers such as 1/2 exact.
    let solve = |m: DMatrix<f64>| {
        m.lu()
            .solve(&rhs)
            .filter(|x| x.iter().all(|v| v.is_finite()))
    };
    let (f_u, ridge) = match solve(blocks.uu.clone()) {
        Some(x) => (x, None),
        None => {
            let u = n - l;
            let mean_diag = blocks.uu.diagonal().sum() / u as f64;
            if HARMONIC_RIDGE > 1e-6 * mean_diag {
                return Err(Error::DisconnectedUnlabeled {
                    nodes: (l..n).collect(),
                });
            }
            let mut uu = blocks.uu.clone();
            for i in 0..u {
                uu[(i, i)] += HARMONIC_RIDGE;
            }
            let x = solve(uu)
                .ok_or_else(|| Error::SingularSystem("L_uu is singular after ridge".into()))?;
            (x, Some(HARMONIC_RIDGE))
        }
    };

    // Maximum principle: each column of F_u lies within the range of its
    // clamped values. Rounding can overshoot by an ulp; pull it back.
    let mut f_u = f_u;
    for (mut col, y) in f_u.column_iter_mut().zip(labeled.column_iter()) {
        let (lo, hi) = (y.min(), y.max());
        col.apply(|x| *x = x.clamp(lo, hi));
    }

    let mut scores = DMatrix::zeros(n, labeled.ncols());
    scores.rows_mut(0, l).copy_from(labeled);
    scores.rows_mut(l, n - l).copy_from(&f_u);
    Ok(HarmonicSolution {
        labels: LabelIndicator {
            scores,
            labeled_count: l,
        },
        ridge,
    })
}

/// Index of the largest entry of each row; ties go to the smallest index.
pub fn argmax_rows(scores: &DMatrix<f64>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Class decisions for the unlabeled rows of `F`.
pub fn decide(f: &LabelIndicator) -> Vec<usize> {
    argmax_rows(&f.unlabeled_scores())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnRule {
    /// Edge `i–j` when either endpoint lists the other among its `k` nearest.
    Union,
    /// Edge `i–j` only when both endpoints list each other.
    Mutual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// Median distance over the retained k-NN edges.
    Median,
    Fixed(f64),
}

/// Construction of a fixed k-NN graph with Gaussian weights
/// `exp(−‖x_i − x_j‖² / (2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnGraphConfig {
    pub k: usize,
    pub rule: KnnRule,
    pub bandwidth: Bandwidth,
}

impl Default for KnnGraphConfig {
    fn default() -> Self {
        Self {
            k: 15,
            rule: KnnRule::Union,
            bandwidth: Bandwidth::Median,
        }
    }
}

/// Symmetric Gaussian k-NN affinity over the columns of `points`.
pub fn knn_gaussian_affinity(points: &DMatrix<f64>, cfg: &KnnGraphConfig) -> Result<DMatrix<f64>> {
    let n = points.ncols();
    if cfg.k == 0 || cfg.k >= n {
        return Err(Error::InvalidConfig(format!(
            "k = {} must lie in 1..{n}",
            cfg.k
        )));
    }
    let d2 = squared_distances(points, DistanceSource::Features).matrix;
    let mut listed = DMatrix::from_element(n, n, false);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        // Stable: ties resolved by index.
        order.sort_by(|&a, &b| d2[(i, a)].total_cmp(&d2[(i, b)]));
        for &j in &order[..cfg.k] {
            listed[(i, j)] = true;
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let keep = match cfg.rule {
                KnnRule::Union => listed[(i, j)] || listed[(j, i)],
                KnnRule::Mutual => listed[(i, j)] && listed[(j, i)],
            };
            if keep {
                edges.push((i, j));
            }
        }
    }
    let sigma = match cfg.bandwidth {
        Bandwidth::Fixed(s) => s,
        Bandwidth::Median => {
            let mut dist: Vec<f64> = edges.iter().map(|&(i, j)| d2[(i, j)].sqrt()).collect();
            median(&mut dist).unwrap_or(0.0)
        }
    };
    let mut w = DMatrix::zeros(n, n);
    for (i, j) in edges {
        let weight = if sigma > 0.0 {
            (-d2[(i, j)] / (2.0 * sigma * sigma)).exp()
        } else {
            1.0
        };
        w[(i, j)] = weight;
        w[(j, i)] = weight;
    }
    Ok(w)
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

#[derive(Debug, Clone)]
pub struct GfhfOutput {
    pub affinity: DMatrix<f64>,
    pub solution: HarmonicSolution,
    /// Decisions for the unlabeled samples, in storage order.
    pub predictions: Vec<usize>,
}

/// Gaussian fields and harmonic functions on a single view: fixed k-NN graph,
/// harmonic solve, argmax decision.
pub fn gfhf_baseline(
    view: &DMatrix<f64>,
    labeled_labels: &[usize],
    class_count: usize,
    graph: &KnnGraphConfig,
) -> Result<GfhfOutput> {
    let affinity = knn_gaussian_affinity(view, graph)?;
    let lap = laplacian_from_affinity(&affinity);
    let solution = harmonic_solve(&lap, &one_hot(labeled_labels, class_count))?;
    let predictions = decide(&solution.labels);
    Ok(GfhfOutput {
        affinity,
        solution,
        predictions,
    })
}
