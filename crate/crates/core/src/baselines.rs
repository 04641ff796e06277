//! Multi-view comparison methods: auto-weighted multiple graph learning
//! (AMGL) and multi-view learning with adaptive neighbors (MLAN).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    alpha_from_k, laplacian, laplacian_from_affinity, squared_distances, squared_row_distances,
    update_similarity, AlphaMode, DistanceSource, PairwiseDistances,
};
use crate::propagate::{decide, harmonic_solve, knn_gaussian_affinity, KnnGraphConfig};
use crate::types::{LabelIndicator, Laplacian, LmsscConfig, MultiViewDataset, SimilarityGraph};

/// Floor applied inside the square roots of the weight updates.
pub const WEIGHT_GUARD: f64 = 1e-12;

/// One positive weight per view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewWeights(pub Vec<f64>);

impl ViewWeights {
    pub fn uniform(n_views: usize, value: f64) -> Self {
        Self(vec![value; n_views])
    }

    pub fn check(&self) -> Result<()> {
        match self.0.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            Some(v) => Err(Error::InvalidConfig(format!(
                "view weight {v} is {}",
                self.0[v]
            ))),
            None => Ok(()),
        }
    }

    /// Index of the smallest weight.
    pub fn argmin(&self) -> usize {
        (0..self.0.len())
            .min_by(|&a, &b| self.0[a].total_cmp(&self.0[b]))
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct BaselineFit {
    pub labels: LabelIndicator,
    /// Decisions for the unlabeled samples in storage order.
    pub predictions: Vec<usize>,
    pub weights: ViewWeights,
    /// Final combined graph: the weighted Laplacian for AMGL, the learned
    /// similarity for MLAN.
    pub laplacian: Laplacian,
    pub graph: Option<SimilarityGraph>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationControl {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for IterationControl {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-5,
        }
    }
}

fn relative_change(new: &DMatrix<f64>, old: &DMatrix<f64>) -> f64 {
    (new - old).norm() / old.norm().max(1.0)
}

/// AMGL: fixed per-view k-NN graphs, harmonic solve on `Σ_v w^v L^v`, and
/// `w^v = 1 / (2 √Tr(Fᵀ L^v F))`.
pub fn amgl_fit(
    dataset: &MultiViewDataset,
    graph_cfg: &KnnGraphConfig,
    control: IterationControl,
) -> Result<BaselineFit> {
    dataset.validate()?;
    let y_l = dataset.labeled_indicator();
    let affinities = dataset
        .views
        .iter()
        .enumerate()
        .map(|(v, x)| {
            knn_gaussian_affinity(x, graph_cfg).map_err(|e| e.context(format!("view {v}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let laplacians: Vec<Laplacian> = affinities.iter().map(laplacian_from_affinity).collect();

    let n = dataset.n_samples();
    let mut weights = ViewWeights::uniform(dataset.n_views(), 1.0);
    let mut labels = LabelIndicator::clamped_zero(&y_l, n);
    let mut combined = laplacians[0].clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < control.max_iters.max(1) {
        iterations += 1;
        let mut affinity = DMatrix::zeros(n, n);
        for (w, a) in weights.0.iter().zip(&affinities) {
            affinity += a * *w;
        }
        combined = laplacian_from_affinity(&affinity);
        let solved = harmonic_solve(&combined, &y_l)
            .map_err(|e| e.context(format!("amgl iteration {iterations}")))?;
        let change = relative_change(&solved.labels.scores, &labels.scores);
        labels = solved.labels;
        weights = ViewWeights(
            laplacians
                .iter()
                .map(|lap| {
                    1.0 / (2.0
                        * lap
                            .quadratic_form(&labels.scores)
                            .max(0.0)
                            .sqrt()
                            .max(WEIGHT_GUARD))
                })
                .collect(),
        );
        if change < control.tol {
            converged = true;
            break;
        }
    }
    let predictions = decide(&labels);
    Ok(BaselineFit {
        labels,
        predictions,
        weights,
        laplacian: combined,
        graph: None,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlanConfig {
    pub neighbor_count: usize,
    /// Weight of the label-smoothness term in the graph update.
    pub gamma: f64,
    pub control: IterationControl,
}

impl Default for MlanConfig {
    fn default() -> Self {
        Self {
            neighbor_count: 15,
            gamma: LmsscConfig::default().gamma,
            control: IterationControl::default(),
        }
    }
}

/// MLAN: the adaptive-neighbor graph is learned on the weighted raw-feature
/// distances `Σ_v w^v d^{x,v}` plus `γ d^f`, with
/// `w^v = 1 / (2 √(Σ_ij d^{x,v}_ij s_ij))`, and labels come from the
/// harmonic solve on that graph.
pub fn mlan_fit(dataset: &MultiViewDataset, cfg: &MlanConfig) -> Result<BaselineFit> {
    dataset.validate()?;
    let n = dataset.n_samples();
    let k = cfg.neighbor_count;
    if k == 0 || k + 1 >= n {
        return Err(Error::InvalidConfig(format!(
            "neighbor count {k} out of range for {n} samples"
        )));
    }
    let y_l = dataset.labeled_indicator();
    let view_dist: Vec<PairwiseDistances> = dataset
        .views
        .iter()
        .map(|x| squared_distances(x, DistanceSource::Features))
        .collect();

    let v_count = dataset.n_views();
    let mut weights = ViewWeights::uniform(v_count, 1.0 / v_count as f64);
    let mut labels = LabelIndicator::clamped_zero(&y_l, n);
    let mut graph = SimilarityGraph::uniform(n, k);
    let mut lap = laplacian(&graph);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.control.max_iters.max(1) {
        iterations += 1;
        let ctx = |e: Error| e.context(format!("mlan iteration {iterations}"));
        let mut combined = DMatrix::zeros(n, n);
        for (w, d) in weights.0.iter().zip(&view_dist) {
            combined += &d.matrix * *w;
        }
        let dx = PairwiseDistances {
            matrix: combined,
            source: DistanceSource::Features,
        };
        let df = squared_row_distances(&labels.scores, DistanceSource::Labels);
        let alpha = alpha_from_k(
            &PairwiseDistances::combine(&dx, &df, 1.0, cfg.gamma),
            k,
            1.0,
        )
        .map_err(ctx)?
        .clamped();
        graph = update_similarity(&dx, &df, 1.0, cfg.gamma, AlphaMode::Shared(alpha), k)
            .map_err(ctx)?;

        weights = ViewWeights(
            view_dist
                .iter()
                .map(|d| {
                    let spread = d.matrix.component_mul(&graph.weights).sum();
                    1.0 / (2.0 * spread.max(WEIGHT_GUARD).sqrt())
                })
                .collect(),
        );

        lap = laplacian(&graph);
        let solved = harmonic_solve(&lap, &y_l).map_err(ctx)?;
        let change = relative_change(&solved.labels.scores, &labels.scores);
        labels = solved.labels;
        if change < cfg.control.tol {
            converged = true;
            break;
        }
    }
    let predictions = decide(&labels);
    Ok(BaselineFit {
        labels,
        predictions,
        weights,
        laplacian: lap,
        graph: Some(graph),
        iterations,
        converged,
    })
}
