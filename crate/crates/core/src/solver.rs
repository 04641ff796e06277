//! The alternating LMSSC solver.
//!
//! One iteration updates, in order, the view factors `W`, the shared latent
//! representation `H`, the similarity graph `S` (after re-deriving `alpha`
//! from the neighbor count) and the label scores `F`. Every sub-step is an
//! exact block minimizer of
//!
//! `Σ_v ‖X^v − W^v H‖²_F + β (Tr(H L Hᵀ) + α ‖S‖²_F) + γ Tr(Fᵀ L F)`
//!
//! at that iteration's `alpha`, which the recorded [`StepRecord`]s expose.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    alpha_from_k, laplacian, squared_distances, squared_row_distances, update_similarity,
    AlphaMode, DistanceSource, PairwiseDistances,
};
use crate::latent::{update_shared_factor, update_view_factors, SylvesterSystem};
use crate::propagate::{decide, harmonic_solve};
use crate::types::{LabelIndicator, LatentModel, LmsscConfig, MultiViewDataset, SimilarityGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubStep {
    ViewFactors,
    SharedFactor,
    Similarity,
    Labels,
}

/// Objective before and after one sub-step, both at the iteration's `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub step: SubStep,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The k-rule gave a non-positive `alpha`; it was floored.
    AlphaClamped {
        iteration: usize,
        raw: f64,
        used: f64,
    },
    /// `L_uu` needed a ridge to factor.
    HarmonicRidge { iteration: usize, ridge: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::AlphaClamped {
                iteration,
                raw,
                used,
            } => {
                write!(f, "iteration {iteration}: alpha {raw} clamped to {used}")
            }
            Warning::HarmonicRidge { iteration, ridge } => {
                write!(
                    f,
                    "iteration {iteration}: harmonic solve used ridge {ridge}"
                )
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub model: LatentModel,
    pub graph: SimilarityGraph,
    pub labels: LabelIndicator,
    /// Completed iterations.
    pub iteration: usize,
    /// Objective after each sub-step, four values per iteration.
    pub objective_trace: Vec<f64>,
    pub alpha_trace: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub converged: bool,
    pub warnings: Vec<Warning>,
}

/// The `alpha`-independent pieces of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    /// `Σ_v ‖X^v − W^v H‖²_F`
    pub reconstruction: f64,
    /// `Tr(H L Hᵀ)`
    pub latent_smoothness: f64,
    /// `‖S‖²_F`
    pub graph_norm: f64,
    /// `Tr(Fᵀ L F)`
    pub label_smoothness: f64,
}

impl ObjectiveTerms {
    pub fn evaluate(
        views: &[DMatrix<f64>],
        model: &LatentModel,
        graph: &SimilarityGraph,
        labels: &LabelIndicator,
    ) -> Self {
        let lap = laplacian(graph);
        Self {
            reconstruction: model.reconstruction_error(views),
            latent_smoothness: lap.quadratic_form_rows(&model.shared),
            graph_norm: graph.weights.norm_squared(),
            label_smoothness: lap.quadratic_form(&labels.scores),
        }
    }

    pub fn value(&self, beta: f64, gamma: f64, alpha: f64) -> f64 {
        self.reconstruction
            + beta * (self.latent_smoothness + alpha * self.graph_norm)
            + gamma * self.label_smoothness
    }
}

/// Objective value of `state` on `dataset`.
pub fn objective(
    state: &SolverState,
    dataset: &MultiViewDataset,
    beta: f64,
    gamma: f64,
    alpha: f64,
) -> f64 {
    ObjectiveTerms::evaluate(&dataset.views, &state.model, &state.graph, &state.labels)
        .value(beta, gamma, alpha)
}

fn relative_change(new: &DMatrix<f64>, old: &DMatrix<f64>) -> f64 {
    (new - old).norm() / old.norm().max(1.0)
}

/// Runs the alternating solver until the relative change of `F` drops below
/// `cfg.f_rel_tol` or `cfg.max_iters` iterations have run.
pub fn fit(dataset: &MultiViewDataset, cfg: &LmsscConfig) -> Result<SolverState> {
    dataset.validate()?;
    let n = dataset.n_samples();
    cfg.validate(n)?;
    let (beta, gamma, k) = (cfg.beta, cfg.gamma, cfg.neighbor_count);
    let r = cfg.latent_dim;
    let views = &dataset.views;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let shared = DMatrix::from_fn(r, n, |_, _| rng.random::<f64>());
    let mut model = LatentModel {
        view_factors: views.iter().map(|x| DMatrix::zeros(x.nrows(), r)).collect(),
        shared,
        latent_dim: r,
    };
    let mut graph = SimilarityGraph::uniform(n, k);
    let y_l = dataset.labeled_indicator();
    let mut labels = LabelIndicator::clamped_zero(&y_l, n);

    let mut state_terms = ObjectiveTerms::evaluate(views, &model, &graph, &labels);
    let mut objective_trace = Vec::new();
    let mut alpha_trace = Vec::new();
    let mut steps = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = false;
    let mut iteration = 0;

    while iteration < cfg.max_iters {
        iteration += 1;
        let ctx = |e: Error| e.context(format!("iteration {iteration}"));

        model.view_factors = update_view_factors(views, &model.shared).map_err(ctx)?;
        let after_w = ObjectiveTerms::evaluate(views, &model, &graph, &labels);

        let lap = laplacian(&graph);
        let sys = SylvesterSystem::assemble(views, &model.view_factors, beta, &lap).map_err(ctx)?;
        model.shared = update_shared_factor(&sys).map_err(ctx)?;
        let after_h = ObjectiveTerms::evaluate(views, &model, &graph, &labels);

        let dh = squared_distances(&model.shared, DistanceSource::Latent);
        let df = squared_row_distances(&labels.scores, DistanceSource::Labels);
        let estimate = alpha_from_k(&PairwiseDistances::combine(&dh, &df, beta, gamma), k, beta)
            .map_err(ctx)?;
        let alpha = estimate.clamped();
        if estimate.is_degenerate() {
            warnings.push(Warning::AlphaClamped {
                iteration,
                raw: estimate.mean,
                used: alpha,
            });
        }
        alpha_trace.push(alpha);
        graph =
            update_similarity(&dh, &df, beta, gamma, AlphaMode::Shared(alpha), k).map_err(ctx)?;
        let after_s = ObjectiveTerms::evaluate(views, &model, &graph, &labels);

        let solved = harmonic_solve(&laplacian(&graph), &y_l).map_err(ctx)?;
        if let Some(ridge) = solved.ridge {
            warnings.push(Warning::HarmonicRidge { iteration, ridge });
        }
        let change = relative_change(&solved.labels.scores, &labels.scores);
        labels = solved.labels;
        let after_f = ObjectiveTerms::evaluate(views, &model, &graph, &labels);

        let sequence = [
            (SubStep::ViewFactors, state_terms, after_w),
            (SubStep::SharedFactor, after_w, after_h),
            (SubStep::Similarity, after_h, after_s),
            (SubStep::Labels, after_s, after_f),
        ];
        for (step, before, after) in sequence {
            let after = after.value(beta, gamma, alpha);
            steps.push(StepRecord {
                iteration,
                step,
                before: before.value(beta, gamma, alpha),
                after,
            });
            objective_trace.push(after);
        }
        state_terms = after_f;

        #[cfg(debug_assertions)]
        check_state(&model, &graph, &labels, dataset);

        if change < cfg.f_rel_tol {
            converged = true;
            break;
        }
    }

    Ok(SolverState {
        model,
        graph,
        labels,
        iteration,
        objective_trace,
        alpha_trace,
        steps,
        converged,
        warnings,
    })
}

#[cfg(debug_assertions)]
fn check_state(
    model: &LatentModel,
    graph: &SimilarityGraph,
    labels: &LabelIndicator,
    dataset: &MultiViewDataset,
) {
    assert!(model
        .view_factors
        .iter()
        .all(|w| w.iter().all(|&x| x >= 0.0)));
    if let Err(e) = graph.check_invariants() {
        panic!("similarity invariant violated: {e}");
    }
    let l = dataset.labeled_count;
    assert_eq!(
        labels.scores.rows(0, l).into_owned(),
        dataset.labeled_indicator(),
        "labeled block must stay clamped"
    );
}

/// Class of every sample in the order the data was supplied in. Labeled
/// samples keep their given labels.
pub fn predict(state: &SolverState, dataset: &MultiViewDataset) -> Vec<usize> {
    let storage: Vec<usize> = dataset
        .labeled_labels()
        .iter()
        .copied()
        .chain(decide(&state.labels))
        .collect();
    dataset.to_original_order(&storage)
}

/// Fraction of unlabeled samples whose decision matches the ground truth.
pub fn unlabeled_accuracy(decisions: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(decisions.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    let hits = decisions.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}
