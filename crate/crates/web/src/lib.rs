//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string. The same
//! operations are available as ordinary Rust functions returning typed
//! results, which is what the native tests exercise.

use nalgebra::DMatrix;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use lmssc::data::{generate_synthetic, make_split, SyntheticSpec};
use lmssc::graph::{
    alpha_from_k, count_components, laplacian, squared_distances, update_similarity, AlphaMode,
    DistanceSource, PairwiseDistances, ALPHA_FLOOR,
};
use lmssc::propagate::{decide, harmonic_solve};
use lmssc::solver::{fit, predict};
use lmssc::{one_hot, permute_labeled_first, LmsscConfig, SimilarityGraph};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphView {
    /// Nonzero `s_ij`, directed from `i` to its neighbor `j`.
    pub edges: Vec<Edge>,
    pub components: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Propagation {
    pub graph: GraphView,
    /// Predicted class per point; labeled points keep their label.
    pub classes: Vec<usize>,
    /// Class scores per point.
    pub scores: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoRun {
    pub accuracy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: Vec<f64>,
    /// First two principal components of the learned latent columns.
    pub embedding: Vec<[f64; 2]>,
    pub truth: Vec<usize>,
    pub predicted: Vec<usize>,
    pub labeled: Vec<bool>,
}

fn points_matrix(xy: &[f64]) -> Result<DMatrix<f64>, String> {
    if !xy.len().is_multiple_of(2) {
        return Err("coordinates must come in x, y pairs".into());
    }
    Ok(DMatrix::from_column_slice(2, xy.len() / 2, xy))
}

/// Adaptive-neighbor graph on 2-D points where every point keeps exactly `k`
/// neighbors (absent ties).
pub fn build_adaptive_graph(xy: &[f64], k: usize) -> Result<SimilarityGraph, String> {
    let points = points_matrix(xy)?;
    let n = points.ncols();
    if n < 3 || k == 0 || k + 2 > n {
        return Err(format!(
            "need k in 1..={} for {n} points",
            n.saturating_sub(2)
        ));
    }
    let dist = squared_distances(&points, DistanceSource::Features);
    let none = PairwiseDistances {
        matrix: DMatrix::zeros(n, n),
        source: DistanceSource::Labels,
    };
    let alpha = alpha_from_k(&dist, k, 1.0).map_err(|e| e.to_string())?;
    // Coincident points give alpha_i = 0; floor them like the solver does.
    let per_point: Vec<f64> = alpha.per_point.iter().map(|a| a.max(ALPHA_FLOOR)).collect();
    update_similarity(&dist, &none, 1.0, 0.0, AlphaMode::PerPoint(&per_point), k)
        .map_err(|e| e.to_string())
}

fn graph_view(graph: &SimilarityGraph) -> GraphView {
    let n = graph.n_nodes();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let w = graph.weights[(i, j)];
            if w > 0.0 {
                edges.push(Edge {
                    from: i,
                    to: j,
                    weight: w,
                });
            }
        }
    }
    GraphView {
        edges,
        components: count_components(&graph.weights, 0.0),
    }
}

pub fn adaptive_graph_view(xy: &[f64], k: usize) -> Result<GraphView, String> {
    build_adaptive_graph(xy, k).map(|g| graph_view(&g))
}

/// Harmonic label propagation over the adaptive graph. `labels[i] < 0`
/// marks point `i` as unlabeled.
pub fn propagate_points(xy: &[f64], labels: &[i32], k: usize) -> Result<Propagation, String> {
    let graph = build_adaptive_graph(xy, k)?;
    let n = graph.n_nodes();
    if labels.len() != n {
        return Err(format!("{} labels for {n} points", labels.len()));
    }
    let order: Vec<usize> = (0..n)
        .filter(|&i| labels[i] >= 0)
        .chain((0..n).filter(|&i| labels[i] < 0))
        .collect();
    let l = labels.iter().filter(|&&y| y >= 0).count();
    if l == 0 || l == n {
        return Err("label at least one point and leave at least one unlabeled".into());
    }
    let given: Vec<usize> = order[..l].iter().map(|&i| labels[i] as usize).collect();
    let class_count = given.iter().max().map_or(0, |m| m + 1).max(2);

    let permuted = SimilarityGraph {
        weights: DMatrix::from_fn(n, n, |a, b| graph.weights[(order[a], order[b])]),
        neighbor_count_hint: k,
    };
    let solved = harmonic_solve(&laplacian(&permuted), &one_hot(&given, class_count))
        .map_err(|e| e.to_string())?;
    let decided = decide(&solved.labels);

    let mut classes = vec![0; n];
    let mut scores = vec![Vec::new(); n];
    for (pos, &i) in order.iter().enumerate() {
        classes[i] = if pos < l {
            given[pos]
        } else {
            decided[pos - l]
        };
        scores[i] = solved.labels.scores.row(pos).iter().copied().collect();
    }
    Ok(Propagation {
        graph: graph_view(&graph),
        classes,
        scores,
    })
}

fn principal_plane(h: &DMatrix<f64>) -> Vec<[f64; 2]> {
    let n = h.ncols();
    let mean = h.column_mean();
    let mut centered = h.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let svd = centered.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let axis = |c: usize| -> Vec<f64> {
        if c < u.ncols() {
            (u.column(c).transpose() * &centered)
                .iter()
                .copied()
                .collect()
        } else {
            vec![0.0; n]
        }
    };
    let (x, y) = (axis(0), axis(1));
    x.into_iter().zip(y).map(|(a, b)| [a, b]).collect()
}

/// Generates planted 3-view data, fits LMSSC at the given label rate and
/// returns the fit summary with a 2-D view of the latent space.
pub fn run_demo(
    n_samples: usize,
    n_classes: usize,
    separation: f64,
    noise: f64,
    rate: f64,
    seed: u64,
) -> Result<DemoRun, String> {
    let spec = SyntheticSpec {
        n_samples,
        n_classes,
        cluster_separation: separation,
        noise_sigma: noise,
        rng_seed: seed,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec).map_err(|e| e.to_string())?.raw;
    let run = || -> lmssc::Result<DemoRun> {
        let mask = make_split(&data.labels, data.class_count, rate, seed)?;
        let ds = permute_labeled_first(&data.views, &data.labels, data.class_count, &mask)?;
        let cfg = LmsscConfig {
            neighbor_count: 15.min(n_samples - 2),
            rng_seed: seed,
            ..LmsscConfig::default()
        };
        let state = fit(&ds, &cfg)?;
        let predicted = predict(&state, &ds);
        let hits = (0..n_samples)
            .filter(|&i| !mask[i] && predicted[i] == data.labels[i])
            .count();
        let unlabeled = mask.iter().filter(|m| !**m).count();
        Ok(DemoRun {
            accuracy: hits as f64 / unlabeled.max(1) as f64,
            iterations: state.iteration,
            converged: state.converged,
            objective: state.objective_trace.clone(),
            embedding: ds.to_original_order(&principal_plane(&state.model.shared)),
            truth: data.labels.clone(),
            predicted,
            labeled: mask,
        })
    };
    run().map_err(|e| e.to_string())
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsValue> {
    result
        .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// `xy` holds interleaved coordinates `[x0, y0, x1, y1, ...]`.
#[wasm_bindgen(js_name = adaptiveGraph)]
pub fn adaptive_graph(xy: &[f64], k: usize) -> Result<String, JsValue> {
    to_js(adaptive_graph_view(xy, k))
}

#[wasm_bindgen(js_name = propagateLabels)]
pub fn propagate_labels(xy: &[f64], labels: &[i32], k: usize) -> Result<String, JsValue> {
    to_js(propagate_points(xy, labels, k))
}

#[wasm_bindgen(js_name = plantedDemo)]
pub fn planted_demo(
    n_samples: usize,
    n_classes: usize,
    separation: f64,
    noise: f64,
    rate: f64,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(run_demo(
        n_samples,
        n_classes,
        separation,
        noise,
        rate,
        seed as u64,
    ))
}
