//! Invariant checks on a fitted model, used by `lmssc check`.

use serde::{Deserialize, Serialize};

use crate::data::{make_split, RawDataset};
use crate::error::Result;
use crate::graph::{
    connected_components, laplacian, zero_eigenvalue_multiplicity, ZERO_EIGENVALUE_TOL,
};
use crate::solver::fit;
use crate::types::{permute_labeled_first, LmsscConfig, ROW_SUM_TOL};

/// Relative objective increase tolerated by a single sub-step.
pub const DESCENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.items.push(CheckItem {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

/// Splits `data` at `rate`, fits LMSSC and checks every model invariant on
/// the result. Errors from the split or the fit are returned as-is.
pub fn check_dataset(
    data: &RawDataset,
    cfg: &LmsscConfig,
    rate: f64,
    seed: u64,
) -> Result<CheckReport> {
    let mask = make_split(&data.labels, data.class_count, rate, seed)?;
    let ds = permute_labeled_first(&data.views, &data.labels, data.class_count, &mask)?;
    let state = fit(
        &ds,
        &LmsscConfig {
            rng_seed: seed,
            ..cfg.clone()
        },
    )?;
    let mut report = CheckReport { items: Vec::new() };
    report.push(
        "dataset",
        true,
        format!(
            "N={}, V={}, c={}, labeled={}",
            ds.n_samples(),
            ds.n_views(),
            ds.class_count,
            ds.labeled_count
        ),
    );

    let min_w = state
        .model
        .view_factors
        .iter()
        .flat_map(|w| w.iter().copied())
        .fold(f64::INFINITY, f64::min);
    report.push(
        "view factors nonnegative",
        min_w >= 0.0,
        format!("min entry {min_w:e}"),
    );

    let graph_ok = state.graph.check_invariants();
    report.push(
        "similarity graph",
        graph_ok.is_ok(),
        graph_ok.err().map_or_else(
            || "rows on the simplex, zero diagonal".into(),
            |e| e.to_string(),
        ),
    );

    let lap = laplacian(&state.graph);
    let m = &lap.matrix;
    let asym = (m - m.transpose()).amax();
    let row_sum = m.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max);
    let min_eig = m.clone().symmetric_eigenvalues().min();
    report.push(
        "laplacian",
        asym <= 1e-10 && row_sum <= ROW_SUM_TOL && min_eig >= -1e-8,
        format!("asymmetry {asym:e}, max |row sum| {row_sum:e}, min eigenvalue {min_eig:e}"),
    );

    let l = ds.labeled_count;
    let f = &state.labels.scores;
    let clamped = f.rows(0, l) == ds.labeled_indicator();
    let fu = f.rows(l, f.nrows() - l);
    let range_ok = fu.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x));
    let sum_err = fu
        .row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    let harmonic = (m * f).rows(l, f.nrows() - l).amax();
    report.push(
        "label scores",
        clamped && range_ok && sum_err <= 1e-6 && harmonic <= 1e-8,
        format!("clamped {clamped}, in [0,1] {range_ok}, row-sum error {sum_err:e}, harmonic residual {harmonic:e}"),
    );

    let worst = state
        .steps
        .iter()
        .map(|s| (s.after - s.before) / s.before.abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    report.push(
        "sub-step descent",
        worst <= DESCENT_TOL,
        format!(
            "{} steps, worst relative increase {worst:e}",
            state.steps.len()
        ),
    );

    let components = connected_components(&state.graph, 0.0);
    let zeros = zero_eigenvalue_multiplicity(&lap, ZERO_EIGENVALUE_TOL);
    report.push(
        "components",
        components == zeros,
        format!("{components} connected component(s), {zeros} zero eigenvalue(s)"),
    );

    report.push(
        "convergence",
        true,
        format!(
            "{} iteration(s), converged {}",
            state.iteration, state.converged
        ),
    );
    Ok(report)
}
