//! Repeated-trial experiments: method × label rate × trial grids, mean(std)
//! accuracy tables and parameter sweeps.
//!
//! Splits depend only on `(rate, trial)`: trial `t` uses seed
//! `base_seed + t` for both the labeled mask and the solver's random start,
//! so adding or removing a method never changes another method's splits.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{amgl_fit, mlan_fit, IterationControl, MlanConfig};
use crate::data::{
    generate_synthetic, load, make_split, DatasetManifest, RawDataset, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::propagate::{decide, gfhf_baseline, KnnGraphConfig};
use crate::solver::{fit, unlabeled_accuracy};
use crate::types::{permute_labeled_first, LmsscConfig, MultiViewDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Lmssc,
    /// Single-view GFHF on the given view.
    Gfhf(usize),
    Amgl,
    Mlan,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Lmssc => write!(f, "lmssc"),
            Method::Gfhf(v) => write!(f, "gfhf:{v}"),
            Method::Amgl => write!(f, "amgl"),
            Method::Mlan => write!(f, "mlan"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lmssc" => Ok(Method::Lmssc),
            "amgl" => Ok(Method::Amgl),
            "mlan" => Ok(Method::Mlan),
            other => other
                .strip_prefix("gfhf:")
                .and_then(|v| v.parse().ok())
                .map(Method::Gfhf)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}"))),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Manifest(PathBuf),
    Synthetic(SyntheticSpec),
}

impl DatasetSource {
    pub fn load(&self) -> Result<RawDataset> {
        match self {
            DatasetSource::Manifest(path) => {
                let manifest = DatasetManifest::read(path)?;
                let base = path.parent().unwrap_or(Path::new("."));
                load(&manifest, base)
            }
            DatasetSource::Synthetic(spec) => Ok(generate_synthetic(spec)?.raw),
        }
    }
}

/// Cartesian grid over `beta`, `gamma` and the latent dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub latent_dims: Vec<usize>,
}

impl SweepGrid {
    pub fn points(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::new();
        for &b in &self.betas {
            for &g in &self.gammas {
                for &r in &self.latent_dims {
                    out.push((b, g, r));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub methods: Vec<Method>,
    pub label_rates: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub lmssc: LmsscConfig,
    /// Fixed k-NN graphs used by GFHF and AMGL.
    pub knn: KnnGraphConfig,
    pub sweep: Option<SweepGrid>,
    /// Upper bound on concurrently running trials.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synthetic(SyntheticSpec::default()),
            methods: vec![Method::Lmssc],
            label_rates: vec![0.1, 0.2, 0.3, 0.5],
            trials: 20,
            base_seed: 0,
            lmssc: LmsscConfig::default(),
            knn: KnnGraphConfig::default(),
            sweep: None,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if let Some(r) = self.label_rates.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::InvalidConfig(format!(
                "label rate {r} must lie in (0, 1)"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub rate: f64,
    pub trial: usize,
    pub seed: u64,
    /// Fraction of unlabeled samples classified correctly; absent when the
    /// cell failed.
    pub accuracy: Option<f64>,
    pub iterations: Option<usize>,
    pub wall_time_ms: f64,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub rate: f64,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator, zero for one trial).
    pub std: f64,
    pub trials: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentReport {
    pub fn has_errors(&self) -> bool {
        self.records.iter().any(|r| r.error.is_some())
    }

    /// Records serialized without wall-clock timings; identical across runs
    /// of the same configuration.
    pub fn canonical_records(&self) -> String {
        let stripped: Vec<TrialRecord> = self
            .records
            .iter()
            .map(|r| TrialRecord {
                wall_time_ms: 0.0,
                ..r.clone()
            })
            .collect();
        serde_json::to_string_pretty(&stripped).expect("records serialize")
    }

    pub fn aggregate(&self, method: Method, rate: f64) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.rate == rate)
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregates per `(method, rate)` in configuration order.
pub fn aggregate_records(
    methods: &[Method],
    rates: &[f64],
    records: &[TrialRecord],
) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &method in methods {
        for &rate in rates {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.method == method && r.rate == rate)
                .collect();
            let acc: Vec<f64> = cell.iter().filter_map(|r| r.accuracy).collect();
            let (mean, std) = mean_std(&acc);
            out.push(Aggregate {
                method,
                rate,
                mean,
                std,
                trials: acc.len(),
                failed: cell.len() - acc.len(),
            });
        }
    }
    out
}

struct Outcome {
    accuracy: f64,
    iterations: usize,
    warnings: Vec<String>,
}

fn run_method(
    method: Method,
    ds: &MultiViewDataset,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Outcome> {
    let control = IterationControl {
        max_iters: cfg.lmssc.max_iters,
        tol: cfg.lmssc.f_rel_tol,
    };
    let truth = ds.unlabeled_labels();
    match method {
        Method::Lmssc => {
            let lcfg = LmsscConfig {
                rng_seed: seed,
                ..cfg.lmssc.clone()
            };
            let state = fit(ds, &lcfg)?;
            Ok(Outcome {
                accuracy: unlabeled_accuracy(&decide(&state.labels), truth),
                iterations: state.iteration,
                warnings: state.warnings.iter().map(|w| w.to_string()).collect(),
            })
        }
        Method::Gfhf(v) => {
            let view = ds.views.get(v).ok_or_else(|| {
                Error::InvalidConfig(format!("view {v} does not exist ({} views)", ds.n_views()))
            })?;
            let out = gfhf_baseline(view, ds.labeled_labels(), ds.class_count, &cfg.knn)?;
            Ok(Outcome {
                accuracy: unlabeled_accuracy(&out.predictions, truth),
                iterations: 1,
                warnings: out
                    .solution
                    .ridge
                    .map(|r| vec![format!("harmonic solve used ridge {r}")])
                    .unwrap_or_default(),
            })
        }
        Method::Amgl => {
            let out = amgl_fit(ds, &cfg.knn, control)?;
            Ok(Outcome {
                accuracy: unlabeled_accuracy(&out.predictions, truth),
                iterations: out.iterations,
                warnings: Vec::new(),
            })
        }
        Method::Mlan => {
            let mcfg = MlanConfig {
                neighbor_count: cfg.lmssc.neighbor_count,
                gamma: cfg.lmssc.gamma,
                control,
            };
            let out = mlan_fit(ds, &mcfg)?;
            Ok(Outcome {
                accuracy: unlabeled_accuracy(&out.predictions, truth),
                iterations: out.iterations,
                warnings: Vec::new(),
            })
        }
    }
}

/// All method records for one `(rate, trial)` split.
fn run_split(
    cfg: &ExperimentConfig,
    data: &RawDataset,
    rate: f64,
    trial: usize,
) -> Vec<TrialRecord> {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let dataset = make_split(&data.labels, data.class_count, rate, seed)
        .and_then(|mask| permute_labeled_first(&data.views, &data.labels, data.class_count, &mask));
    cfg.methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let outcome = dataset
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|ds| run_method(method, ds, cfg, seed).map_err(|e| e.to_string()));
            let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            match outcome {
                Ok(o) => TrialRecord {
                    method,
                    rate,
                    trial,
                    seed,
                    accuracy: Some(o.accuracy),
                    iterations: Some(o.iterations),
                    wall_time_ms,
                    warnings: o.warnings,
                    error: None,
                },
                Err(e) => TrialRecord {
                    method,
                    rate,
                    trial,
                    seed,
                    accuracy: None,
                    iterations: None,
                    wall_time_ms,
                    warnings: Vec::new(),
                    error: Some(e),
                },
            }
        })
        .collect()
}

/// Runs every `(method, rate, trial)` cell on already-loaded data. Failing
/// cells are recorded and the grid continues.
pub fn run_on(cfg: &ExperimentConfig, data: &RawDataset) -> Result<ExperimentReport> {
    cfg.validate()?;
    let splits: Vec<(usize, f64, usize)> = cfg
        .label_rates
        .iter()
        .enumerate()
        .flat_map(|(ri, &rate)| (0..cfg.trials).map(move |t| (ri, rate, t)))
        .collect();
    let work = |&(_, rate, trial): &(usize, f64, usize)| run_split(cfg, data, rate, trial);

    #[cfg(feature = "parallel")]
    let per_split: Vec<Vec<TrialRecord>> = {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| splits.par_iter().map(work).collect())
    };
    #[cfg(not(feature = "parallel"))]
    let per_split: Vec<Vec<TrialRecord>> = splits.iter().map(work).collect();

    // Deterministic (method, rate, trial) order.
    let mut records = Vec::with_capacity(splits.len() * cfg.methods.len());
    for mi in 0..cfg.methods.len() {
        for split in &per_split {
            records.push(split[mi].clone());
        }
    }
    let aggregates = aggregate_records(&cfg.methods, &cfg.label_rates, &records);
    Ok(ExperimentReport {
        config: cfg.clone(),
        records,
        aggregates,
    })
}

/// Loads the configured dataset and runs the grid.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let data = cfg.dataset.load()?;
    run_on(cfg, &data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub gamma: f64,
    pub latent_dim: usize,
    pub rate: f64,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Row with the highest mean accuracy.
    pub best: Option<SweepRow>,
    pub reports: Vec<ExperimentReport>,
}

impl SweepReport {
    pub fn has_errors(&self) -> bool {
        self.reports.iter().any(ExperimentReport::has_errors)
    }
}

/// Evaluates LMSSC at every grid point with the configured rates and trials.
pub fn sweep_on(cfg: &ExperimentConfig, data: &RawDataset) -> Result<SweepReport> {
    let grid = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("sweep requires a grid".into()))?;
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (beta, gamma, latent_dim) in points {
        let point_cfg = ExperimentConfig {
            methods: vec![Method::Lmssc],
            lmssc: LmsscConfig {
                beta,
                gamma,
                latent_dim,
                ..cfg.lmssc.clone()
            },
            sweep: None,
            ..cfg.clone()
        };
        let report = run_on(&point_cfg, data)?;
        for agg in &report.aggregates {
            rows.push(SweepRow {
                beta,
                gamma,
                latent_dim,
                rate: agg.rate,
                mean: agg.mean,
                std: agg.std,
                trials: agg.trials,
                failed: agg.failed,
            });
        }
        reports.push(report);
    }
    let best = rows
        .iter()
        .filter(|r| r.mean.is_finite())
        .max_by(|a, b| a.mean.total_cmp(&b.mean))
        .cloned();
    Ok(SweepReport {
        rows,
        best,
        reports,
    })
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let data = cfg.dataset.load()?;
    sweep_on(cfg, &data)
}

/// `mean(std)` in percent with two decimals, e.g. `93.59(1.85)`.
pub fn format_cell(mean: f64, std: f64) -> String {
    if mean.is_finite() {
        format!("{:.2}({:.2})", 100.0 * mean, 100.0 * std)
    } else {
        "-".to_string()
    }
}

/// Plain-text table: one row per method, one column per label rate.
pub fn format_table(report: &ExperimentReport) -> String {
    let rates = &report.config.label_rates;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["method".to_string()];
    header.extend(rates.iter().map(|r| r.to_string()));
    rows.push(header);
    for &method in &report.config.methods {
        let mut row = vec![method.to_string()];
        for &rate in rates {
            row.push(
                report
                    .aggregate(method, rate)
                    .map_or_else(|| "-".to_string(), |a| format_cell(a.mean, a.std)),
            );
        }
        rows.push(row);
    }
    let cols = rows[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
    }
    out
}

/// Long-format CSV, one row per grid point and rate.
pub fn format_sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("beta,gamma,latent_dim,rate,mean,std,trials,failed\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.beta, r.gamma, r.latent_dim, r.rate, r.mean, r.std, r.trials, r.failed
        ));
    }
    out
}

/// Writes `report.json`, `table.txt` and the resolved `config.json` into
/// `dir`.
pub fn emit(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        (
            dir.join("report.json"),
            serde_json::to_string_pretty(report)?,
        ),
        (dir.join("table.txt"), format_table(report)),
        (
            dir.join("config.json"),
            serde_json::to_string_pretty(&report.config)?,
        ),
    ];
    for (path, body) in &files {
        fs::write(path, body)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Writes `sweep.json`, `sweep.csv` and the resolved `config.json` into `dir`.
pub fn emit_sweep(
    report: &SweepReport,
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        (
            dir.join("sweep.json"),
            serde_json::to_string_pretty(report)?,
        ),
        (dir.join("sweep.csv"), format_sweep_csv(report)),
        (dir.join("config.json"), serde_json::to_string_pretty(cfg)?),
    ];
    for (path, body) in &files {
        fs::write(path, body)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Reads a report written by [`emit`].
pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
