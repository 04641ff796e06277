//! Dataset files, stratified label splits and the planted synthetic generator.
//!
//! On disk every view is a comma-separated text file with one sample per row
//! and no header; labels are one integer per line. A manifest (TOML) ties the
//! files together:
//!
//! ```toml
//! name = "sonar"
//! views = ["view0.csv", "view1.csv", "view2.csv"]
//! labels = "labels.txt"
//! dims = [[20, 208], [20, 208], [20, 208]]
//! classes = 2
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    #[serde(rename = "views")]
    pub view_files: Vec<PathBuf>,
    #[serde(rename = "labels")]
    pub label_file: PathBuf,
    /// `(d_v, N)` per view.
    #[serde(rename = "dims")]
    pub expected_dims: Vec<(usize, usize)>,
    #[serde(rename = "classes")]
    pub class_count: usize,
}

impl DatasetManifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<manifest>"),
            line: 0,
            msg: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.view_files.is_empty() {
            return Err(Error::InvalidConfig("manifest lists no views".into()));
        }
        if self.view_files.len() != self.expected_dims.len() {
            return Err(Error::InvalidConfig(format!(
                "{} view files but {} dims entries",
                self.view_files.len(),
                self.expected_dims.len()
            )));
        }
        if self.expected_dims.iter().any(|&(d, n)| d == 0 || n == 0) {
            return Err(Error::InvalidConfig("dims must be positive".into()));
        }
        Ok(())
    }
}

/// Views (`d_v × N`, samples as columns) and labels in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub views: Vec<DMatrix<f64>>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl RawDataset {
    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }
}

/// Loads every view and the labels named by `manifest`, resolving relative
/// paths against `base_dir`.
pub fn load(manifest: &DatasetManifest, base_dir: &Path) -> Result<RawDataset> {
    manifest.validate()?;
    let resolve = |p: &Path| {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    };
    let mut views = Vec::with_capacity(manifest.view_files.len());
    for (v, (file, &(d, n))) in manifest
        .view_files
        .iter()
        .zip(&manifest.expected_dims)
        .enumerate()
    {
        let x = read_view(&resolve(file))?;
        if x.shape() != (d, n) {
            return Err(Error::DimensionMismatch(format!(
                "view {v} ({}) is {}x{} (features x samples), manifest says {d}x{n}",
                file.display(),
                x.nrows(),
                x.ncols()
            )));
        }
        views.push(x);
    }
    let label_path = resolve(&manifest.label_file);
    let labels = read_labels(&label_path)?;
    let n = manifest.expected_dims[0].1;
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    if let Some(pos) = labels.iter().position(|&y| y >= manifest.class_count) {
        return Err(Error::Parse {
            path: label_path,
            line: pos as u64 + 1,
            msg: format!(
                "label {} out of range for {} classes",
                labels[pos], manifest.class_count
            ),
        });
    }
    Ok(RawDataset {
        views,
        labels,
        class_count: manifest.class_count,
    })
}

/// Reads a row-per-sample CSV file into a `features × samples` matrix.
pub fn read_view(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("{field:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("{} fields, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "no samples".into(),
        });
    }
    let d = rows[0].len();
    Ok(DMatrix::from_fn(d, rows.len(), |i, j| rows[j][i]))
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let file = fs::File::open(path)?;
    let mut labels = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        labels.push(t.parse::<usize>().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx as u64 + 1,
            msg: format!("{t:?}: {e}"),
        })?);
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "no labels".into(),
        });
    }
    Ok(labels)
}

/// Writes a `features × samples` matrix as one CSV row per sample. Values
/// use the shortest representation that parses back to the same `f64`.
pub fn write_view(path: &Path, view: &DMatrix<f64>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for j in 0..view.ncols() {
        let row: Vec<String> = view.column(j).iter().map(|x| format!("{x:?}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for y in labels {
        writeln!(out, "{y}")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes views, labels and a manifest into `dir` and returns the manifest
/// path.
pub fn save(dir: &Path, name: &str, data: &RawDataset) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut view_files = Vec::new();
    for (v, x) in data.views.iter().enumerate() {
        let file = PathBuf::from(format!("view{v}.csv"));
        write_view(&dir.join(&file), x)?;
        view_files.push(file);
    }
    let label_file = PathBuf::from("labels.txt");
    write_labels(&dir.join(&label_file), &data.labels)?;
    let manifest = DatasetManifest {
        name: name.to_string(),
        view_files,
        label_file,
        expected_dims: data.views.iter().map(|x| x.shape()).collect(),
        class_count: data.class_count,
    };
    let path = dir.join("manifest.toml");
    fs::write(&path, manifest.to_toml())?;
    Ok(path)
}

/// Stratified labeled mask: each class contributes `round(rate · size)`
/// samples (ties to even), at least one.
pub fn make_split(labels: &[usize], class_count: usize, rate: f64, seed: u64) -> Result<Vec<bool>> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "label rate {rate} must lie in (0, 1)"
        )));
    }
    let n = labels.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &y) in labels.iter().enumerate() {
        let Some(bucket) = members.get_mut(y) else {
            return Err(Error::Index(format!(
                "label {y} out of range for {class_count} classes"
            )));
        };
        bucket.push(i);
    }
    if let Some(class) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::LabelCoverage { class });
    }
    if rate * (n as f64) < class_count as f64 {
        return Err(Error::RateTooLow {
            rate,
            reason: format!("{n} samples at this rate cannot label all {class_count} classes"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; n];
    for idx in &mut members {
        let take = ((rate * idx.len() as f64).round_ties_even() as usize).max(1);
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(take) {
            mask[i] = true;
        }
    }
    if mask.iter().all(|&m| m) {
        return Err(Error::InvalidConfig(format!(
            "rate {rate} leaves no unlabeled samples"
        )));
    }
    Ok(mask)
}

/// Parameters of the planted multi-view generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_classes: usize,
    pub latent_dim: usize,
    pub view_dims: Vec<usize>,
    pub cluster_separation: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_samples: 200,
            n_classes: 4,
            latent_dim: 5,
            view_dims: vec![20, 20, 20],
            cluster_separation: 10.0,
            noise_sigma: 0.1,
            rng_seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 || self.n_samples < 2 * self.n_classes {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes and 2 samples per class, got {} samples, {} classes",
                self.n_samples, self.n_classes
            )));
        }
        if self.latent_dim == 0 || self.view_dims.is_empty() || self.view_dims.contains(&0) {
            return Err(Error::InvalidConfig(
                "all dimensions must be positive".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0) || !(self.cluster_separation >= 0.0) {
            return Err(Error::InvalidConfig(
                "noise and separation must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Planted data together with the hidden factors that produced it.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub raw: RawDataset,
    /// `W₀^v`, entries uniform on `[0, 1]`.
    pub view_factors: Vec<DMatrix<f64>>,
    /// `H₀`, one column per sample.
    pub latent: DMatrix<f64>,
    /// Class centers as columns of an `r₀ × c` matrix.
    pub centers: DMatrix<f64>,
}

/// Draws class centers `cluster_separation · noise_sigma` apart, latent
/// columns around them, and views `X^v = W₀^v H₀ + noise`. Sample `i`
/// belongs to class `i mod c`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let (r, c, n) = (spec.latent_dim, spec.n_classes, spec.n_samples);
    let gap = spec.cluster_separation * spec.noise_sigma;
    let centers = place_centers(r, c, gap, &mut rng);

    let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma is finite and nonnegative");
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    let latent = DMatrix::from_fn(r, n, |k, j| {
        centers[(k, labels[j])] + noise.sample(&mut rng)
    });
    let unit = Uniform::new(0.0, 1.0).expect("unit interval is valid");
    let mut view_factors = Vec::with_capacity(spec.view_dims.len());
    let mut views = Vec::with_capacity(spec.view_dims.len());
    for &d in &spec.view_dims {
        let w = DMatrix::from_fn(d, r, |_, _| unit.sample(&mut rng));
        let x = &w * &latent + DMatrix::from_fn(d, n, |_, _| noise.sample(&mut rng));
        view_factors.push(w);
        views.push(x);
    }
    Ok(SyntheticData {
        raw: RawDataset {
            views,
            labels,
            class_count: c,
        },
        view_factors,
        latent,
        centers,
    })
}

/// Axis-aligned simplex corners when `c ≤ r` (pairwise distance exactly
/// `gap`), otherwise rejection-sampled Gaussian points at least `gap` apart.
fn place_centers(r: usize, c: usize, gap: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    if c <= r {
        let side = gap / std::f64::consts::SQRT_2;
        return DMatrix::from_fn(r, c, |k, j| if k == j { side } else { 0.0 });
    }
    let normal = Normal::new(0.0, gap.max(f64::MIN_POSITIVE)).expect("finite");
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(c);
    while centers.len() < c {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..1000 {
            let p: Vec<f64> = (0..r).map(|_| normal.sample(rng)).collect();
            let nearest = centers
                .iter()
                .map(|q| {
                    q.iter()
                        .zip(&p)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            if nearest >= gap {
                best = Some((nearest, p));
                break;
            }
            if best.as_ref().is_none_or(|(d, _)| nearest > *d) {
                best = Some((nearest, p));
            }
        }
        centers.push(best.expect("at least one draw").1);
    }
    DMatrix::from_fn(r, c, |k, j| centers[j][k])
}
