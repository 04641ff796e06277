use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lmssc::check::check_dataset;
use lmssc::data::{generate_synthetic, save, SyntheticSpec};
use lmssc::experiment::{
    emit, emit_sweep, format_table, run, sweep, DatasetSource, ExperimentConfig, Method, SweepGrid,
};

#[derive(Parser)]
#[command(
    name = "lmssc",
    version,
    about = "Latent multi-view semi-supervised classification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the method × label rate × trial grid and write a report.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Output directory for report.json, table.txt and config.json.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Evaluate LMSSC over a beta × gamma × latent-dimension grid.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        #[arg(long = "dims", value_delimiter = ',')]
        latent_dims: Option<Vec<usize>>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Write a planted synthetic dataset as view/label files plus a manifest.
    Synth {
        #[command(flatten)]
        spec: SynthArgs,
        #[arg(long, default_value = "synthetic")]
        name: String,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fit once and check the model invariants on a dataset.
    Check {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Label rate of the split used for the check fit.
        #[arg(long, default_value_t = 0.3)]
        rate: f64,
    },
}

#[derive(Args, Default)]
struct SynthArgs {
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    /// Dimension of the planted latent space.
    #[arg(long)]
    true_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    view_dims: Option<Vec<usize>>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    data_seed: Option<u64>,
}

impl SynthArgs {
    fn apply(&self, spec: &mut SyntheticSpec) {
        set(&mut spec.n_samples, self.samples);
        set(&mut spec.n_classes, self.classes);
        set(&mut spec.latent_dim, self.true_dim);
        set(&mut spec.view_dims, self.view_dims.clone());
        set(&mut spec.cluster_separation, self.separation);
        set(&mut spec.noise_sigma, self.noise);
        set(&mut spec.rng_seed, self.data_seed);
    }

    fn any(&self) -> bool {
        self.samples.is_some()
            || self.classes.is_some()
            || self.true_dim.is_some()
            || self.view_dims.is_some()
            || self.separation.is_some()
            || self.noise.is_some()
            || self.data_seed.is_some()
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration (TOML or JSON); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest. Without it the planted synthetic generator is used.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthArgs,
    /// Comma-separated subset of lmssc, amgl, mlan, gfhf:<view>.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Trial t uses seed base + t for its split and initialization.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Neighbor count k, shared by the learned and the fixed k-NN graphs.
    #[arg(long, short)]
    k: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, short)]
    jobs: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text)?,
        _ => toml::from_str(&text)?,
    };
    // Manifest paths in a config file are relative to that file.
    if let DatasetSource::Manifest(m) = &mut cfg.dataset {
        if m.is_relative() {
            *m = path.parent().unwrap_or(Path::new(".")).join(&*m);
        }
    }
    Ok(cfg)
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => read_config(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(m) = &self.manifest {
            if self.synth.any() {
                bail!("--manifest cannot be combined with synthetic data flags");
            }
            cfg.dataset = DatasetSource::Manifest(m.clone());
        } else if self.synth.any() {
            let mut spec = match &cfg.dataset {
                DatasetSource::Synthetic(s) => s.clone(),
                DatasetSource::Manifest(_) => SyntheticSpec::default(),
            };
            self.synth.apply(&mut spec);
            cfg.dataset = DatasetSource::Synthetic(spec);
        }
        set(&mut cfg.methods, self.methods.clone());
        set(&mut cfg.label_rates, self.rates.clone());
        set(&mut cfg.trials, self.trials);
        set(&mut cfg.base_seed, self.seed);
        set(&mut cfg.lmssc.beta, self.beta);
        set(&mut cfg.lmssc.gamma, self.gamma);
        set(&mut cfg.lmssc.latent_dim, self.latent_dim);
        set(&mut cfg.lmssc.max_iters, self.max_iters);
        set(&mut cfg.lmssc.f_rel_tol, self.tol);
        set(&mut cfg.jobs, self.jobs);
        if let Some(k) = self.k {
            cfg.lmssc.neighbor_count = k;
            cfg.knn.k = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { exp, out } => {
            let cfg = exp.resolve()?;
            let report = run(&cfg)?;
            emit(&report, &out)?;
            print!("{}", format_table(&report));
            for r in report.records.iter().filter(|r| r.error.is_some()) {
                eprintln!(
                    "error: {} rate {} trial {}: {}",
                    r.method,
                    r.rate,
                    r.trial,
                    r.error.as_deref().unwrap_or_default()
                );
            }
            Ok(!report.has_errors())
        }
        Command::Sweep {
            exp,
            betas,
            gammas,
            latent_dims,
            out,
        } => {
            let mut cfg = exp.resolve()?;
            let mut grid = cfg.sweep.take().unwrap_or(SweepGrid {
                betas: vec![cfg.lmssc.beta],
                gammas: vec![cfg.lmssc.gamma],
                latent_dims: vec![cfg.lmssc.latent_dim],
            });
            set(&mut grid.betas, betas);
            set(&mut grid.gammas, gammas);
            set(&mut grid.latent_dims, latent_dims);
            cfg.sweep = Some(grid);
            let report = sweep(&cfg)?;
            emit_sweep(&report, &cfg, &out)?;
            println!("beta\tgamma\tdim\trate\taccuracy");
            for r in &report.rows {
                println!(
                    "{}\t{}\t{}\t{}\t{}",
                    r.beta,
                    r.gamma,
                    r.latent_dim,
                    r.rate,
                    lmssc::experiment::format_cell(r.mean, r.std)
                );
            }
            if let Some(b) = &report.best {
                println!(
                    "best: beta {} gamma {} dim {} rate {} -> {}",
                    b.beta,
                    b.gamma,
                    b.latent_dim,
                    b.rate,
                    lmssc::experiment::format_cell(b.mean, b.std)
                );
            }
            Ok(!report.has_errors())
        }
        Command::Synth { spec, name, out } => {
            let mut s = SyntheticSpec::default();
            spec.apply(&mut s);
            let data = generate_synthetic(&s)?;
            let manifest = save(&out, &name, &data.raw)?;
            println!("{}", manifest.display());
            Ok(true)
        }
        Command::Check { exp, rate } => {
            let cfg = exp.resolve()?;
            let data = cfg.dataset.load()?;
            let report = check_dataset(&data, &cfg.lmssc, rate, cfg.base_seed)?;
            for item in &report.items {
                let status = if item.passed { "ok" } else { "FAIL" };
                println!("{status:<4} {}: {}", item.name, item.detail);
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
