//! `noisyloss` command-line front end.
//!
//! Exit codes: 0 ok, 1 I/O, 2 config or usage, 3 solver failure, 4 divergence.

mod config;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use noisyloss::analysis::{self, linspace};
use noisyloss::bias_solver::{self, BiasProblem};
use noisyloss::data::{self, Dataset, NoiseManifest, Standardizer};
use noisyloss::trainer::{self, checkpoint, Schedule};
use noisyloss::{Error, LossSpec, RngStream};
use serde_json::json;

use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(
    name = "noisyloss",
    version,
    about = "Noise-robust losses: curves, bias solving and training sweeps"
)]
struct Cli {
    /// Seed for every random draw of the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parallel training runs (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// JSON experiment config for `train`; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learning curve, initial histogram and overlap as CSV.
    Curves(CurvesArgs),
    /// Output bias for a target mean correct-class activation, as JSON.
    SolveBias(SolveBiasArgs),
    /// Symmetric label noise with a provenance manifest.
    InjectNoise(InjectNoiseArgs),
    /// Loss × noise × seed sweep.
    Train(TrainArgs),
    /// Accuracy of a saved checkpoint.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct CurvesArgs {
    /// Loss key, e.g. `ce` or `gence:q=0.7`, without a bias.
    #[arg(long)]
    loss: String,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    /// Mean of the initial `z_k` distribution, i.e. the output bias.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    shift: f64,
    /// Rejected: the bias is given with `--shift`.
    #[arg(long, hide = true, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long, default_value_t = analysis::DEFAULT_GRID.0, allow_hyphen_values = true)]
    grid_min: f64,
    #[arg(long, default_value_t = analysis::DEFAULT_GRID.1, allow_hyphen_values = true)]
    grid_max: f64,
    #[arg(long, default_value_t = analysis::DEFAULT_GRID.2)]
    grid_points: usize,
    #[arg(long, default_value_t = analysis::DEFAULT_CURVE_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    bins: usize,
}

#[derive(Debug, Args)]
struct SolveBiasArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    target: f64,
    #[arg(long, default_value_t = bias_solver::DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = bias_solver::DEFAULT_TOLERANCE)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV dataset, or IDX image file when `--labels` is given.
    #[arg(long)]
    data: PathBuf,
    /// IDX label file.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    label_column: String,
}

#[derive(Debug, Args)]
struct InjectNoiseArgs {
    #[command(flatten)]
    input: DataArgs,
    #[arg(long)]
    eta: f64,
    /// Output CSV, or IDX image file when `--output-labels` is given.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    output_labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Loss key; repeatable. Replaces the config's list.
    #[arg(long = "loss")]
    losses: Vec<String>,
    /// Noise level; repeatable. Replaces the config's list.
    #[arg(long = "noise")]
    noise_levels: Vec<f64>,
    /// Run seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Initial learning rate (required without `--config`).
    #[arg(long)]
    lr: Option<f64>,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    input: DataArgs,
    /// `standardizer.json` written by `train`.
    #[arg(long)]
    standardizer: Option<PathBuf>,
    /// Score the noise-masked rows against their clean labels.
    #[arg(long)]
    against_clean: bool,
}

/// A command failure with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    error: Error,
    context: Option<String>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure {
            error,
            context: None,
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self.error {
            Error::Io { .. } | Error::Parse { .. } => 1,
            Error::Config(_) | Error::Domain(_) | Error::Shape(_) => 2,
            Error::Bracket { .. } | Error::Precision { .. } | Error::Numeric(_) => 3,
            Error::Divergence { .. } => 4,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Curves(a) => cmd_curves(&cli, a),
        Command::SolveBias(a) => cmd_solve_bias(&cli, a),
        Command::InjectNoise(a) => cmd_inject_noise(&cli, a),
        Command::Train(a) => cmd_train(&cli, a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f.context {
                Some(ctx) => eprintln!("error [{ctx}]: {}", f.error),
                None => eprintln!("error: {}", f.error),
            }
            if f.code() == 2 {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            ExitCode::from(f.code())
        }
    }
}

fn out_dir(cli: &Cli) -> Result<PathBuf, Error> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

fn slug(key: &str) -> String {
    key.chars()
        .filter_map(|ch| match ch {
            ':' | ',' => Some('_'),
            '=' => None,
            c => Some(c),
        })
        .collect()
}

fn cmd_curves(cli: &Cli, a: &CurvesArgs) -> CmdResult {
    if let Some(eps) = a.eps {
        return Err(Error::Config(format!(
            "--eps {eps}: curves take an unbiased loss; give the bias as --shift"
        ))
        .into());
    }
    let spec = LossSpec::from_key(&a.loss, a.classes)?;
    if a.grid_points < 2
        || a.bins == 0
        || a.grid_min.partial_cmp(&a.grid_max) != Some(std::cmp::Ordering::Less)
    {
        return Err(Error::Config(
            "need grid-min < grid-max, grid-points >= 2 and bins >= 1".into(),
        )
        .into());
    }
    let seed = cli.seed.unwrap_or(0);
    let grid = linspace(a.grid_min, a.grid_max, a.grid_points);
    let table = analysis::learning_curve(
        &spec,
        a.classes,
        &grid,
        a.samples,
        &mut RngStream::derive(seed, 0),
    )?;
    let edges = linspace(a.grid_min, a.grid_max, a.bins + 1);
    let hist = analysis::initial_histogram(
        a.classes,
        a.shift,
        a.samples,
        &edges,
        &mut RngStream::derive(seed, 1),
    )?;
    let overlap = analysis::overlap_metric(
        &spec,
        a.classes,
        a.shift,
        a.samples,
        &mut RngStream::derive(seed, 2),
    )?;

    let dir = out_dir(cli)?;
    let name = format!("{}_c{}", slug(&spec.key()), a.classes);
    let curve_path = dir.join(format!("curve_{name}.csv"));
    let hist_path = dir.join(format!("histogram_c{}_shift{}.csv", a.classes, a.shift));
    let overlap_path = dir.join(format!("overlap_{name}_shift{}.csv", a.shift));
    analysis::write_curve_csv(&table, &curve_path)?;
    analysis::write_histogram_csv(&hist, &hist_path)?;
    let body = format!(
        "loss,classes,shift,n_samples,overlap\n{},{},{},{},{overlap}\n",
        spec.key(),
        a.classes,
        a.shift,
        a.samples
    );
    fs::write(&overlap_path, body).map_err(|source| Error::Io {
        path: overlap_path.clone(),
        source,
    })?;
    for p in [&curve_path, &hist_path, &overlap_path] {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_solve_bias(cli: &Cli, a: &SolveBiasArgs) -> CmdResult {
    let problem = BiasProblem {
        n_samples: a.samples,
        tolerance: a.tolerance,
        ..BiasProblem::new(a.classes, a.target)
    };
    let mut rng = RngStream::new(cli.seed.unwrap_or(0));
    let s = bias_solver::solve_bias(&problem, &mut rng)?;
    let doc = json!({
        "classes": a.classes,
        "target_mean_activation": a.target,
        "n_samples": a.samples,
        "epsilon": s.epsilon,
        "mean_activation": s.mean_activation,
        "standard_error": s.standard_error,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    Ok(())
}

/// Loads a dataset and, if its manifest sidecar exists, the noise bookkeeping.
fn load_data(a: &DataArgs) -> Result<Dataset, Error> {
    let (ds, sidecar) = match &a.labels {
        Some(labels) => (
            data::load_idx(&a.data, labels)?,
            NoiseManifest::sidecar_path(labels),
        ),
        None => (
            data::load_csv(&a.data, &a.label_column)?,
            NoiseManifest::sidecar_path(&a.data),
        ),
    };
    if sidecar.exists() {
        NoiseManifest::read(&sidecar)?.apply(ds)
    } else {
        Ok(ds)
    }
}

fn cmd_inject_noise(cli: &Cli, a: &InjectNoiseArgs) -> CmdResult {
    let seed = cli.seed.unwrap_or(0);
    let ds = load_data(&a.input)?;
    let noisy = data::inject_symmetric_noise(&ds, a.eta, &mut RngStream::new(seed))?;
    let manifest_path = match &a.output_labels {
        Some(labels) => {
            data::write_idx(&noisy, &a.output, labels)?;
            NoiseManifest::sidecar_path(labels)
        }
        None => {
            data::write_csv(&noisy, &a.output, &a.input.label_column)?;
            NoiseManifest::sidecar_path(&a.output)
        }
    };
    let manifest = NoiseManifest::describe(&noisy, a.eta, seed);
    manifest.write(&manifest_path)?;
    println!(
        "{}",
        json!({ "masked_count": manifest.masked_count, "n": manifest.n, "manifest": manifest_path })
    );
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> CmdResult {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::read(path)?,
        None => {
            let lr = a.lr.ok_or_else(|| {
                Error::Config("train needs --config or an initial learning rate via --lr".into())
            })?;
            ExperimentConfig::synth_default(Vec::new(), lr)
        }
    };
    if !a.losses.is_empty() {
        cfg.losses = a.losses.clone();
    }
    if !a.noise_levels.is_empty() {
        cfg.noise_levels = a.noise_levels.clone();
    }
    if !a.seeds.is_empty() {
        cfg.seeds = a.seeds.clone();
    }
    if let Some(e) = a.epochs {
        cfg.trainer.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.trainer.schedule = Schedule {
            initial_lr: lr,
            ..cfg.trainer.schedule
        };
    }
    if let Some(h) = &a.hidden {
        cfg.hidden = h.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    let summary = sweep::run_sweep(&cfg, cli.jobs).map_err(|f| Failure {
        error: f.error,
        context: Some(f.run),
    })?;
    for c in &summary.configurations {
        println!(
            "{:<24} eta={:<5} test {:.4} ± {:.4}",
            c.loss, c.eta, c.final_test_accuracy.mean, c.final_test_accuracy.stderr
        );
    }
    println!("{}", cfg.output_dir.join("summary.json").display());
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> CmdResult {
    let model = checkpoint::load(&a.model)?;
    let mut ds = load_data(&a.input)?;
    if model.classes() > ds.classes() {
        ds = ds.with_classes(model.classes())?;
    }
    if let Some(p) = &a.standardizer {
        ds = Standardizer::read(p)?.transform(&ds)?;
    }
    let accuracy = trainer::evaluate(&model, &ds, a.against_clean)?;
    println!(
        "{}",
        json!({ "accuracy": accuracy, "n": ds.len(), "against_clean": a.against_clean, "model": Path::new(&a.model) })
    );
    Ok(())
}
