//! The `train` sweep: losses × noise levels × seeds, run in parallel.

use std::fs;
use std::path::{Path, PathBuf};

use noisyloss::data::{inject_symmetric_noise, Dataset, Standardizer};
use noisyloss::trainer::{self, checkpoint, SeedSummary};
use noisyloss::{Error, LossSpec, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone)]
pub struct Run {
    pub loss: LossSpec,
    pub loss_index: usize,
    pub eta: f64,
    pub noise_index: usize,
    pub seed: u64,
}

impl Run {
    /// File-name-safe identifier, unique within a sweep.
    pub fn id(&self) -> String {
        format!(
            "{}_eta{}_seed{}",
            crate::slug(&self.loss.key()),
            self.eta,
            self.seed
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigSummary {
    pub loss: String,
    pub eta: f64,
    pub seeds: Vec<u64>,
    pub final_test_accuracy: SeedSummary,
    pub final_train_accuracy: SeedSummary,
    pub final_false_label_accuracy: Option<SeedSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub configurations: Vec<ConfigSummary>,
}

/// A failure tagged with the run it happened in.
#[derive(Debug)]
pub struct RunFailure {
    pub run: String,
    pub error: Error,
}

struct RunResult {
    final_test: f64,
    final_train: f64,
    final_false_label: Option<f64>,
}

pub fn plan(cfg: &ExperimentConfig, specs: &[LossSpec]) -> Vec<Run> {
    let mut runs = Vec::new();
    for (loss_index, loss) in specs.iter().enumerate() {
        for (noise_index, &eta) in cfg.noise_levels.iter().enumerate() {
            for &seed in &cfg.seeds {
                runs.push(Run {
                    loss: *loss,
                    loss_index,
                    eta,
                    noise_index,
                    seed,
                });
            }
        }
    }
    runs
}

fn io(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs the sweep and writes `metrics/<run>.csv`, `models/<run>.ckpt`,
/// `standardizer.json`, `config.json` and `summary.json` under the output
/// directory. `jobs = 0` uses one worker per core.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize) -> std::result::Result<Summary, RunFailure> {
    let setup = |error| RunFailure {
        run: "setup".into(),
        error,
    };
    let (train_raw, test_raw) = cfg.load_datasets().map_err(setup)?;
    let specs = cfg.validate(train_raw.classes()).map_err(setup)?;
    let std = Standardizer::fit(&train_raw).map_err(setup)?;
    let train = std.transform(&train_raw).map_err(setup)?;
    let test = std.transform(&test_raw).map_err(setup)?;
    let noisy: Vec<Dataset> = cfg
        .noise_levels
        .iter()
        .enumerate()
        .map(|(i, &eta)| inject_symmetric_noise(&train, eta, &mut cfg.noise_rng(i)))
        .collect::<Result<_>>()
        .map_err(setup)?;

    let out = &cfg.output_dir;
    let metrics_dir = out.join("metrics");
    let models_dir = out.join("models");
    for dir in [&metrics_dir, &models_dir] {
        fs::create_dir_all(dir).map_err(|e| setup(io(dir, e)))?;
    }
    std.write(&out.join("standardizer.json")).map_err(setup)?;
    write_json(&out.join("config.json"), cfg).map_err(setup)?;

    let runs = plan(cfg, &specs);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| setup(Error::Config(format!("thread pool: {e}"))))?;
    // Collected in plan order so the reported failure is the first planned one.
    let outcomes: Vec<_> = pool.install(|| {
        runs.par_iter()
            .map(|run| {
                execute(
                    cfg,
                    run,
                    &noisy[run.noise_index],
                    &test,
                    &metrics_dir,
                    &models_dir,
                )
                .map_err(|error| RunFailure {
                    run: run.id(),
                    error,
                })
            })
            .collect()
    });
    let results = outcomes
        .into_iter()
        .collect::<std::result::Result<Vec<RunResult>, _>>()?;

    let summary = summarize(cfg, &specs, &runs, &results);
    write_json(&out.join("summary.json"), &summary).map_err(setup)?;
    Ok(summary)
}

fn execute(
    cfg: &ExperimentConfig,
    run: &Run,
    train: &Dataset,
    test: &Dataset,
    metrics_dir: &Path,
    models_dir: &Path,
) -> Result<RunResult> {
    let tc = cfg.train_config(run.loss, run.seed);
    let outcome = trainer::train(train, test, &cfg.hidden, &tc)?;
    let id = run.id();
    trainer::write_metrics_csv(&outcome.history, &metrics_dir.join(format!("{id}.csv")))?;
    checkpoint::save(&outcome.model, &models_dir.join(format!("{id}.ckpt")))?;
    // Zero epochs leave the initial model, which is scored directly.
    let (final_test, final_train, final_false_label) = match outcome.history.last() {
        Some(row) => (
            row.test_accuracy,
            row.train_accuracy,
            row.false_label_accuracy,
        ),
        None => (
            trainer::evaluate(&outcome.model, test, false)?,
            trainer::evaluate(&outcome.model, train, false)?,
            if train.masked_count() > 0 {
                Some(trainer::evaluate(&outcome.model, train, true)?)
            } else {
                None
            },
        ),
    };
    Ok(RunResult {
        final_test,
        final_train,
        final_false_label,
    })
}

fn summarize(
    cfg: &ExperimentConfig,
    specs: &[LossSpec],
    runs: &[Run],
    results: &[RunResult],
) -> Summary {
    let mut configurations = Vec::new();
    for (li, spec) in specs.iter().enumerate() {
        for (ni, &eta) in cfg.noise_levels.iter().enumerate() {
            let group: Vec<&RunResult> = runs
                .iter()
                .zip(results)
                .filter(|(r, _)| r.loss_index == li && r.noise_index == ni)
                .map(|(_, res)| res)
                .collect();
            let pick = |f: fn(&RunResult) -> f64| {
                SeedSummary::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let false_label: Option<Vec<f64>> = group.iter().map(|r| r.final_false_label).collect();
            configurations.push(ConfigSummary {
                loss: spec.key(),
                eta,
                seeds: cfg.seeds.clone(),
                final_test_accuracy: pick(|r| r.final_test),
                final_train_accuracy: pick(|r| r.final_train),
                final_false_label_accuracy: false_label.map(|v| SeedSummary::of(&v)),
            });
        }
    }
    Summary { configurations }
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| io(path, e))
}
