//! JSON experiment description for the `train` sweep.

use std::fs;
use std::path::{Path, PathBuf};

use noisyloss::data::{self, BlobModel, Dataset};
use noisyloss::trainer::{Schedule, TrainConfig};
use noisyloss::{Error, LossSpec, Result, RngStream};
use serde::{Deserialize, Serialize};

/// RNG stream of the synthetic class means and samples.
const DATA_STREAM: u64 = 0;
/// Noise for level `i` uses stream `NOISE_STREAM_BASE + i`.
const NOISE_STREAM_BASE: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Synth {
        classes: usize,
        dim: usize,
        separation: f64,
        train_per_class: usize,
        test_per_class: usize,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    Csv {
        train: PathBuf,
        test: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: String,
    },
}

pub fn default_label_column() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSection {
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    pub schedule: Schedule,
    #[serde(default = "default_true")]
    pub shuffle: bool,
}

fn default_batch_size() -> usize {
    32
}

fn default_momentum() -> f64 {
    0.95
}

fn default_true() -> bool {
    true
}

fn default_noise_levels() -> Vec<f64> {
    vec![0.0]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_hidden() -> Vec<usize> {
    vec![64, 32]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// One sweep: every loss × noise level × seed is one training run. `seed`
/// drives synthetic data and noise injection; `seeds` drive initialization
/// and shuffling of the individual runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_noise_levels")]
    pub noise_levels: Vec<f64>,
    pub losses: Vec<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    pub trainer: TrainerSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Synthetic ten-class blobs with the given losses and initial rate.
    pub fn synth_default(losses: Vec<String>, initial_lr: f64) -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Synth {
                classes: 10,
                dim: 20,
                separation: 3.6,
                train_per_class: 500,
                test_per_class: 100,
            },
            noise_levels: default_noise_levels(),
            losses,
            seeds: default_seeds(),
            hidden: default_hidden(),
            trainer: TrainerSection {
                epochs: 40,
                batch_size: default_batch_size(),
                momentum: default_momentum(),
                weight_decay: 0.0,
                schedule: Schedule::exponential(initial_lr, 0.95),
                shuffle: true,
            },
            seed: 0,
            output_dir: default_output_dir(),
        }
    }

    /// Parsed loss specs, with every schema invariant checked.
    pub fn validate(&self, classes: usize) -> Result<Vec<LossSpec>> {
        if self.losses.is_empty() {
            return Err(Error::Config("at least one loss is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let Some(eta) = self.noise_levels.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::Config(format!(
                "noise level {eta} is outside [0, 1]"
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be >= 1".into()));
        }
        let specs = self
            .losses
            .iter()
            .map(|k| LossSpec::from_key(k, classes))
            .collect::<Result<Vec<_>>>()?;
        for spec in &specs {
            self.train_config(*spec, 0).validate()?;
        }
        Ok(specs)
    }

    pub fn train_config(&self, loss: LossSpec, seed: u64) -> TrainConfig {
        let t = &self.trainer;
        TrainConfig {
            loss,
            epochs: t.epochs,
            batch_size: t.batch_size,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
            schedule: t.schedule.clone(),
            seed,
            shuffle: t.shuffle,
        }
    }

    /// Raw (unstandardized) train and test sets.
    pub fn load_datasets(&self) -> Result<(Dataset, Dataset)> {
        match &self.dataset {
            DatasetSource::Synth {
                classes,
                dim,
                separation,
                train_per_class,
                test_per_class,
            } => {
                let mut rng = RngStream::derive(self.seed, DATA_STREAM);
                let model = BlobModel::new(*classes, *dim, *separation, &mut rng)?;
                let train = model.sample(*train_per_class, &mut rng);
                let test = model.sample(*test_per_class, &mut rng);
                Ok((train, test))
            }
            DatasetSource::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => {
                let train = data::load_idx(train_images, train_labels)?;
                let test = data::load_idx(test_images, test_labels)?;
                align_classes(train, test)
            }
            DatasetSource::Csv {
                train,
                test,
                label_column,
            } => {
                let train = data::load_csv(train, label_column)?;
                let test = data::load_csv(test, label_column)?;
                align_classes(train, test)
            }
        }
    }

    pub fn noise_rng(&self, level_index: usize) -> RngStream {
        RngStream::derive(self.seed, NOISE_STREAM_BASE + level_index as u64)
    }
}

/// Class counts inferred from files may differ if a split misses the top class.
fn align_classes(train: Dataset, test: Dataset) -> Result<(Dataset, Dataset)> {
    let classes = train.classes().max(test.classes());
    Ok((train.with_classes(classes)?, test.with_classes(classes)?))
}
