//! MLP training with per-example losses from [`crate::losses`].
//!
//! One epoch: shuffle (seeded by `(seed, epoch)`), iterate mini-batches
//! (the last one may be short), take the output errors from
//! [`crate::losses::eval`] with the labeled-position bias of the loss spec,
//! backpropagate and apply [`sgd_step`] at the epoch's learning rate.
//! Evaluation always uses the plain forward pass; the bias needs a label and
//! exists only inside the loss.

pub mod checkpoint;
mod mlp;
mod schedule;

use std::path::Path;

use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use mlp::{init_mlp, sgd_step, Dense, ForwardCache, Gradients, MlpModel, Velocity};
pub use schedule::{lr_at, Schedule, ScheduleKind};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{self, Label, LossSpec};
use crate::numerics::{argmax, mean_and_stderr, RngStream};

/// Hidden layer sizes of the MLP1024 network.
pub const MLP1024_HIDDEN: [usize; 3] = [1024, 512, 512];

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM_BASE: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub schedule: Schedule,
    pub seed: u64,
    pub shuffle: bool,
}

impl TrainConfig {
    /// SGD settings used for MLP1024: momentum 0.95, batch 32, no weight
    /// decay, learning rate × 0.95 per epoch. The initial rate has no default.
    pub fn mlp_defaults(loss: LossSpec, initial_lr: f64, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            loss,
            epochs,
            batch_size: 32,
            momentum: 0.95,
            weight_decay: 0.0,
            schedule: Schedule::exponential(initial_lr, 0.95),
            seed,
            shuffle: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.schedule.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Metrics recorded after each epoch; `epoch` counts completed epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Accuracy on the noise-masked training rows against their clean labels.
    pub false_label_accuracy: Option<f64>,
    pub mean_train_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub history: Vec<MetricsRow>,
}

pub fn train(
    train_ds: &Dataset,
    test_ds: &Dataset,
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_ds.classes() != test_ds.classes() || train_ds.dim() != test_ds.dim() {
        return Err(Error::Shape(format!(
            "train set has {} classes / {} features, test set {} / {}",
            train_ds.classes(),
            train_ds.dim(),
            test_ds.classes(),
            test_ds.dim()
        )));
    }
    if train_ds.is_empty() {
        return Err(Error::Domain("empty training set".into()));
    }
    let classes = train_ds.classes();
    let mut model = init_mlp(
        train_ds.dim(),
        hidden,
        classes,
        &mut RngStream::derive(cfg.seed, INIT_STREAM),
    )?;
    let mut velocity = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..train_ds.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.lr_at(epoch);
        if cfg.shuffle {
            order.sort_unstable();
            let mut rng = RngStream::derive(cfg.seed, SHUFFLE_STREAM_BASE + epoch as u64);
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for (batch_idx, rows) in order.chunks(cfg.batch_size).enumerate() {
            let x = train_ds.features().select(Axis(0), rows);
            let (z, cache) = model.forward(&x)?;
            let mut delta = Array2::zeros(z.raw_dim());
            let mut batch_loss = 0.0;
            for (i, &row) in rows.iter().enumerate() {
                let label = Label::new(train_ds.labels()[row], classes)?;
                let z_row = z.row(i);
                let out = losses::eval(&cfg.loss, z_row.as_slice().unwrap(), label)?;
                batch_loss += out.value;
                delta
                    .row_mut(i)
                    .assign(&ndarray::ArrayView1::from(&out.delta));
            }
            if !batch_loss.is_finite() || delta.iter().any(|d| !d.is_finite()) {
                return Err(Error::Divergence {
                    epoch: epoch + 1,
                    batch: batch_idx,
                });
            }
            loss_sum += batch_loss;
            let grads = model.backward_from_delta(&cache, &delta)?;
            sgd_step(
                &mut model,
                &grads,
                lr,
                cfg.momentum,
                cfg.weight_decay,
                &mut velocity,
            );
        }
        let false_label_accuracy = if train_ds.masked_count() > 0 {
            Some(evaluate(&model, train_ds, true)?)
        } else {
            None
        };
        history.push(MetricsRow {
            epoch: epoch + 1,
            train_accuracy: evaluate(&model, train_ds, false)?,
            test_accuracy: evaluate(&model, test_ds, false)?,
            false_label_accuracy,
            mean_train_loss: loss_sum / train_ds.len() as f64,
            learning_rate: lr,
        });
    }
    Ok(TrainOutcome { model, history })
}

/// Arg-max accuracy (ties to the lowest class) against the dataset labels,
/// or, with `against_clean`, against the clean labels of the noise-masked rows.
pub fn evaluate(model: &MlpModel, ds: &Dataset, against_clean: bool) -> Result<f64> {
    const CHUNK: usize = 1024;
    if model.classes() != ds.classes() {
        return Err(Error::Shape(format!(
            "model predicts {} classes, dataset has {}",
            model.classes(),
            ds.classes()
        )));
    }
    let selected: Vec<usize> = if against_clean {
        (0..ds.len()).filter(|&i| ds.noise_mask()[i]).collect()
    } else {
        (0..ds.len()).collect()
    };
    if selected.is_empty() {
        return Err(Error::Domain(if against_clean {
            "false-label accuracy needs at least one noise-masked example".into()
        } else {
            "cannot evaluate on an empty dataset".into()
        }));
    }
    let truth = if against_clean {
        ds.clean_labels()
    } else {
        ds.labels()
    };
    let mut correct = 0usize;
    for rows in selected.chunks(CHUNK) {
        let batch = if against_clean {
            ds.features().select(Axis(0), rows)
        } else {
            ds.features()
                .slice(s![rows[0]..rows[0] + rows.len(), ..])
                .to_owned()
        };
        let z = model.predict(&batch)?;
        correct += z
            .rows()
            .into_iter()
            .zip(rows)
            .filter(|(zr, &i)| argmax(zr.as_slice().unwrap()) == truth[i])
            .count();
    }
    Ok(correct as f64 / selected.len() as f64)
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let io_err = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    for row in rows {
        w.serialize(row).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                location: crate::error::ParseLocation::Line(i as u64 + 2),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Mean and standard error of a final metric over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedSummary {
    pub mean: f64,
    pub stderr: f64,
    pub runs: usize,
}

impl SeedSummary {
    pub fn of(values: &[f64]) -> Self {
        let (mean, stderr) = mean_and_stderr(values);
        SeedSummary {
            mean,
            stderr,
            runs: values.len(),
        }
    }
}
