//! Learning curves `δ_k(z_k)` of a freshly initialized network.
//!
//! The correct-class pre-activation `z_k` is swept over a grid while the
//! other `c − 1` pre-activations are drawn from `N(0, 1)`. The expected
//! initial distribution of `z_k` is `N(ε, 1)`, so an output bias appears as a
//! shifted histogram rather than as a shifted curve. The overlap between the
//! two is measured as `E_{z_k ~ N(ε,1)} |δ_k|`.

use std::io::Write;
use std::path::Path;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::{self, Label, LossSpec};
use crate::numerics::{mean_and_stderr, RngStream};

pub const DEFAULT_GRID: (f64, f64, usize) = (-10.0, 10.0, 201);
pub const DEFAULT_CURVE_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveTable {
    pub loss_key: String,
    pub classes: usize,
    pub n_samples: usize,
    pub z_grid: Vec<f64>,
    pub mean_delta_k: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub classes: usize,
    pub shift: f64,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Mean of the binned data using bin centres.
    pub fn mean(&self) -> f64 {
        let weighted: f64 = self
            .counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&n, e)| n as f64 * 0.5 * (e[0] + e[1]))
            .sum();
        weighted / self.total() as f64
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn check_strictly_increasing(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(format!(
            "{what} must be finite and strictly increasing"
        )));
    }
    Ok(())
}

fn check_unbiased(spec: &LossSpec) -> Result<()> {
    if spec.epsilon != 0.0 {
        return Err(Error::Config(format!(
            "curve analysis takes an unbiased loss (got eps={}); pass the bias as the \
             distribution shift instead",
            spec.epsilon
        )));
    }
    spec.validate()
}

/// Pre-activations with the first (correct) class at `zk` and the rest `N(0,1)`.
fn draw_logits(rng: &mut RngStream, classes: usize, zk: f64, buf: &mut Vec<f64>) {
    buf.clear();
    buf.push(zk);
    buf.extend((1..classes).map(|_| rng.standard_normal()));
}

/// Mean `δ_k` at each grid point over `n_samples` draws of the other classes.
///
/// Grid points use independent sub-streams of `rng`, so the table does not
/// depend on the degree of parallelism.
pub fn learning_curve(
    spec: &LossSpec,
    classes: usize,
    z_grid: &[f64],
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<CurveTable> {
    check_unbiased(spec)?;
    if classes < 2 || z_grid.is_empty() || n_samples == 0 {
        return Err(Error::Domain(
            "learning curve needs classes >= 2, a non-empty grid and samples >= 1".into(),
        ));
    }
    check_strictly_increasing(z_grid, "z grid")?;
    let base = rng.next_u64();
    let label = Label::new(0, classes)?;
    let points: Vec<(f64, f64)> = z_grid
        .par_iter()
        .enumerate()
        .map(|(i, &zk)| {
            let mut rng = RngStream::derive(base, i as u64);
            let mut z = Vec::with_capacity(classes);
            let deltas = (0..n_samples)
                .map(|_| {
                    draw_logits(&mut rng, classes, zk, &mut z);
                    Ok(losses::eval(spec, &z, label)?.delta[0])
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(mean_and_stderr(&deltas))
        })
        .collect::<Result<_>>()?;
    let (mean_delta_k, stderr) = points.into_iter().unzip();
    Ok(CurveTable {
        loss_key: spec.key(),
        classes,
        n_samples,
        z_grid: z_grid.to_vec(),
        mean_delta_k,
        stderr,
    })
}

/// Histogram of `n_samples` draws of `N(epsilon, 1)`. Draws outside the edges
/// are counted in the first or last bin so that the counts sum to `n_samples`.
pub fn initial_histogram(
    classes: usize,
    epsilon: f64,
    n_samples: usize,
    bin_edges: &[f64],
    rng: &mut RngStream,
) -> Result<Histogram> {
    if bin_edges.len() < 2 {
        return Err(Error::Domain(
            "histogram needs at least two bin edges".into(),
        ));
    }
    check_strictly_increasing(bin_edges, "bin edges")?;
    let bins = bin_edges.len() - 1;
    let mut counts = vec![0u64; bins];
    for _ in 0..n_samples {
        let x = epsilon + rng.standard_normal();
        // First edge strictly greater than x, minus one.
        let bin = bin_edges.partition_point(|&e| e <= x).saturating_sub(1);
        counts[bin.min(bins - 1)] += 1;
    }
    Ok(Histogram {
        classes,
        shift: epsilon,
        bin_edges: bin_edges.to_vec(),
        counts,
    })
}

/// `E|δ_k|` with `z_k ~ N(epsilon, 1)` and the other classes `N(0, 1)`.
pub fn overlap_metric(
    spec: &LossSpec,
    classes: usize,
    epsilon: f64,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    check_unbiased(spec)?;
    if classes < 2 || n_samples == 0 {
        return Err(Error::Domain(
            "overlap needs classes >= 2 and samples >= 1".into(),
        ));
    }
    let label = Label::new(0, classes)?;
    let mut z = Vec::with_capacity(classes);
    let mut total = 0.0;
    for _ in 0..n_samples {
        let zk = epsilon + rng.standard_normal();
        draw_logits(rng, classes, zk, &mut z);
        total += losses::eval(spec, &z, label)?.delta[0].abs();
    }
    Ok(total / n_samples as f64)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_curve_csv(table: &CurveTable, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::from("z_k,mean_delta_k,stderr\n");
    for ((z, m), s) in table
        .z_grid
        .iter()
        .zip(&table.mean_delta_k)
        .zip(&table.stderr)
    {
        body.push_str(&format!("{z},{m},{s}\n"));
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_histogram_csv(hist: &Histogram, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::from("bin_left,bin_right,count\n");
    for (e, n) in hist.bin_edges.windows(2).zip(&hist.counts) {
        body.push_str(&format!("{},{},{n}\n", e[0], e[1]));
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
