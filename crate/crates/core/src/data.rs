//! Datasets with clean-label bookkeeping, file ingestion, standardization
//! and symmetric label noise.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseLocation, Result};
use crate::numerics::RngStream;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const STD_FLOOR: f64 = 1e-8;

/// Features, (possibly noisy) training labels, and the labels before noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    clean_labels: Vec<usize>,
    noise_mask: Vec<bool>,
    classes: usize,
    image_shape: Option<(usize, usize)>,
}

impl Dataset {
    /// A noise-free dataset; `classes` must exceed every label.
    pub fn new(features: Array2<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let n = labels.len();
        Self::with_noise(features, labels.clone(), labels, vec![false; n], classes)
    }

    pub fn with_noise(
        features: Array2<f64>,
        labels: Vec<usize>,
        clean_labels: Vec<usize>,
        noise_mask: Vec<bool>,
        classes: usize,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n || clean_labels.len() != n || noise_mask.len() != n {
            return Err(Error::Shape(format!(
                "{n} feature rows but {} labels, {} clean labels, {} mask entries",
                labels.len(),
                clean_labels.len(),
                noise_mask.len()
            )));
        }
        if classes == 0 {
            return Err(Error::Domain("dataset needs at least one class".into()));
        }
        if let Some(&bad) = labels.iter().chain(&clean_labels).find(|&&l| l >= classes) {
            return Err(Error::Domain(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        if let Some(i) = (0..n).find(|&i| !noise_mask[i] && labels[i] != clean_labels[i]) {
            return Err(Error::Domain(format!(
                "row {i} is not marked noisy but its label differs from the clean label"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            clean_labels,
            noise_mask,
            classes,
            image_shape: None,
        })
    }

    pub fn with_image_shape(mut self, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != self.dim() {
            return Err(Error::Shape(format!(
                "image shape {rows}x{cols} does not match {} features",
                self.dim()
            )));
        }
        self.image_shape = Some((rows, cols));
        Ok(self)
    }

    /// Widens the class count, e.g. when a file happens to miss the top class.
    pub fn with_classes(mut self, classes: usize) -> Result<Self> {
        if self.labels.iter().any(|&l| l >= classes) {
            return Err(Error::Domain(format!(
                "dataset has labels outside 0..{classes}"
            )));
        }
        self.classes = classes;
        Ok(self)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn clean_labels(&self) -> &[usize] {
        &self.clean_labels
    }

    pub fn noise_mask(&self) -> &[bool] {
        &self.noise_mask
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn masked_count(&self) -> usize {
        self.noise_mask.iter().filter(|&&m| m).count()
    }

    fn replace_features(&self, features: Array2<f64>) -> Dataset {
        Dataset {
            features,
            ..self.clone()
        }
    }
}

// ---------------------------------------------------------------------------
// IDX

struct IdxReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> IdxReader<'a> {
    fn err(&self, at: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            location: ParseLocation::Byte(at as u64),
            message: message.into(),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| self.err(self.pos, "truncated header"))?;
        self.pos += 4;
        Ok(u32::from_be_bytes(chunk.try_into().unwrap()))
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let magic = self.u32()?;
        if magic != expected {
            return Err(self.err(
                0,
                format!("bad magic 0x{magic:08x}, expected 0x{expected:08x}"),
            ));
        }
        Ok(())
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos + len;
        if end > self.bytes.len() {
            return Err(self.err(
                self.bytes.len(),
                format!(
                    "truncated data: expected {len} bytes after offset {}",
                    self.pos
                ),
            ));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads a big-endian IDX image/label pair. Pixels are scaled to `[0, 1]`
/// and the class count is one past the largest label.
pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<Dataset> {
    let image_bytes = read_file(image_path)?;
    let mut images = IdxReader {
        path: image_path,
        bytes: &image_bytes,
        pos: 0,
    };
    images.magic(IDX_IMAGES_MAGIC)?;
    let n = images.u32()? as usize;
    let rows = images.u32()? as usize;
    let cols = images.u32()? as usize;
    let pixels = images.payload(n * rows * cols)?;

    let label_bytes = read_file(label_path)?;
    let mut labels = IdxReader {
        path: label_path,
        bytes: &label_bytes,
        pos: 0,
    };
    labels.magic(IDX_LABELS_MAGIC)?;
    let n_labels = labels.u32()? as usize;
    if n_labels != n {
        return Err(labels.err(4, format!("{n_labels} labels but {n} images")));
    }
    let raw_labels = labels.payload(n)?;

    let features = Array2::from_shape_fn((n, rows * cols), |(i, j)| {
        f64::from(pixels[i * rows * cols + j]) / 255.0
    });
    let labels: Vec<usize> = raw_labels.iter().map(|&l| usize::from(l)).collect();
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(features, labels, classes)?.with_image_shape(rows, cols)
}

/// Writes `ds` as an IDX pair. Features must lie on the `k/255` grid.
pub fn write_idx(ds: &Dataset, image_path: &Path, label_path: &Path) -> Result<()> {
    let (rows, cols) = ds.image_shape().unwrap_or((1, ds.dim()));
    let mut images = Vec::with_capacity(16 + ds.len() * ds.dim());
    for word in [IDX_IMAGES_MAGIC, ds.len() as u32, rows as u32, cols as u32] {
        images.extend_from_slice(&word.to_be_bytes());
    }
    for &x in ds.features() {
        let scaled = x * 255.0;
        let byte = scaled.round();
        if !(0.0..=255.0).contains(&byte) || (scaled - byte).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "feature {x} is not representable as an IDX pixel"
            )));
        }
        images.push(byte as u8);
    }
    let mut labels = Vec::with_capacity(8 + ds.len());
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    for &l in ds.labels() {
        let byte = u8::try_from(l)
            .map_err(|_| Error::Domain(format!("label {l} does not fit in an IDX byte")))?;
        labels.push(byte);
    }
    fs::write(image_path, images).map_err(|e| Error::io(image_path, e))?;
    fs::write(label_path, labels).map_err(|e| Error::io(label_path, e))
}

// ---------------------------------------------------------------------------
// CSV

/// Reads a headed CSV; every column other than `label_column` is a feature.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        location: ParseLocation::Line(line),
        message,
    };
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(parse_err(1, "missing header row".into()));
    }
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| {
            Error::Config(format!(
                "no label column '{label_column}' in {}",
                path.display()
            ))
        })?;
    let dim = headers.len() - 1;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let record = record.map_err(|e| {
            let line = e.position().map_or(line, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if j == label_idx {
                let label: usize = cell.parse().map_err(|_| {
                    parse_err(
                        line,
                        format!("label '{cell}' is not a non-negative integer"),
                    )
                })?;
                labels.push(label);
            } else {
                let v: f64 = cell
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| {
                        parse_err(
                            line,
                            format!("column '{}': '{cell}' is not a number", &headers[j]),
                        )
                    })?;
                values.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(parse_err(2, "no data rows".into()));
    }
    let features = Array2::from_shape_vec((labels.len(), dim), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(features, labels, classes)
}

/// Writes features as `x0..x{d-1}` followed by the label column.
pub fn write_csv(ds: &Dataset, path: &Path, label_column: &str) -> Result<()> {
    let io_err = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("x{j}")).collect();
    header.push(label_column.to_string());
    writer.write_record(&header).map_err(io_err)?;
    for (row, label) in ds.features().rows().into_iter().zip(ds.labels()) {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        record.push(label.to_string());
        writer.write_record(&record).map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Synthetic blobs

/// Gaussian class blobs with unit covariance around means on a sphere.
#[derive(Debug, Clone)]
pub struct BlobModel {
    means: Array2<f64>,
}

impl BlobModel {
    /// Class means uniform on the sphere of radius `separation` in `dim` dimensions.
    pub fn new(classes: usize, dim: usize, separation: f64, rng: &mut RngStream) -> Result<Self> {
        if classes < 2 || dim < 2 {
            return Err(Error::Domain(format!(
                "blobs need at least 2 classes and 2 dimensions, got {classes} and {dim}"
            )));
        }
        let mut means = Array2::from_shape_simple_fn((classes, dim), || rng.standard_normal());
        for mut row in means.rows_mut() {
            let norm = row.dot(&row).sqrt();
            row.mapv_inplace(|v| v * separation / norm);
        }
        Ok(BlobModel { means })
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    /// `n_per_class` rows per class, grouped by class.
    pub fn sample(&self, n_per_class: usize, rng: &mut RngStream) -> Dataset {
        let (classes, dim) = self.means.dim();
        let n = classes * n_per_class;
        let labels: Vec<usize> = (0..n).map(|i| i / n_per_class.max(1)).collect();
        let mut features = Array2::zeros((n, dim));
        for (mut row, &label) in features.rows_mut().into_iter().zip(&labels) {
            for (x, m) in row.iter_mut().zip(self.means.row(label)) {
                *x = m + rng.standard_normal();
            }
        }
        Dataset::new(features, labels, classes).expect("labels below class count")
    }
}

pub fn synth_blobs(
    classes: usize,
    n_per_class: usize,
    dim: usize,
    separation: f64,
    rng: &mut RngStream,
) -> Result<Dataset> {
    Ok(BlobModel::new(classes, dim, separation, rng)?.sample(n_per_class, rng))
}

// ---------------------------------------------------------------------------
// Standardization

/// Per-feature mean and (population) standard deviation of a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Domain(
                "cannot standardize on an empty training set".into(),
            ));
        }
        let mean = train.features().mean_axis(Axis(0)).expect("non-empty");
        let std = train
            .features()
            .std_axis(Axis(0), 0.0)
            .mapv(|s| s.max(STD_FLOOR));
        Ok(Standardizer { mean, std })
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim() != self.mean.len() {
            return Err(Error::Shape(format!(
                "standardizer fitted on {} features, dataset has {}",
                self.mean.len(),
                ds.dim()
            )));
        }
        let features = (ds.features() - &self.mean) / &self.std;
        Ok(ds.replace_features(features))
    }

    /// JSON document `{"mean": [...], "std": [...]}`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let doc = StandardizerDoc {
            mean: self.mean.to_vec(),
            std: self.std.to_vec(),
        };
        let json = serde_json::to_string(&doc).expect("standardizer serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: StandardizerDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            location: ParseLocation::Line(e.line() as u64),
            message: e.to_string(),
        })?;
        if doc.mean.len() != doc.std.len() || doc.std.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                location: ParseLocation::Line(1),
                message: "mean and std must have equal length and std must be positive".into(),
            });
        }
        Ok(Standardizer {
            mean: Array1::from(doc.mean),
            std: Array1::from(doc.std),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct StandardizerDoc {
    mean: Vec<f64>,
    std: Vec<f64>,
}

/// Standardizes `train` and every dataset in `others` with the statistics of `train`.
pub fn standardize(train: &Dataset, others: &[Dataset]) -> Result<(Dataset, Vec<Dataset>)> {
    let s = Standardizer::fit(train)?;
    let others = others
        .iter()
        .map(|d| s.transform(d))
        .collect::<Result<_>>()?;
    Ok((s.transform(train)?, others))
}

// ---------------------------------------------------------------------------
// Label noise

/// Resamples the labels of exactly `round(eta·N)` rows, chosen without
/// replacement, uniformly over all classes (the original class included).
///
/// The expected fraction of wrong labels is therefore `eta·(c−1)/c`.
pub fn inject_symmetric_noise(ds: &Dataset, eta: f64, rng: &mut RngStream) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!(
            "noise fraction must be in [0, 1], got {eta}"
        )));
    }
    let n = ds.len();
    let count = (eta * n as f64).round() as usize;
    let mut chosen = rand::seq::index::sample(rng, n, count).into_vec();
    chosen.sort_unstable();

    let mut out = ds.clone();
    for i in chosen {
        out.labels[i] = rng.index(ds.classes());
        out.noise_mask[i] = true;
    }
    Ok(out)
}

/// Provenance sidecar for a noise-injected dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseManifest {
    pub eta: f64,
    pub seed: u64,
    pub classes: usize,
    pub n: usize,
    pub masked_count: usize,
    pub noisy_indices: Vec<usize>,
    pub clean_labels: Vec<usize>,
}

impl NoiseManifest {
    pub fn describe(ds: &Dataset, eta: f64, seed: u64) -> Self {
        NoiseManifest {
            eta,
            seed,
            classes: ds.classes(),
            n: ds.len(),
            masked_count: ds.masked_count(),
            noisy_indices: (0..ds.len()).filter(|&i| ds.noise_mask()[i]).collect(),
            clean_labels: ds.clean_labels().to_vec(),
        }
    }

    /// Restores the clean labels and noise mask onto a dataset read from disk.
    pub fn apply(&self, ds: Dataset) -> Result<Dataset> {
        if ds.len() != self.n {
            return Err(Error::Shape(format!(
                "manifest describes {} rows, dataset has {}",
                self.n,
                ds.len()
            )));
        }
        let mut mask = vec![false; self.n];
        for &i in &self.noisy_indices {
            *mask
                .get_mut(i)
                .ok_or_else(|| Error::Domain(format!("manifest index {i} out of range")))? = true;
        }
        let classes = self.classes.max(ds.classes());
        let shape = ds.image_shape();
        let restored = Dataset::with_noise(
            ds.features,
            ds.labels,
            self.clean_labels.clone(),
            mask,
            classes,
        )?;
        match shape {
            Some((r, c)) => restored.with_image_shape(r, c),
            None => Ok(restored),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(json.as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            location: ParseLocation::Line(e.line() as u64),
            message: e.to_string(),
        })
    }

    /// `<file>.manifest.json` next to a dataset file.
    pub fn sidecar_path(data_path: &Path) -> PathBuf {
        let mut name = data_path.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }
}
