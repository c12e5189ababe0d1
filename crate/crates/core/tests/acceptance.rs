//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs under `cargo test` (custom harness) or directly via
//! `cargo test -p noisyloss-core --test acceptance`.
//!
//! The optional Fashion-MNIST check runs only when `NOISYLOSS_FMNIST_DIR`
//! points at the four IDX files and `NOISYLOSS_FMNIST_LR` gives the initial
//! learning rate; `NOISYLOSS_FMNIST_EPOCHS` overrides the 200-epoch budget.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use noisyloss::analysis::{self, linspace};
use noisyloss::bias_solver::{solve_bias, BiasProblem};
use noisyloss::data::{self, BlobModel, Dataset};
use noisyloss::gradcheck::{central_difference, relative_error};
use noisyloss::trainer::{self, TrainConfig, MLP1024_HIDDEN};
use noisyloss::{eval, Label, LossKind, LossSpec, RngStream};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn run(id: &str, name: &str, budget: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let elapsed = start.elapsed();
    let in_budget = elapsed <= budget;
    let pass = v.pass && in_budget;
    println!(
        "{} [{id}] {name}: {} ({:.1}s, budget {}s{})",
        if pass { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_budget { "" } else { ", over budget" }
    );
    pass
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// ---------------------------------------------------------------------------
// 1. Gradient oracle

fn gradient_oracle() -> Verdict {
    let mut worst = (0.0f64, String::new());
    for (ci, &c) in [2usize, 10, 100].iter().enumerate() {
        for (ki, &kind) in LossKind::ALL.iter().enumerate() {
            let spec = LossSpec::defaults(kind, c);
            let mut rng = RngStream::derive(1, (ci * 16 + ki) as u64);
            for _ in 0..1000 {
                let z: Vec<f64> = (0..c).map(|_| 2.0 * rng.standard_normal()).collect();
                let label = Label::new(rng.index(c), c).unwrap();
                let analytic = eval(&spec, &z, label).unwrap().delta;
                let numeric =
                    central_difference(|x| eval(&spec, x, label).unwrap().value, &z, 1e-5);
                let err = relative_error(&analytic, &numeric);
                if err.is_nan() || err > worst.0 {
                    worst = (err, format!("{} c={c}", spec.key()));
                }
            }
        }
    }
    Verdict::new(
        worst.0 < 1e-6,
        format!(
            "8 losses x c in {{2,10,100}} x 1000 draws, max relative error {:.2e} ({}), tol 1e-6",
            worst.0, worst.1
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Boundedness

fn boundedness() -> Verdict {
    let classes = [2usize, 10, 100];
    let per_class_count = 100_000 / classes.len() + 1;
    let mut violations = Vec::new();
    let mut inputs = 0usize;
    let mut maxima = [0.0f64; 8];
    for &c in &classes {
        let specs: Vec<LossSpec> = LossKind::ALL
            .iter()
            .map(|&k| LossSpec::defaults(k, c))
            .collect();
        let mut rng = RngStream::derive(2, c as u64);
        for i in 0..per_class_count {
            let k = rng.index(c);
            let mut z: Vec<f64> = match i % 4 {
                0 => (0..c).map(|_| rng.standard_normal()).collect(),
                1 => (0..c).map(|_| 50.0 * rng.standard_normal()).collect(),
                2 => (0..c)
                    .map(|_| 700.0 * (2.0 * rng.index(1001) as f64 / 1000.0 - 1.0))
                    .collect(),
                _ => vec![if rng.index(2) == 0 { 0.0 } else { 700.0 }; c],
            };
            if i % 4 == 3 || i % 8 == 2 {
                z[k] = -700.0;
            }
            inputs += 1;
            let label = Label::new(k, c).unwrap();
            for (si, spec) in specs.iter().enumerate() {
                let v = eval(spec, &z, label).unwrap().value;
                maxima[si] = maxima[si].max(v);
                let ok = v.is_finite() && spec.upper_bound(c).is_none_or(|b| v <= b + 1e-12);
                if !ok && spec.upper_bound(c).is_some() {
                    violations.push(format!("{} c={c}: {v}", spec.key()));
                }
                if !v.is_finite() && matches!(spec.kind, LossKind::ActPas1 | LossKind::ActPas2) {
                    violations.push(format!("{} c={c}: non-finite", spec.key()));
                }
            }
        }
    }
    // Unboundedness witness: correct class far below the rest.
    let mut witness = vec![0.0; 10];
    witness[0] = -700.0;
    let label = Label::new(0, 10).unwrap();
    let ce = eval(&LossSpec::defaults(LossKind::Ce, 10), &witness, label)
        .unwrap()
        .value;
    let sym = eval(&LossSpec::defaults(LossKind::SymCe, 10), &witness, label)
        .unwrap()
        .value;
    let pass = violations.is_empty() && ce > 50.0 && sym > 50.0;
    let names = ["mae", "gence", "boundce", "actpas1", "actpas2"];
    let idx = [1usize, 2, 7, 4, 5];
    let summary: Vec<String> = names
        .iter()
        .zip(idx)
        .map(|(n, i)| format!("{n}<={:.3}", maxima[i]))
        .collect();
    Verdict::new(
        pass,
        format!(
            "{inputs} inputs, {} violations, max {}; witness ce={ce:.1} symce={sym:.1} (> 50)",
            violations.len(),
            summary.join(" ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Output bias reproduction

fn bias_reproduction() -> Verdict {
    let cases = [
        (10usize, 0.15, 0.5, 0.25),
        (100, 0.15, 3.0, 0.25),
        (10, 0.1, 0.0, 0.1),
        (100, 0.1, 2.5, 0.25),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, &(c, target, expected, tol)) in cases.iter().enumerate() {
        let problem = BiasProblem::new(c, target);
        match solve_bias(&problem, &mut RngStream::derive(3, i as u64)) {
            Ok(s) => {
                let ok = (s.epsilon - expected).abs() <= tol;
                pass &= ok;
                parts.push(format!(
                    "c={c},<a>={target}: eps={:.4} (want {expected}±{tol})",
                    s.epsilon
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("c={c},<a>={target}: {e}"));
            }
        }
    }
    Verdict::new(pass, parts.join("; "))
}

// ---------------------------------------------------------------------------
// 4. Learning curves

/// Monte-Carlo oracle: E|delta_k| for MAE at c=100 over c=10, epsilon = 0.
const MAE_OVERLAP_RATIO_ORACLE: f64 = 0.1210;

fn learning_curves() -> Verdict {
    let (lo, hi, n) = analysis::DEFAULT_GRID;
    let grid = linspace(lo, hi, n);
    let samples = analysis::DEFAULT_CURVE_SAMPLES;
    let ce = analysis::learning_curve(
        &LossSpec::defaults(LossKind::Ce, 10),
        10,
        &grid,
        samples,
        &mut RngStream::derive(4, 0),
    )
    .unwrap();
    let mae = analysis::learning_curve(
        &LossSpec::defaults(LossKind::Mae, 10),
        10,
        &grid,
        samples,
        &mut RngStream::derive(4, 1),
    )
    .unwrap();

    let ce_low = grid
        .iter()
        .zip(&ce.mean_delta_k)
        .filter(|(z, _)| **z <= -8.0)
        .map(|(_, d)| (d + 1.0).abs())
        .fold(0.0, f64::max);
    let ce_high = grid
        .iter()
        .zip(&ce.mean_delta_k)
        .filter(|(z, _)| **z >= 10.0)
        .map(|(_, d)| d.abs())
        .fold(0.0, f64::max);
    let ce_ok = ce_low <= 0.01 && ce_high <= 1e-3;

    let m = &mae.mean_delta_k;
    let (imin, dmin) =
        m.iter().enumerate().fold(
            (0, f64::INFINITY),
            |b, (i, &d)| if d < b.1 { (i, d) } else { b },
        );
    let ends = m[0].abs().max(m[m.len() - 1].abs());
    let mae_ok = ends < 0.01 && imin > 0 && imin < m.len() - 1 && dmin < -0.1;

    let spec = LossSpec::defaults(LossKind::Mae, 10);
    let o10 =
        analysis::overlap_metric(&spec, 10, 0.0, 200_000, &mut RngStream::derive(4, 2)).unwrap();
    let spec100 = LossSpec::defaults(LossKind::Mae, 100);
    let o100 = analysis::overlap_metric(&spec100, 100, 0.0, 200_000, &mut RngStream::derive(4, 3))
        .unwrap();
    let ratio = o100 / o10;
    let ratio_ok = ratio <= 0.15 && (ratio - MAE_OVERLAP_RATIO_ORACLE).abs() < 0.01;

    Verdict::new(
        ce_ok && mae_ok && ratio_ok,
        format!(
            "ce |d+1| at z<=-8 max {ce_low:.1e}, |d| at z>=10 max {ce_high:.1e}; mae ends {ends:.1e}, \
             interior min {dmin:.3} at z={:.1}; overlap ratio c100/c10 {ratio:.4} (<= 0.15, oracle {MAE_OVERLAP_RATIO_ORACLE})",
            grid[imin]
        ),
    )
}

// ---------------------------------------------------------------------------
// 5–7. Training

const BLOB_DIM: usize = 20;
/// Nearest-mean oracle: about 95% clean test accuracy for 10 classes in 20 dimensions.
const SEPARATION_TEN: f64 = 3.6;
/// Nearest-mean oracle: about 96–99% for 100 classes in 20 dimensions.
const SEPARATION_HUNDRED: f64 = 5.5;
const HIDDEN: [usize; 2] = [64, 32];
const LR: f64 = 0.01;
const SEEDS: [u64; 3] = [0, 1, 2];

fn blob_split(
    classes: usize,
    separation: f64,
    train_per_class: usize,
    test_per_class: usize,
) -> (Dataset, Dataset, BlobModel) {
    let mut rng = RngStream::derive(7, 0);
    let model = BlobModel::new(classes, BLOB_DIM, separation, &mut rng).unwrap();
    let train = model.sample(train_per_class, &mut rng);
    let test = model.sample(test_per_class, &mut rng);
    let (train, others) = data::standardize(&train, &[test]).unwrap();
    (train, others.into_iter().next().unwrap(), model)
}

/// Accuracy of the Bayes-like nearest-mean rule on raw samples.
fn nearest_mean_accuracy(model: &BlobModel, n_per_class: usize) -> f64 {
    let ds = model.sample(n_per_class, &mut RngStream::derive(7, 99));
    let means = model.means();
    let correct = ds
        .features()
        .rows()
        .into_iter()
        .zip(ds.labels())
        .filter(|(x, &k)| {
            let d: Vec<f64> = means
                .rows()
                .into_iter()
                .map(|m| (&m - x).mapv(|v| v * v).sum())
                .collect();
            noisyloss::numerics::argmax(&d.iter().map(|v| -v).collect::<Vec<_>>()) == k
        })
        .count();
    correct as f64 / ds.len() as f64
}

struct SeedMeans {
    test: f64,
    train: f64,
    false_label: f64,
}

fn train_seeds(train: &Dataset, test: &Dataset, spec: LossSpec, epochs: usize) -> SeedMeans {
    let rows: Vec<_> = SEEDS
        .iter()
        .map(|&s| {
            let cfg = TrainConfig::mlp_defaults(spec, LR, epochs, s);
            trainer::train(train, test, &HIDDEN, &cfg)
                .unwrap()
                .history
                .pop()
                .unwrap()
        })
        .collect();
    SeedMeans {
        test: mean(&rows.iter().map(|r| r.test_accuracy).collect::<Vec<_>>()),
        train: mean(&rows.iter().map(|r| r.train_accuracy).collect::<Vec<_>>()),
        false_label: mean(
            &rows
                .iter()
                .map(|r| r.false_label_accuracy.unwrap_or(f64::NAN))
                .collect::<Vec<_>>(),
        ),
    }
}

fn noise_ordering() -> Verdict {
    let (train, test, model) = blob_split(10, SEPARATION_TEN, 500, 100);
    let reachable = nearest_mean_accuracy(&model, 1000);
    let noisy = data::inject_symmetric_noise(&train, 0.4, &mut RngStream::derive(7, 1)).unwrap();
    let key = |k: &str| LossSpec::from_key(k, 10).unwrap();
    let ce = train_seeds(&noisy, &test, key("ce"), 40);
    let mut pass = true;
    let mut parts = vec![format!(
        "nearest-mean {reachable:.3}; ce test {:.4} false {:.4}",
        ce.test, ce.false_label
    )];
    for k in ["boundce", "mae:eps=0.5", "gence"] {
        let r = train_seeds(&noisy, &test, key(k), 40);
        let margin = r.test - ce.test;
        pass &= margin >= 0.05;
        if k == "boundce" {
            pass &= r.false_label > ce.false_label;
            parts.push(format!(
                "{k} test {:.4} (+{margin:.4}) false {:.4}",
                r.test, r.false_label
            ));
        } else {
            parts.push(format!("{k} test {:.4} (+{margin:.4})", r.test));
        }
    }
    Verdict::new(pass, parts.join("; "))
}

fn many_class_bias() -> Verdict {
    let (train, test, _) = blob_split(100, SEPARATION_HUNDRED, 50, 10);
    let eps = solve_bias(&BiasProblem::new(100, 0.15), &mut RngStream::derive(8, 0))
        .unwrap()
        .epsilon;
    let plain = train_seeds(&train, &test, LossSpec::defaults(LossKind::Mae, 100), 30);
    let biased = train_seeds(
        &train,
        &test,
        LossSpec::defaults(LossKind::Mae, 100).with_epsilon(eps),
        30,
    );
    let margin = biased.train - plain.train;
    Verdict::new(
        margin >= 0.10,
        format!(
            "mae eps=0 train {:.4}, mae eps={eps:.4} train {:.4}, margin {margin:.4} (>= 0.10)",
            plain.train, biased.train
        ),
    )
}

fn determinism() -> Verdict {
    let (train, test, _) = blob_split(10, SEPARATION_TEN, 50, 10);
    let noisy = data::inject_symmetric_noise(&train, 0.4, &mut RngStream::derive(7, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    for k in ["ce", "bitemp", "mae:eps=0.5"] {
        let spec = LossSpec::from_key(k, 10).unwrap();
        let files: Vec<Vec<u8>> = (0..2)
            .map(|i| {
                let out = trainer::train(
                    &noisy,
                    &test,
                    &HIDDEN,
                    &TrainConfig::mlp_defaults(spec, LR, 5, 42),
                )
                .unwrap();
                let path = dir.path().join(format!("{i}.csv"));
                trainer::write_metrics_csv(&out.history, &path).unwrap();
                std::fs::read(path).unwrap()
            })
            .collect();
        identical &= files[0] == files[1];
    }
    Verdict::new(
        identical,
        "3 losses, two runs each with seed 42: metrics CSV byte-identical",
    )
}

// ---------------------------------------------------------------------------
// 8. Optional Fashion-MNIST

fn fashion_mnist(dir: PathBuf, lr: f64, epochs: usize) -> Verdict {
    let train = data::load_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )
    .unwrap();
    let test = data::load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )
    .unwrap();
    let (train, others) = data::standardize(&train, &[test]).unwrap();
    let spec = LossSpec::defaults(LossKind::Mae, 10).with_epsilon(0.5);
    let finals: Vec<f64> = (0..5)
        .map(|s| {
            let cfg = TrainConfig::mlp_defaults(spec, lr, epochs, s);
            trainer::train(&train, &others[0], &MLP1024_HIDDEN, &cfg)
                .unwrap()
                .history
                .pop()
                .unwrap()
                .test_accuracy
        })
        .collect();
    let acc = 100.0 * mean(&finals);
    Verdict::new(
        (acc - 89.55).abs() <= 1.5,
        format!("mean test accuracy {acc:.2} over 5 seeds (want 89.55 ± 1.5)"),
    )
}

fn main() {
    // `cargo test` forwards libtest flags; only `--list` needs an answer.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let secs = Duration::from_secs;
    let results = [
        run("1", "gradient oracle", secs(30), gradient_oracle),
        run("2", "boundedness", secs(10), boundedness),
        run("3", "output bias reproduction", secs(60), bias_reproduction),
        run("4", "learning curves", secs(300), learning_curves),
        run("5", "noise-robustness ordering", secs(600), noise_ordering),
        run("6", "many-class bias effect", secs(900), many_class_bias),
        run("7", "determinism", secs(60), determinism),
    ];
    match (std::env::var_os("NOISYLOSS_FMNIST_DIR"), std::env::var("NOISYLOSS_FMNIST_LR")) {
        (Some(dir), Ok(lr)) => {
            let lr: f64 = lr.parse().expect("NOISYLOSS_FMNIST_LR is a number");
            let epochs = std::env::var("NOISYLOSS_FMNIST_EPOCHS").ok().and_then(|e| e.parse().ok()).unwrap_or(200);
            // Reported but not gating.
            run("8", "fashion-mnist mlp1024 (optional)", secs(u64::MAX / 4), || fashion_mnist(dir.into(), lr, epochs));
        }
        _ => println!("SKIP [8] fashion-mnist mlp1024 (optional): set NOISYLOSS_FMNIST_DIR and NOISYLOSS_FMNIST_LR"),
    }
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
