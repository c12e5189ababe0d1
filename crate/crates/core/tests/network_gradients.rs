//! Backprop through a 2-3-2 ReLU network against finite differences of the
//! batch-mean loss, for every loss kind.

use ndarray::Array2;
use noisyloss::gradcheck::{central_difference, relative_error};
use noisyloss::trainer::{init_mlp, MlpModel};
use noisyloss::{eval, Label, LossKind, LossSpec, RngStream};

const CLASSES: usize = 2;
const KINK_MARGIN: f64 = 0.05;

fn params(model: &MlpModel) -> Vec<f64> {
    model
        .layers()
        .iter()
        .flat_map(|l| {
            l.weights
                .iter()
                .chain(l.bias.iter())
                .copied()
                .collect::<Vec<_>>()
        })
        .collect()
}

fn with_params(model: &MlpModel, p: &[f64]) -> MlpModel {
    let mut m = model.clone();
    let mut it = p.iter();
    for l in m.layers_mut() {
        for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
            *w = *it.next().unwrap();
        }
    }
    m
}

fn mean_loss(spec: &LossSpec, model: &MlpModel, x: &Array2<f64>, labels: &[usize]) -> f64 {
    let (z, _) = model.forward(x).unwrap();
    z.rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &k)| {
            eval(
                spec,
                row.as_slice().unwrap(),
                Label::new(k, CLASSES).unwrap(),
            )
            .unwrap()
            .value
        })
        .sum::<f64>()
        / labels.len() as f64
}

/// Five examples whose hidden pre-activations all stay clear of the ReLU kink.
fn jittered_batch(model: &MlpModel, rng: &mut RngStream) -> Array2<f64> {
    let first = &model.layers()[0];
    let mut rows = Vec::new();
    while rows.len() < 5 {
        let x = [rng.standard_normal(), rng.standard_normal()];
        let clear = (0..first.fan_out()).all(|j| {
            let h = x[0] * first.weights[[0, j]] + x[1] * first.weights[[1, j]] + first.bias[j];
            h.abs() > KINK_MARGIN
        });
        if clear {
            rows.push(x);
        }
    }
    Array2::from_shape_fn((5, 2), |(i, j)| rows[i][j])
}

#[test]
fn backprop_matches_finite_differences_for_every_loss() {
    let mut specs: Vec<LossSpec> = LossKind::ALL
        .iter()
        .map(|&k| LossSpec::defaults(k, CLASSES))
        .collect();
    specs.push(LossSpec::defaults(LossKind::Mae, CLASSES).with_epsilon(0.5));
    specs.push(LossSpec::defaults(LossKind::BoundCe, CLASSES).with_epsilon(1.5));

    for (i, spec) in specs.iter().enumerate() {
        let mut rng = RngStream::derive(11, i as u64);
        let mut model = init_mlp(2, &[3], CLASSES, &mut rng).unwrap();
        // Non-zero biases so that every parameter is exercised.
        for l in model.layers_mut() {
            l.bias.mapv_inplace(|_| 0.3 * rng.standard_normal());
        }
        let x = jittered_batch(&model, &mut rng);
        let labels = [0, 1, 1, 0, 1];

        let (z, cache) = model.forward(&x).unwrap();
        let mut delta = Array2::zeros(z.raw_dim());
        for (r, &k) in labels.iter().enumerate() {
            let e = eval(
                spec,
                z.row(r).as_slice().unwrap(),
                Label::new(k, CLASSES).unwrap(),
            )
            .unwrap();
            delta.row_mut(r).assign(&ndarray::Array1::from(e.delta));
        }
        let grads = model.backward_from_delta(&cache, &delta).unwrap();
        let analytic: Vec<f64> = grads
            .layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
            .collect();

        let p = params(&model);
        let numeric = central_difference(
            |q| mean_loss(spec, &with_params(&model, q), &x, &labels),
            &p,
            1e-5,
        );
        let err = relative_error(&analytic, &numeric);
        assert!(err < 1e-6, "{}: relative error {err:e}", spec.key());
    }
}
