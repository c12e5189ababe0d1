use ndarray::{Array1, Array2, Axis, Zip};

use crate::error::{Error, Result};
use crate::numerics::{glorot_uniform, RngStream};

/// Fully connected layer; `weights` is `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

/// ReLU multilayer perceptron with identity output: `forward` yields the
/// pre-activations `z` that the losses consume.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Dense>,
}

/// Inputs to every layer, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_inputs: Vec<Array2<f64>>,
}

/// Per-layer `(weight, bias)` gradients; also used for momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| {
                    (
                        Array2::zeros(l.weights.raw_dim()),
                        Array1::zeros(l.bias.len()),
                    )
                })
                .collect(),
        }
    }
}

/// Momentum buffers of [`sgd_step`].
pub type Velocity = Gradients;

/// `input_dim → hidden… → classes` with Glorot-uniform weights and zero biases.
pub fn init_mlp(
    input_dim: usize,
    hidden: &[usize],
    classes: usize,
    rng: &mut RngStream,
) -> Result<MlpModel> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(input_dim);
    dims.extend_from_slice(hidden);
    dims.push(classes);
    if dims.contains(&0) {
        return Err(Error::Domain(format!(
            "layer sizes must be >= 1, got {dims:?}"
        )));
    }
    let layers = dims
        .windows(2)
        .map(|w| {
            Ok(Dense {
                weights: glorot_uniform(rng, w[0], w[1])?,
                bias: Array1::zeros(w[1]),
            })
        })
        .collect::<Result<_>>()?;
    Ok(MlpModel { layers })
}

impl MlpModel {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("model needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.fan_out() {
                return Err(Error::Shape(format!(
                    "layer {i}: bias length {} vs fan-out {}",
                    l.bias.len(),
                    l.fan_out()
                )));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].fan_out(),
                    i + 1,
                    pair[1].fan_in()
                )));
            }
        }
        Ok(MlpModel { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn classes(&self) -> usize {
        self.layers.last().unwrap().fan_out()
    }

    fn check_width(&self, batch: &Array2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} features, model expects {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Pre-activations for a `B × input_dim` batch, plus the backward cache.
    pub fn forward(&self, batch: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_width(batch)?;
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut h = batch.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = h.dot(&layer.weights) + &layer.bias;
            if i < last {
                out.mapv_inplace(|v| v.max(0.0));
            }
            layer_inputs.push(std::mem::replace(&mut h, out));
        }
        Ok((h, ForwardCache { layer_inputs }))
    }

    /// Forward pass without a cache.
    pub fn predict(&self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_width(batch)?;
        let mut h = batch.dot(&self.layers[0].weights) + &self.layers[0].bias;
        for layer in &self.layers[1..] {
            h.mapv_inplace(|v| v.max(0.0));
            h = h.dot(&layer.weights) + &layer.bias;
        }
        Ok(h)
    }

    /// Gradients of the batch-mean loss given per-example output errors.
    pub fn backward_from_delta(
        &self,
        cache: &ForwardCache,
        delta: &Array2<f64>,
    ) -> Result<Gradients> {
        let batch = cache.layer_inputs[0].nrows();
        if delta.dim() != (batch, self.classes()) {
            return Err(Error::Shape(format!(
                "delta is {:?}, expected ({batch}, {})",
                delta.dim(),
                self.classes()
            )));
        }
        let mut d = delta / batch as f64;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.layer_inputs[i];
            let gw = input.t().dot(&d);
            let gb = d.sum_axis(Axis(0));
            if i > 0 {
                let mut back = d.dot(&layer.weights.t());
                // ReLU derivative, 0 at exactly 0.
                Zip::from(&mut back).and(input).for_each(|b, &x| {
                    if x <= 0.0 {
                        *b = 0.0;
                    }
                });
                d = back;
            }
            layers.push((gw, gb));
        }
        layers.reverse();
        Ok(Gradients { layers })
    }
}

/// `v ← m·v + (g + λ·w); w ← w − lr·v`. Biases get momentum but no decay.
pub fn sgd_step(
    model: &mut MlpModel,
    grads: &Gradients,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
    velocity: &mut Velocity,
) {
    for ((layer, (gw, gb)), (vw, vb)) in model
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(velocity.layers.iter_mut())
    {
        Zip::from(&mut layer.weights)
            .and(vw)
            .and(gw)
            .for_each(|w, v, &g| {
                *v = momentum * *v + g + weight_decay * *w;
                *w -= lr * *v;
            });
        Zip::from(&mut layer.bias)
            .and(vb)
            .and(gb)
            .for_each(|b, v, &g| {
                *v = momentum * *v + g;
                *b -= lr * *v;
            });
    }
}
