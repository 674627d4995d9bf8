use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Fully-connected regressor with a scalar output.
///
/// Inputs are standardized with fixed `input_mean` / `input_scale` before the
/// first layer, and the raw network output `z` is mapped to label units as
/// `output_offset + output_scale * z`. These transforms are not trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    /// `weights[l]` has shape `(layer_dims[l + 1], layer_dims[l])`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub output_offset: f64,
    pub output_scale: f64,
    /// Bumped on every parameter update; tapes remember the version they saw.
    #[serde(default)]
    pub version: u64,
}

/// Gradients (or any per-parameter quantity) shaped like [`MlpParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            weights: params.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: params.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flat_map(|w| w.iter()).chain(self.biases.iter().flat_map(|b| b.iter()))
    }
}

/// Everything the backward pass needs from one forward call.
#[derive(Debug, Clone)]
pub struct Tape {
    version: u64,
    layer_dims: Vec<usize>,
    /// Input to each layer, standardized input first.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases, identity input/output transforms.
    pub fn init<R: Rng + ?Sized>(layer_dims: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer dims {layer_dims:?}")));
        }
        if *layer_dims.last().unwrap() != 1 {
            return Err(Error::Config("output dimension must be 1".into()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..limit)));
            biases.push(Array1::zeros(fan_out));
        }
        let d = layer_dims[0];
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            activation,
            weights,
            biases,
            input_mean: vec![0.0; d],
            input_scale: vec![1.0; d],
            output_offset: 0.0,
            output_scale: 1.0,
            version: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Predictions for a `(batch, d)` input matrix.
    pub fn forward(&self, inputs: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Tape)> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::shape(self.input_dim(), inputs.ncols()));
        }
        let mut x = inputs.to_owned();
        for (mut col, (&mean, &scale)) in x.columns_mut().into_iter().zip(self.input_mean.iter().zip(&self.input_scale)) {
            col.mapv_inplace(|v| (v - mean) / scale);
        }
        let last = self.num_layers() - 1;
        let mut tape_inputs = Vec::with_capacity(self.num_layers());
        let mut pre = Vec::with_capacity(last);
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = x.dot(&w.t()) + b;
            tape_inputs.push(x);
            if l == last {
                x = z;
            } else {
                x = z.mapv(|v| self.activation.apply(v));
                pre.push(z);
            }
        }
        let predictions = x.column(0).iter().map(|&z| self.output_offset + self.output_scale * z).collect();
        let tape = Tape { version: self.version, layer_dims: self.layer_dims.clone(), inputs: tape_inputs, pre };
        Ok((predictions, tape))
    }

    pub fn predict(&self, inputs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(self.forward(inputs)?.0)
    }

    /// Gradients of `sum_i grad_predictions[i] * prediction[i]`.
    pub fn backward(&self, tape: &Tape, grad_predictions: &[f64]) -> Result<ParamGrads> {
        if tape.version != self.version || tape.layer_dims != self.layer_dims {
            return Err(Error::InvalidTape);
        }
        let batch = tape.inputs[0].nrows();
        if grad_predictions.len() != batch {
            return Err(Error::shape(batch, grad_predictions.len()));
        }
        let mut grads = ParamGrads::zeros_like(self);
        let mut delta =
            Array2::from_shape_fn((batch, 1), |(i, _)| grad_predictions[i] * self.output_scale);
        for l in (0..self.num_layers()).rev() {
            grads.weights[l] = delta.t().dot(&tape.inputs[l]);
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l]);
                let z = &tape.pre[l - 1];
                let a = &tape.inputs[l];
                ndarray::Zip::from(&mut back).and(z).and(a).for_each(|g, &z, &a| {
                    *g *= self.activation.derivative(z, a);
                });
                delta = back;
            }
        }
        Ok(grads)
    }

    /// Visits every trainable scalar in a fixed order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for w in &mut self.weights {
            w.iter_mut().for_each(&mut f);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(&mut f);
        }
    }
}
