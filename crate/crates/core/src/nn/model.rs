use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;
use crate::seed::{self, stream};

/// Layer widths of the estimator, input first.
pub const DEFAULT_WIDTHS: [usize; 5] = [60, 128, 64, 32, 6];

/// Fully connected layer; `weights` is `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// ReLU multilayer perceptron with an identity output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
}

/// Gradients laid out like [`MlpModel::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        flatten(&self.layers)
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
        .collect()
}

impl MlpModel {
    /// Balanced-variance uniform init (`±sqrt(6 / (fan_in + fan_out))`), zero biases.
    pub fn init(widths: &[usize], seed: u64) -> Result<Self, NnError> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(NnError::Shape(format!("invalid layer widths {widths:?}")));
        }
        let mut rng = seed::rng(seed, &[stream::INIT]);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-a..a));
                Layer { weights, bias: Array1::zeros(fan_out) }
            })
            .collect();
        Ok(MlpModel { layers })
    }

    /// The 60 → 128 → 64 → 32 → 6 estimator.
    pub fn init_default(seed: u64) -> Self {
        Self::init(&DEFAULT_WIDTHS, seed).expect("default widths are valid")
    }

    /// Builds a model from explicit layers, checking that shapes chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Shape("model has no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(NnError::Shape(format!("layer {i}: bias length {} != {}", l.bias.len(), l.outputs())));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(NnError::Shape(format!("layer {i}: expects {} inputs, previous emits {}", l.inputs(), layers[i - 1].outputs())));
            }
        }
        Ok(MlpModel { layers })
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].inputs()];
        w.extend(self.layers.iter().map(Layer::outputs));
        w
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, Layer::outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<(), NnError> {
        if params.len() != self.param_count() {
            return Err(NnError::Shape(format!("expected {} parameters, got {}", self.param_count(), params.len())));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    fn check_input(&self, x: &ArrayView2<f64>) {
        assert_eq!(x.ncols(), self.input_width(), "input arity mismatch");
    }

    /// Batch forward pass: one row per sample.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.check_input(&x);
        let mut a = affine(&self.layers[0], x);
        for l in &self.layers[1..] {
            relu(&mut a);
            a = affine(l, a.view());
        }
        a
    }

    /// Single-sample forward pass.
    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let x = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        self.forward(x).into_raw_vec_and_offset().0
    }

    /// Mean squared error over all samples and outputs.
    pub fn loss(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>) -> f64 {
        mse(&self.forward(x), &targets)
    }

    /// Loss and exact gradients of the mean-over-batch, mean-over-outputs
    /// squared error. The ReLU derivative at 0 is taken as 0.
    pub fn backward(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>) -> (f64, Gradients) {
        self.check_input(&x);
        assert!(x.nrows() > 0, "empty batch");
        assert_eq!(targets.dim(), (x.nrows(), self.output_width()), "target shape mismatch");
        // activations[i] is the input to layer i
        let mut activations: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = affine(l, a.view());
            activations.push(a);
            if i + 1 < self.layers.len() {
                relu(&mut z);
            }
            a = z;
        }
        let y = a;
        let loss = mse(&y, &targets);
        let scale = 2.0 / y.len() as f64;
        let mut delta = (y - &targets) * scale;
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input = &activations[i];
            let weights = delta.t().dot(input);
            let bias = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut next = delta.dot(&l.weights);
                // post-ReLU activation is positive exactly where the pre-activation was
                Zip::from(&mut next).and(input).for_each(|d, &h| {
                    if h <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = next;
            }
            grads.push(Layer { weights, bias });
        }
        grads.reverse();
        (loss, Gradients { layers: grads })
    }
}

fn affine(l: &Layer, x: ArrayView2<f64>) -> Array2<f64> {
    let mut z = x.dot(&l.weights.t());
    z += &l.bias;
    z
}

fn relu(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
}

pub(crate) fn mse(y: &Array2<f64>, targets: &ArrayView2<f64>) -> f64 {
    let mut s = 0.0;
    Zip::from(y).and(targets).for_each(|&a, &b| s += (a - b) * (a - b));
    s / y.len() as f64
}
