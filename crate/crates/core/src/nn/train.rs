use ndarray::{Array2, Axis, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Layer, MlpModel, NnError};
use crate::dataset::Tensors;
use crate::seed::{self, stream};
use crate::stats::{error_stats, ErrorStats};
use crate::NUM_OUTPUTS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds the per-epoch minibatch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.001, batch_size: 32, epochs: 100, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::InvalidConfig(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("adam epsilon must be > 0");
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    learning_rate: f64,
    step: i32,
    m: Vec<Layer>,
    v: Vec<Layer>,
}

impl Adam {
    pub fn new(model: &MlpModel, cfg: &TrainConfig) -> Self {
        let zeros: Vec<Layer> = model
            .layers
            .iter()
            .map(|l| Layer { weights: Array2::zeros(l.weights.dim()), bias: ndarray::Array1::zeros(l.bias.len()) })
            .collect();
        Adam {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            learning_rate: cfg.learning_rate,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, model: &mut MlpModel, grads: &[Layer]) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.learning_rate;
        for (((p, g), m), v) in model.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let step = |p: &mut f64, &g: &f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            Zip::from(&mut p.weights).and(&g.weights).and(&mut m.weights).and(&mut v.weights).for_each(step);
            Zip::from(&mut p.bias).and(&g.bias).and(&mut m.bias).and(&mut v.bias).for_each(step);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch, accumulated over its minibatches.
    pub epoch_losses: Vec<f64>,
    pub final_train_loss: f64,
    pub final_test_loss: Option<f64>,
    /// Per-axis test errors in meters / degrees, `x … yaw` order.
    pub test_stats: Option<Vec<ErrorStats>>,
    pub config: TrainConfig,
}

/// Trains `model` in place with shuffled minibatch Adam.
///
/// The final training loss is re-evaluated on the full training set after
/// the last update; `test` (if given) is evaluated once at the end.
pub fn train(model: &mut MlpModel, data: &Tensors, test: Option<&Tensors>, cfg: &TrainConfig) -> Result<TrainReport, NnError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NnError::InvalidConfig("training set is empty".into()));
    }
    if data.features() != model.input_width() || data.targets.ncols() != model.output_width() {
        return Err(NnError::Shape(format!(
            "data is {}→{}, model is {}→{}",
            data.features(),
            data.targets.ncols(),
            model.input_width(),
            model.output_width()
        )));
    }
    let n = data.len();
    let mut adam = Adam::new(model, cfg);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::rng(cfg.seed, &[stream::SHUFFLE, epoch as u64]));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = data.inputs.select(Axis(0), batch);
            let t = data.targets.select(Axis(0), batch);
            let (loss, grads) = model.backward(x.view(), t.view());
            if !loss.is_finite() {
                return Err(NnError::NonFiniteLoss { epoch: epoch + 1, loss });
            }
            total += loss * batch.len() as f64;
            adam.update(model, &grads.layers);
        }
        epoch_losses.push(total / n as f64);
    }
    let final_train_loss = model.loss(data.inputs.view(), data.targets.view());
    if !final_train_loss.is_finite() || !model.is_finite() {
        return Err(NnError::NonFiniteLoss { epoch: cfg.epochs, loss: final_train_loss });
    }
    let (final_test_loss, test_stats) = match test {
        Some(t) => {
            let e = evaluate(model, t)?;
            (Some(e.loss), Some(e.stats))
        }
        None => (None, None),
    };
    Ok(TrainReport { epoch_losses, final_train_loss, final_test_loss, test_stats, config: cfg.clone() })
}

/// Test-set predictions and per-axis errors in meters / degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Decoded predictions, one row per sample, `x … yaw`.
    pub predicted: Array2<f64>,
    pub actual: Array2<f64>,
    pub stats: Vec<ErrorStats>,
    /// MSE in model target units.
    pub loss: f64,
}

impl Evaluation {
    pub fn axis(&self, name: &str) -> Option<&ErrorStats> {
        crate::AXIS_NAMES.iter().position(|a| *a == name).map(|i| &self.stats[i])
    }
}

pub fn evaluate(model: &MlpModel, data: &Tensors) -> Result<Evaluation, NnError> {
    if data.is_empty() {
        return Err(NnError::InvalidConfig("evaluation set is empty".into()));
    }
    if model.output_width() != NUM_OUTPUTS {
        return Err(NnError::Shape(format!("evaluation needs {NUM_OUTPUTS} outputs")));
    }
    let raw = model.forward(data.inputs.view());
    let loss = super::model::mse(&raw, &data.targets.view());
    let decode = |a: &Array2<f64>| {
        let mut out = Array2::zeros(a.dim());
        for (mut o, r) in out.rows_mut().into_iter().zip(a.rows()) {
            let d = data.codec.decode(r.as_slice().expect("standard layout"));
            o.assign(&ndarray::ArrayView1::from(&d));
        }
        out
    };
    let predicted = decode(&raw);
    let actual = decode(&data.targets.as_standard_layout().to_owned());
    let stats = (0..NUM_OUTPUTS)
        .map(|k| {
            let p = predicted.column(k).to_vec();
            let a = actual.column(k).to_vec();
            error_stats(&p, &a)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Evaluation { predicted, actual, stats, loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{TargetCodec, TargetMode};
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> Tensors {
        let mut rng = seed::rng(seed, &[1]);
        let inputs = Array2::from_shape_simple_fn((n, 4), || rng.random_range(-1.0..1.0));
        let mut targets = Array2::zeros((n, NUM_OUTPUTS));
        for (i, r) in inputs.rows().into_iter().enumerate() {
            for k in 0..NUM_OUTPUTS {
                targets[[i, k]] = 0.5 * r[k % 4] - 0.2 * r[(k + 1) % 4] * r[(k + 2) % 4];
            }
        }
        Tensors { inputs, targets, codec: TargetCodec::identity(TargetMode::RadiansMeters) }
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig { epochs: 30, learning_rate: 0.01, batch_size: 16, seed: 4, ..TrainConfig::default() }
    }

    #[test]
    fn loss_descends() {
        let data = toy(200, 1);
        let mut m = MlpModel::init(&[4, 16, 8, 6], 2).unwrap();
        let r = train(&mut m, &data, None, &small_cfg()).unwrap();
        assert_eq!(r.epoch_losses.len(), 30);
        assert!(r.epoch_losses.last().unwrap() < &r.epoch_losses[0]);
        assert!(r.epoch_losses.iter().all(|l| *l >= 0.0));
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let data = toy(50, 1);
        let mut m = MlpModel::init(&[4, 8, 6], 2).unwrap();
        let before = m.clone();
        train(&mut m, &data, None, &TrainConfig { learning_rate: 0.0, epochs: 3, ..small_cfg() }).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy(70, 3);
        let run = || {
            let mut m = MlpModel::init(&[4, 8, 6], 5).unwrap();
            let r = train(&mut m, &data, None, &small_cfg()).unwrap();
            (m, r)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn diverging_loss_is_reported() {
        let mut data = toy(40, 3);
        data.targets.mapv_inplace(|v| v * 1e200);
        let mut m = MlpModel::init(&[4, 8, 6], 5).unwrap();
        let err = train(&mut m, &data, None, &small_cfg()).unwrap_err();
        assert!(matches!(err, NnError::NonFiniteLoss { .. }));
    }

    #[test]
    fn invalid_config_rejected() {
        let data = toy(10, 3);
        let mut m = MlpModel::init(&[4, 8, 6], 5).unwrap();
        for cfg in [
            TrainConfig { epochs: 0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { learning_rate: -1.0, ..TrainConfig::default() },
        ] {
            assert!(matches!(train(&mut m, &data, None, &cfg), Err(NnError::InvalidConfig(_))));
        }
    }

    #[test]
    fn perfect_model_has_zero_error() {
        // identity on the first 4 outputs via a 4 → 6 linear layer
        let mut m = MlpModel::init(&[4, 6], 0).unwrap();
        m.layers[0].weights.fill(0.0);
        for k in 0..4 {
            m.layers[0].weights[[k, k]] = 1.0;
        }
        let mut data = toy(20, 8);
        let targets = m.forward(data.inputs.view());
        data.targets = targets;
        let e = evaluate(&m, &data).unwrap();
        assert_eq!(e.loss, 0.0);
        assert!(e.stats.iter().all(|s| s.max == 0.0 && s.mean_abs == 0.0 && s.std_abs == 0.0));
    }

    #[test]
    fn evaluate_reports_degrees() {
        let mut m = MlpModel::init(&[4, 6], 0).unwrap();
        m.layers[0].weights.fill(0.0);
        m.layers[0].bias[3] = 0.01; // 0.01 rad roll bias
        let mut data = toy(5, 8);
        data.targets.fill(0.0);
        let e = evaluate(&m, &data).unwrap();
        assert!((e.stats[3].mean_abs - 0.01f64.to_degrees()).abs() < 1e-12);
        assert_eq!(e.stats[0].mean_abs, 0.0);
    }
}
