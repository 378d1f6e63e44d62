//! Dense binary classifier for mention pairs.
//!
//! Two ReLU hidden layers with inverted dropout, a sigmoid output,
//! mean binary cross-entropy and Adam. Everything runs in `f64` on a
//! single thread so that a seed fully determines the trained weights.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurizer::{Featurizer, PairVector, PAIR_DIM};
use crate::sampler::PairDataset;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Outputs are kept this far from 0 and 1 so probabilities stay strictly
/// inside the open interval.
const PROB_FLOOR: f64 = 1e-15;
const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("gradient contains non-finite values")]
    NonFiniteGradient,
    #[error("cache was produced before the last parameter update")]
    StaleCache,
    #[error("expected input width {expected}, got {found}")]
    InputDim { expected: usize, found: usize },
    #[error("got {labels} labels for a batch of {batch}")]
    LabelCount { labels: usize, batch: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("model format error: {0}")]
    ModelFormatError(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Init {
    #[default]
    HeUniform,
    XavierUniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub dropout_prob: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub epochs: usize,
    pub seed: u64,
    pub init: Init,
    /// Adds a bias term to the output unit.
    pub output_bias: bool,
    /// Training stops once an epoch's mean loss falls below this.
    pub early_stop_loss: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            input_dim: PAIR_DIM,
            hidden1: 512,
            hidden2: 128,
            dropout_prob: 0.5,
            batch_size: 128,
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            epochs: 100,
            seed: 0,
            init: Init::HeUniform,
            output_bias: false,
            early_stop_loss: 1e-4,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |msg: &str| Err(MlpError::InvalidConfig(msg.to_string()));
        if self.input_dim == 0 || self.hidden1 == 0 || self.hidden2 == 0 {
            return bad("layer widths must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return bad("dropout_prob must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive");
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.adam_epsilon <= 0.0 || !self.adam_epsilon.is_finite() {
            return bad("adam_epsilon must be positive");
        }
        Ok(())
    }
}

/// One tensor per parameter. Also used for gradients and Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w_out: Array1<f64>,
    pub b_out: f64,
}

impl Params {
    pub fn zeros(cfg: &MlpConfig) -> Self {
        Params {
            w1: Array2::zeros((cfg.hidden1, cfg.input_dim)),
            b1: Array1::zeros(cfg.hidden1),
            w2: Array2::zeros((cfg.hidden2, cfg.hidden1)),
            b2: Array1::zeros(cfg.hidden2),
            w_out: Array1::zeros(cfg.hidden2),
            b_out: 0.0,
        }
    }

    /// Named flat views of every tensor, in a fixed order.
    pub fn tensors(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("w1", self.w1.as_slice().expect("contiguous")),
            ("b1", self.b1.as_slice().expect("contiguous")),
            ("w2", self.w2.as_slice().expect("contiguous")),
            ("b2", self.b2.as_slice().expect("contiguous")),
            ("w_out", self.w_out.as_slice().expect("contiguous")),
            ("b_out", std::slice::from_ref(&self.b_out)),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 6] {
        [
            ("w1", self.w1.as_slice_mut().expect("contiguous")),
            ("b1", self.b1.as_slice_mut().expect("contiguous")),
            ("w2", self.w2.as_slice_mut().expect("contiguous")),
            ("b2", self.b2.as_slice_mut().expect("contiguous")),
            ("w_out", self.w_out.as_slice_mut().expect("contiguous")),
            ("b_out", std::slice::from_mut(&mut self.b_out)),
        ]
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

pub type Gradients = Params;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Params,
    pub v: Params,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub params: Params,
    pub adam: AdamState,
    /// Feature settings the model was trained with, carried in the file.
    pub features: Option<Featurizer>,
    generation: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForwardMode {
    Eval,
    /// Dropout masks are drawn from a generator seeded with this value.
    Train { seed: u64 },
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    x: Array2<f64>,
    z1: Array2<f64>,
    a1: Array2<f64>,
    z2: Array2<f64>,
    a2: Array2<f64>,
    mask1: Option<Array2<f64>>,
    mask2: Option<Array2<f64>>,
    pub output: Array1<f64>,
    generation: u64,
}

impl ForwardCache {
    /// Second hidden layer activations after dropout, one row per input.
    pub fn hidden2(&self) -> &Array2<f64> {
        &self.a2
    }
}

fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

fn dropout_mask(rng: &mut ChaCha8Rng, shape: (usize, usize), drop: f64) -> Array2<f64> {
    let keep = 1.0 - drop;
    let scale = 1.0 / keep;
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < keep { scale } else { 0.0 })
}

impl MlpModel {
    /// Fresh model: uniform weights from the configured scheme, zero
    /// biases and zero Adam moments.
    pub fn new(config: MlpConfig) -> Result<Self, MlpError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = |fan_in: usize, fan_out: usize| match config.init {
            Init::HeUniform => (6.0 / fan_in as f64).sqrt(),
            Init::XavierUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
        };
        let mut params = Params::zeros(&config);
        params.w1 = uniform_matrix(&mut rng, config.hidden1, config.input_dim, bound(config.input_dim, config.hidden1));
        params.w2 = uniform_matrix(&mut rng, config.hidden2, config.hidden1, bound(config.hidden1, config.hidden2));
        params.w_out = uniform_matrix(&mut rng, 1, config.hidden2, bound(config.hidden2, 1))
            .into_shape_with_order(config.hidden2)
            .expect("row vector");
        Ok(Self::from_params(config, params))
    }

    pub fn from_params(config: MlpConfig, params: Params) -> Self {
        let zeros = Params::zeros(&config);
        MlpModel {
            adam: AdamState {
                step: 0,
                m: zeros.clone(),
                v: zeros,
            },
            config,
            params,
            features: None,
            generation: 0,
        }
    }

    /// A model whose every weight is zero; it predicts 0.5 everywhere.
    pub fn zeroed(config: MlpConfig) -> Result<Self, MlpError> {
        config.validate()?;
        let params = Params::zeros(&config);
        Ok(Self::from_params(config, params))
    }

    pub fn forward_batch(&self, x: ArrayView2<'_, f64>, mode: ForwardMode) -> Result<ForwardCache, MlpError> {
        let cfg = &self.config;
        if x.ncols() != cfg.input_dim {
            return Err(MlpError::InputDim {
                expected: cfg.input_dim,
                found: x.ncols(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(MlpError::NonFiniteInput);
        }
        let p = &self.params;
        let mut rng = match mode {
            ForwardMode::Train { seed } if cfg.dropout_prob > 0.0 => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };

        let z1 = x.dot(&p.w1.t()) + &p.b1;
        let mut a1 = z1.mapv(|v| v.max(0.0));
        let mask1 = rng.as_mut().map(|r| dropout_mask(r, a1.dim(), cfg.dropout_prob));
        if let Some(m) = &mask1 {
            a1 *= m;
        }
        let z2 = a1.dot(&p.w2.t()) + &p.b2;
        let mut a2 = z2.mapv(|v| v.max(0.0));
        let mask2 = rng.as_mut().map(|r| dropout_mask(r, a2.dim(), cfg.dropout_prob));
        if let Some(m) = &mask2 {
            a2 *= m;
        }
        let b_out = if cfg.output_bias { p.b_out } else { 0.0 };
        let output = a2.dot(&p.w_out).mapv(|z| sigmoid(z + b_out));

        Ok(ForwardCache {
            x: x.to_owned(),
            z1,
            a1,
            z2,
            a2,
            mask1,
            mask2,
            output,
            generation: self.generation,
        })
    }

    /// Single-input forward pass.
    pub fn forward(&self, x: &[f64], mode: ForwardMode) -> Result<(f64, ForwardCache), MlpError> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        let cache = self.forward_batch(view, mode)?;
        Ok((cache.output[0], cache))
    }

    /// Gradients of the batch-mean BCE with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, labels: &[f64]) -> Result<Gradients, MlpError> {
        if cache.generation != self.generation {
            return Err(MlpError::StaleCache);
        }
        let batch = cache.output.len();
        if labels.len() != batch {
            return Err(MlpError::LabelCount {
                labels: labels.len(),
                batch,
            });
        }
        let p = &self.params;
        let scale = 1.0 / batch as f64;
        let dz3 = Array1::from_iter(cache.output.iter().zip(labels).map(|(o, y)| (o - y) * scale));

        let g_wout = cache.a2.t().dot(&dz3);
        let g_bout = if self.config.output_bias { dz3.sum() } else { 0.0 };

        let mut dz2 = outer(&dz3.view(), &p.w_out.view());
        if let Some(m) = &cache.mask2 {
            dz2 *= m;
        }
        Zip::from(&mut dz2).and(&cache.z2).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        let g_w2 = dz2.t().dot(&cache.a1);
        let g_b2 = dz2.sum_axis(Axis(0));

        let mut dz1 = dz2.dot(&p.w2);
        if let Some(m) = &cache.mask1 {
            dz1 *= m;
        }
        Zip::from(&mut dz1).and(&cache.z1).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        let g_w1 = dz1.t().dot(&cache.x);
        let g_b1 = dz1.sum_axis(Axis(0));

        Ok(Params {
            w1: g_w1,
            b1: g_b1,
            w2: g_w2,
            b2: g_b2,
            w_out: g_wout,
            b_out: g_bout,
        })
    }

    /// One bias-corrected Adam update.
    pub fn adam_step(&mut self, grads: &Gradients) -> Result<(), MlpError> {
        if !grads.all_finite() {
            return Err(MlpError::NonFiniteGradient);
        }
        let cfg = &self.config;
        let (b1, b2, lr, eps) = (cfg.adam_beta1, cfg.adam_beta2, cfg.learning_rate, cfg.adam_epsilon);
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);

        let params = self.params.tensors_mut();
        let ms = self.adam.m.tensors_mut();
        let vs = self.adam.v.tensors_mut();
        for ((((_, theta), (_, m)), (_, v)), (_, g)) in params.into_iter().zip(ms).zip(vs).zip(grads.tensors()) {
            for i in 0..theta.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        self.generation += 1;
        Ok(())
    }

    /// Eval-mode probability that the pair is coreferent.
    pub fn predict_pair(&self, pair: &PairVector) -> Result<f64, MlpError> {
        self.forward(pair.as_slice(), ForwardMode::Eval).map(|(p, _)| p)
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>, MlpError> {
        self.forward_batch(x, ForwardMode::Eval).map(|c| c.output)
    }

    /// Eval-mode probabilities for a whole dataset, in chunks.
    pub fn predict_dataset(&self, data: &PairDataset) -> Result<Vec<f64>, MlpError> {
        let mut out = Vec::with_capacity(data.len());
        for chunk in data.vectors.chunks(1024) {
            let x = stack_rows(chunk, self.config.input_dim)?;
            out.extend(self.predict_batch(x.view())?);
        }
        Ok(out)
    }
}

fn outer(a: &ArrayView1<'_, f64>, b: &ArrayView1<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

fn stack_rows(rows: &[PairVector], width: usize) -> Result<Array2<f64>, MlpError> {
    let mut flat = Vec::with_capacity(rows.len() * width);
    for row in rows {
        if row.len() != width {
            return Err(MlpError::InputDim {
                expected: width,
                found: row.len(),
            });
        }
        flat.extend_from_slice(row.as_slice());
    }
    Ok(Array2::from_shape_vec((rows.len(), width), flat).expect("shape matches"))
}

/// Mean binary cross-entropy with log arguments clamped at 1e-12.
pub fn bce_loss(predictions: &[f64], labels: &[f64]) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&o, &y)| -(y * o.max(LOG_CLAMP).ln() + (1.0 - y) * (1.0 - o).max(LOG_CLAMP).ln()))
        .sum();
    total / predictions.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Accuracy of the training-mode (dropout on) predictions seen during
    /// the epoch, at threshold 0.5.
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub epochs_run: usize,
    pub optimizer_steps: u64,
    pub train_pairs: usize,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// The report without timing, for determinism checks.
    pub fn without_timing(&self) -> TrainReport {
        TrainReport {
            wall_time_secs: 0.0,
            ..self.clone()
        }
    }
}

/// Trains with minibatch Adam; see [`train_with`].
pub fn train(model: MlpModel, dataset: &PairDataset) -> Result<(MlpModel, TrainReport), MlpError> {
    train_with(model, dataset, |_| {})
}

/// Shuffles every epoch, walks minibatches of `batch_size` (the last one
/// may be smaller) and takes one Adam step per batch. `on_epoch` sees each
/// epoch's statistics as they are produced.
pub fn train_with(
    mut model: MlpModel,
    dataset: &PairDataset,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(MlpModel, TrainReport), MlpError> {
    if dataset.is_empty() {
        return Err(MlpError::EmptyDataset);
    }
    model.config.validate()?;
    let started = Instant::now();
    let cfg = model.config.clone();
    let x = stack_rows(&dataset.vectors, cfg.input_dim)?;
    let y: Vec<f64> = dataset.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epochs = Vec::new();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let cache = model.forward_batch(xb.view(), ForwardMode::Train { seed: rng.random() })?;
            let out = cache.output.as_slice().expect("contiguous");
            loss_sum += bce_loss(out, &yb) * batch.len() as f64;
            correct += out.iter().zip(&yb).filter(|(o, t)| (**o > 0.5) == (**t > 0.5)).count();
            let grads = model.backward(&cache, &yb)?;
            model.adam_step(&grads)?;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / dataset.len() as f64,
            train_accuracy: correct as f64 / dataset.len() as f64,
        };
        on_epoch(&stats);
        let stop = stats.mean_loss < cfg.early_stop_loss;
        epochs.push(stats);
        if stop {
            break;
        }
    }

    let report = TrainReport {
        epochs_run: epochs.len(),
        epochs,
        optimizer_steps: model.adam.step,
        train_pairs: dataset.len(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

#[derive(Serialize, Deserialize)]
struct AdamFile {
    step: u64,
    m: TensorsFile,
    v: TensorsFile,
}

#[derive(Serialize, Deserialize)]
struct TensorsFile {
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    w_out: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_out: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    config: MlpConfig,
    dims: [usize; 4],
    #[serde(flatten)]
    tensors: TensorsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Featurizer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adam: Option<AdamFile>,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

impl TensorsFile {
    fn from_params(p: &Params, output_bias: bool) -> Self {
        TensorsFile {
            w1: rows(&p.w1),
            b1: p.b1.to_vec(),
            w2: rows(&p.w2),
            b2: p.b2.to_vec(),
            w_out: p.w_out.to_vec(),
            b_out: output_bias.then_some(p.b_out),
        }
    }

    fn into_params(self, cfg: &MlpConfig) -> Result<Params, MlpError> {
        let matrix = |name: &str, data: Vec<Vec<f64>>, r: usize, c: usize| {
            if data.len() != r || data.iter().any(|row| row.len() != c) {
                return Err(MlpError::ModelFormatError(format!("{name} must be {r}x{c}")));
            }
            Ok(Array2::from_shape_vec((r, c), data.into_iter().flatten().collect()).expect("checked"))
        };
        let vector = |name: &str, data: Vec<f64>, n: usize| {
            if data.len() != n {
                return Err(MlpError::ModelFormatError(format!("{name} must have length {n}")));
            }
            Ok(Array1::from(data))
        };
        let params = Params {
            w1: matrix("w1", self.w1, cfg.hidden1, cfg.input_dim)?,
            b1: vector("b1", self.b1, cfg.hidden1)?,
            w2: matrix("w2", self.w2, cfg.hidden2, cfg.hidden1)?,
            b2: vector("b2", self.b2, cfg.hidden2)?,
            w_out: vector("w_out", self.w_out, cfg.hidden2)?,
            b_out: self.b_out.unwrap_or(0.0),
        };
        if !params.all_finite() {
            return Err(MlpError::ModelFormatError("non-finite parameter".into()));
        }
        Ok(params)
    }
}

impl MlpModel {
    fn to_file(&self, with_adam: bool) -> ModelFile {
        let cfg = &self.config;
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            config: cfg.clone(),
            dims: [cfg.input_dim, cfg.hidden1, cfg.hidden2, 1],
            tensors: TensorsFile::from_params(&self.params, cfg.output_bias),
            features: self.features.clone(),
            adam: with_adam.then(|| AdamFile {
                step: self.adam.step,
                m: TensorsFile::from_params(&self.adam.m, cfg.output_bias),
                v: TensorsFile::from_params(&self.adam.v, cfg.output_bias),
            }),
        }
    }

    /// Inference model file: weights only.
    pub fn save(&self) -> Vec<u8> {
        serde_json::to_vec(&self.to_file(false)).expect("model serializes")
    }

    /// Checkpoint: weights plus Adam moments and step counter.
    pub fn save_checkpoint(&self) -> Vec<u8> {
        serde_json::to_vec(&self.to_file(true)).expect("model serializes")
    }

    /// Loads either a model file or a checkpoint.
    pub fn load(bytes: &[u8]) -> Result<Self, MlpError> {
        let file: ModelFile =
            serde_json::from_slice(bytes).map_err(|e| MlpError::ModelFormatError(e.to_string()))?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(MlpError::ModelFormatError(format!(
                "unsupported version {} (expected {MODEL_FORMAT_VERSION})",
                file.version
            )));
        }
        let cfg = file.config;
        cfg.validate().map_err(|e| MlpError::ModelFormatError(e.to_string()))?;
        if file.dims != [cfg.input_dim, cfg.hidden1, cfg.hidden2, 1] {
            return Err(MlpError::ModelFormatError(format!(
                "dims {:?} disagree with config",
                file.dims
            )));
        }
        let params = file.tensors.into_params(&cfg)?;
        let mut model = MlpModel::from_params(cfg, params);
        if let Some(adam) = file.adam {
            model.adam = AdamState {
                step: adam.step,
                m: adam.m.into_params(&model.config)?,
                v: adam.v.into_params(&model.config)?,
            };
        }
        model.features = file.features;
        Ok(model)
    }
}
