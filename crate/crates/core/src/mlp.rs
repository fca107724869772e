//! Feedforward sigmoid classifier over per-pixel band vectors.
//!
//! Output neuron 0 scores non-water, neuron 1 scores water. Training minimizes
//! the mean binary cross-entropy of all output neurons against one-hot targets.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster_io::RasterStack;
use crate::segment::SegmentationMask;

// samples per gradient partial; partials are summed in chunk order
const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    /// `weights[l]` is row-major `layer_sizes[l+1] x layer_sizes[l]`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    /// Inputs are mapped to `(x - offset) * scale` before the first layer.
    pub input_offset: Vec<f64>,
    pub input_scale: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl MlpModel {
    /// All-zero parameters and identity input normalization.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer sizes {layer_sizes:?}")));
        }
        let pairs = layer_sizes.windows(2);
        Ok(MlpModel {
            layer_sizes: layer_sizes.to_vec(),
            weights: pairs.clone().map(|p| vec![0.0; p[0] * p[1]]).collect(),
            biases: pairs.map(|p| vec![0.0; p[1]]).collect(),
            input_offset: vec![0.0; layer_sizes[0]],
            input_scale: vec![1.0; layer_sizes[0]],
        })
    }

    /// Uniform weights in `±1/sqrt(fan_in)`, zero biases.
    pub fn random(layer_sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut m = Self::zeros(layer_sizes)?;
        for (l, w) in m.weights.iter_mut().enumerate() {
            let bound = 1.0 / (layer_sizes[l] as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.layer_sizes;
        let shape_ok = s.len() >= 2
            && !s.contains(&0)
            && self.weights.len() == s.len() - 1
            && self.biases.len() == s.len() - 1
            && self.input_offset.len() == s[0]
            && self.input_scale.len() == s[0]
            && (0..s.len() - 1).all(|l| self.weights[l].len() == s[l] * s[l + 1] && self.biases[l].len() == s[l + 1]);
        if !shape_ok {
            return Err(Error::DimensionMismatch(format!("parameter shapes do not match layer sizes {s:?}")));
        }
        let finite = self
            .weights
            .iter()
            .chain(&self.biases)
            .chain([&self.input_offset, &self.input_scale])
            .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::Degenerate("model has non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Layer by layer: weights then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.parameter_count());
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&params[at..at + nw]);
            b.copy_from_slice(&params[at + nw..at + nw + nb]);
            at += nw + nb;
        }
    }

    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let x0 = input
            .iter()
            .zip(self.input_offset.iter().zip(&self.input_scale))
            .map(|(x, (o, s))| (x - o) * s)
            .collect();
        let mut acts: Vec<Vec<f64>> = vec![x0];
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let n_in = self.layer_sizes[l];
            let prev = &acts[l];
            let next = b
                .iter()
                .enumerate()
                .map(|(j, bj)| sigmoid(bj + w[j * n_in..(j + 1) * n_in].iter().zip(prev).map(|(a, b)| a * b).sum::<f64>()))
                .collect();
            acts.push(next);
        }
        acts
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.inputs() {
            return Err(Error::DimensionMismatch(format!("input has {} values, model expects {}", input.len(), self.inputs())));
        }
        Ok(self.activations(input).pop().unwrap())
    }

    fn classify(&self, input: &[f64]) -> bool {
        let out = self.activations(input).pop().unwrap();
        out[1] > out[0]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: MlpModel = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        model.validate()?;
        Ok(model)
    }
}

/// Labeled feature vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<bool>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature values for {} samples of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { band: "features".into(), index: i });
        }
        Ok(Dataset { dim, features, labels })
    }

    /// One sample per pixel, bands in stack order; labels from `truth`.
    pub fn from_stack(stack: &RasterStack, truth: &SegmentationMask) -> Result<Self> {
        if stack.width() != truth.width() || stack.height() != truth.height() {
            return Err(Error::DimensionMismatch("stack and mask sizes differ".into()));
        }
        Dataset::new(stack.bands().len(), pixel_features(stack), truth.water().to_vec())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, i: usize) -> (&[f64], bool) {
        (&self.features[i * self.dim..(i + 1) * self.dim], self.labels[i])
    }
}

fn pixel_features(stack: &RasterStack) -> Vec<f64> {
    let bands = stack.bands();
    let n = stack.width() * stack.height();
    let mut out = Vec::with_capacity(n * bands.len());
    for i in 0..n {
        out.extend(bands.iter().map(|b| b.values()[i]));
    }
    out
}

/// Mean cross-entropy over `idx` and its gradient with respect to the flat parameters.
pub fn loss_and_gradient(model: &MlpModel, data: &Dataset, idx: &[usize]) -> (f64, Vec<f64>) {
    let np = model.parameter_count();
    let partials: Vec<(f64, Vec<f64>)> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; np];
            let mut loss = 0.0;
            for &i in chunk {
                let (x, label) = data.sample(i);
                loss += sample_backprop(model, x, label, &mut grad);
            }
            (loss, grad)
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; np];
    for (l, g) in partials {
        loss += l;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    let n = idx.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

pub fn loss(model: &MlpModel, data: &Dataset, idx: &[usize]) -> f64 {
    let partials: Vec<f64> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&i| {
                    let (x, label) = data.sample(i);
                    let out = model.activations(x).pop().unwrap();
                    cross_entropy(&out, label)
                })
                .sum()
        })
        .collect();
    partials.iter().sum::<f64>() / idx.len().max(1) as f64
}

fn target(k: usize, label: bool) -> f64 {
    if (k == 1) == label {
        1.0
    } else {
        0.0
    }
}

fn cross_entropy(out: &[f64], label: bool) -> f64 {
    const EPS: f64 = 1e-300;
    out.iter()
        .enumerate()
        .map(|(k, &y)| {
            let t = target(k, label);
            -(t * y.max(EPS).ln() + (1.0 - t) * (1.0 - y).max(EPS).ln())
        })
        .sum()
}

fn sample_backprop(model: &MlpModel, x: &[f64], label: bool, grad: &mut [f64]) -> f64 {
    let acts = model.activations(x);
    let out = acts.last().unwrap();
    let loss = cross_entropy(out, label);
    // sigmoid output with cross-entropy: dL/dz = y - t
    let mut delta: Vec<f64> = out.iter().enumerate().map(|(k, y)| y - target(k, label)).collect();
    let offsets: Vec<usize> = model
        .weights
        .iter()
        .zip(&model.biases)
        .scan(0, |at, (w, b)| {
            let start = *at;
            *at += w.len() + b.len();
            Some(start)
        })
        .collect();
    for l in (0..model.weights.len()).rev() {
        let n_in = model.layer_sizes[l];
        let prev = &acts[l];
        let w = &model.weights[l];
        let base = offsets[l];
        for (j, dj) in delta.iter().enumerate() {
            let row = &mut grad[base + j * n_in..base + (j + 1) * n_in];
            row.iter_mut().zip(prev).for_each(|(g, a)| *g += dj * a);
            grad[base + w.len() + j] += dj;
        }
        if l > 0 {
            delta = (0..n_in)
                .map(|i| {
                    let back: f64 = delta.iter().enumerate().map(|(j, dj)| dj * w[j * n_in + i]).sum();
                    back * prev[i] * (1.0 - prev[i])
                })
                .collect();
        }
    }
    loss
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    /// Møller scaled conjugate gradient.
    Scg { sigma: f64, lambda0: f64 },
    /// Plain full-batch gradient descent, for debugging.
    GradientDescent { learning_rate: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Scg { sigma: 1e-5, lambda0: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub optimizer: Optimizer,
    /// Standardize inputs with training-split mean and deviation.
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            train_fraction: 0.70,
            validation_fraction: 0.15,
            test_fraction: 0.15,
            seed: 0,
            max_epochs: 1000,
            patience: 6,
            optimizer: Optimizer::default(),
            normalize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_fraction, self.validation_fraction, self.test_fraction];
        if f.iter().any(|v| !(0.0..=1.0).contains(v)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 || self.train_fraction == 0.0 {
            return Err(Error::InvalidArgument(format!("split fractions {f:?} must be in [0, 1] and sum to 1")));
        }
        match self.optimizer {
            Optimizer::Scg { sigma, lambda0 } if sigma > 0.0 && lambda0 > 0.0 => Ok(()),
            Optimizer::GradientDescent { learning_rate } if learning_rate > 0.0 => Ok(()),
            o => Err(Error::InvalidArgument(format!("bad optimizer settings {o:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Parameters with the lowest validation loss seen.
    pub model: MlpModel,
    pub initial_loss: f64,
    pub final_train_loss: f64,
    pub best_validation_loss: f64,
    pub epochs: usize,
    pub test_accuracy: Option<f64>,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Fraction of `idx` classified correctly, in percent.
pub fn accuracy(model: &MlpModel, data: &Dataset, idx: &[usize]) -> Option<f64> {
    if idx.is_empty() {
        return None;
    }
    let correct: usize = idx
        .par_chunks(CHUNK)
        .map(|c| {
            c.iter()
                .filter(|&&i| {
                    let (x, label) = data.sample(i);
                    model.classify(x) == label
                })
                .count()
        })
        .sum();
    Some(100.0 * correct as f64 / idx.len() as f64)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(w: &[f64], a: f64, p: &[f64]) -> Vec<f64> {
    w.iter().zip(p).map(|(x, y)| x + a * y).collect()
}

struct Objective<'a> {
    model: MlpModel,
    data: &'a Dataset,
    idx: &'a [usize],
}

impl Objective<'_> {
    fn eval(&mut self, w: &[f64]) -> (f64, Vec<f64>) {
        self.model.set_parameters(w);
        loss_and_gradient(&self.model, self.data, self.idx)
    }

    fn value(&mut self, w: &[f64]) -> f64 {
        self.model.set_parameters(w);
        loss(&self.model, self.data, self.idx)
    }
}

struct Scg {
    sigma: f64,
    lambda: f64,
    lambda_bar: f64,
    success: bool,
    p: Vec<f64>,
    r: Vec<f64>,
    e: f64,
    delta: f64,
    k: usize,
}

impl Scg {
    fn new(sigma: f64, lambda0: f64, e: f64, grad: &[f64]) -> Self {
        let r: Vec<f64> = grad.iter().map(|g| -g).collect();
        Scg { sigma, lambda: lambda0, lambda_bar: 0.0, success: true, p: r.clone(), r, e, delta: 0.0, k: 1 }
    }

    /// One iteration; returns false once the gradient vanishes.
    fn step(&mut self, w: &mut Vec<f64>, obj: &mut Objective) -> bool {
        let n = w.len();
        let p2 = dot(&self.p, &self.p);
        if p2 == 0.0 || !p2.is_finite() {
            return false;
        }
        if self.success {
            let sk = self.sigma / p2.sqrt();
            let (_, g_shift) = obj.eval(&axpy(w, sk, &self.p));
            // r = -E'(w)
            let s: Vec<f64> = g_shift.iter().zip(&self.r).map(|(g, r)| (g + r) / sk).collect();
            self.delta = dot(&self.p, &s);
        }
        self.delta += (self.lambda - self.lambda_bar) * p2;
        if self.delta <= 0.0 {
            self.lambda_bar = 2.0 * (self.lambda - self.delta / p2);
            self.delta = -self.delta + self.lambda * p2;
            self.lambda = self.lambda_bar;
        }
        let mu = dot(&self.p, &self.r);
        let alpha = mu / self.delta;
        let trial = axpy(w, alpha, &self.p);
        let e_trial = obj.value(&trial);
        let cmp = 2.0 * self.delta * (self.e - e_trial) / (mu * mu);
        if cmp >= 0.0 && e_trial.is_finite() {
            *w = trial;
            let (e_new, g_new) = obj.eval(w);
            self.e = e_new;
            let r_new: Vec<f64> = g_new.iter().map(|g| -g).collect();
            self.lambda_bar = 0.0;
            self.success = true;
            if self.k % n == 0 {
                self.p = r_new.clone();
            } else {
                let beta = (dot(&r_new, &r_new) - dot(&r_new, &self.r)) / mu;
                self.p = axpy(&r_new, beta, &self.p);
            }
            self.r = r_new;
            if cmp >= 0.75 {
                self.lambda *= 0.25;
            }
        } else {
            self.lambda_bar = self.lambda;
            self.success = false;
        }
        if cmp < 0.25 {
            self.lambda += self.delta * (1.0 - cmp) / p2;
        }
        self.k += 1;
        self.r.iter().any(|&v| v != 0.0)
    }
}

fn split(n: usize, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = ((cfg.train_fraction * n as f64).round() as usize).clamp(1, n);
    let n_val = ((cfg.validation_fraction * n as f64).round() as usize).min(n - n_train);
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    (idx, val, test)
}

fn standardize(model: &mut MlpModel, data: &Dataset, idx: &[usize]) {
    let d = data.dim();
    let n = idx.len() as f64;
    for c in 0..d {
        let mean = idx.iter().map(|&i| data.sample(i).0[c]).sum::<f64>() / n;
        let var = idx.iter().map(|&i| (data.sample(i).0[c] - mean).powi(2)).sum::<f64>() / n;
        model.input_offset[c] = mean;
        model.input_scale[c] = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
    }
}

pub fn train(data: &Dataset, layer_sizes: &[usize], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if layer_sizes.first() != Some(&data.dim()) || layer_sizes.last() != Some(&2) {
        return Err(Error::DimensionMismatch(format!(
            "layer sizes {layer_sizes:?} need {} inputs and 2 outputs",
            data.dim()
        )));
    }
    let water = data.labels.iter().filter(|&&l| l).count();
    if water == 0 || water == data.len() {
        return Err(Error::Degenerate("training data contains a single class".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (train_idx, val_idx, test_idx) = split(data.len(), cfg, &mut rng);
    let mut model = MlpModel::random(layer_sizes, &mut rng)?;
    if cfg.normalize {
        standardize(&mut model, data, &train_idx);
    }
    let monitor = if val_idx.is_empty() { &train_idx } else { &val_idx };

    let mut obj = Objective { model: model.clone(), data, idx: &train_idx };
    let mut w = model.parameters();
    let (initial_loss, g0) = obj.eval(&w);
    let mut best_w = w.clone();
    let mut best_val = loss(&model, data, monitor);
    let mut train_loss = initial_loss;
    let mut since_best = 0;
    let mut epochs = 0;
    let mut scg = match cfg.optimizer {
        Optimizer::Scg { sigma, lambda0 } => Some(Scg::new(sigma, lambda0, initial_loss, &g0)),
        Optimizer::GradientDescent { .. } => None,
    };
    let mut grad = g0;
    while epochs < cfg.max_epochs && since_best < cfg.patience {
        epochs += 1;
        let more = match (&mut scg, cfg.optimizer) {
            (Some(s), _) => {
                let more = s.step(&mut w, &mut obj);
                train_loss = s.e;
                more
            }
            (None, Optimizer::GradientDescent { learning_rate }) => {
                w = axpy(&w, -learning_rate, &grad);
                let (l, g) = obj.eval(&w);
                train_loss = l;
                grad = g;
                grad.iter().any(|&v| v != 0.0)
            }
            (None, _) => unreachable!(),
        };
        model.set_parameters(&w);
        let val = loss(&model, data, monitor);
        if val < best_val {
            best_val = val;
            best_w.clone_from(&w);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if !more {
            break;
        }
    }
    model.set_parameters(&best_w);
    let test_accuracy = accuracy(&model, data, &test_idx);
    Ok(TrainReport {
        model,
        initial_loss,
        final_train_loss: train_loss,
        best_validation_loss: best_val,
        epochs,
        test_accuracy,
        train_indices: train_idx,
        validation_indices: val_idx,
        test_indices: test_idx,
    })
}

/// Water where output 1 strictly exceeds output 0.
pub fn predict_mask(model: &MlpModel, stack: &RasterStack) -> Result<SegmentationMask> {
    model.validate()?;
    if stack.bands().len() != model.inputs() {
        return Err(Error::DimensionMismatch(format!(
            "stack has {} bands, model expects {}",
            stack.bands().len(),
            model.inputs()
        )));
    }
    if model.outputs() != 2 {
        return Err(Error::DimensionMismatch("model must have two outputs".into()));
    }
    let (w, h) = (stack.width(), stack.height());
    let bands = stack.bands();
    let mut water = vec![false; w * h];
    water.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut x_buf = vec![0.0; bands.len()];
        for (x, cell) in row.iter_mut().enumerate() {
            for (v, b) in x_buf.iter_mut().zip(bands) {
                *v = b.get(x, y);
            }
            *cell = model.classify(&x_buf);
        }
    });
    SegmentationMask::new(w, h, water)
}
