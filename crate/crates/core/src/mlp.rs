//! Fully connected 64→50→50→2 classifier (ReLU hidden layers, softmax
//! output) trained with Adam on binary cross-entropy.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{LinkCondition, Sample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const LAYER_SIZES: [usize; 4] = [64, 50, 50, 2];

/// Probability clipping applied inside the loss.
pub const LOSS_EPSILON: f64 = 1e-12;

/// Dense layer `y = W x + b` with `W` stored row-major as `n_out × n_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<S> {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<S>,
    pub biases: Vec<S>,
}

impl<S: Scalar> Layer<S> {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![S::zero(); n_in * n_out],
            biases: vec![S::zero(); n_out],
        }
    }

    fn apply(&self, x: &[S]) -> Vec<S> {
        (0..self.n_out)
            .map(|o| {
                let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
                row.iter()
                    .zip(x)
                    .fold(self.biases[o], |acc, (&w, &v)| acc + w * v)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel<S> {
    pub layers: Vec<Layer<S>>,
}

/// Parameter gradients, shaped like the model.
pub type Gradients<S> = MlpModel<S>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epochs: 10,
            batch_size: 16,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.batch_size >= 1
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid training configuration {self:?}"
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub p_nlos: f64,
    pub is_los: bool,
}

impl GateDecision {
    /// Ties at exactly 0.5 count as line-of-sight.
    pub fn from_probability(p_nlos: f64) -> Self {
        Self {
            p_nlos,
            is_los: p_nlos <= 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub accuracy: f64,
    /// Fraction of links classified LoS whose true condition is NLoS.
    pub pf_los: f64,
    /// Fraction of links classified NLoS whose true condition is LoS.
    pub pf_nlos: f64,
}

fn softmax2<S: Scalar>(z: &[S]) -> Vec<S> {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    vec![e0 / s, e1 / s]
}

impl<S: Scalar> MlpModel<S> {
    pub fn zeros() -> Self {
        Self {
            layers: LAYER_SIZES
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut m = Self::zeros();
        for layer in &mut m.layers {
            let limit = (6.0 / (layer.n_in + layer.n_out) as f64).sqrt();
            for w in &mut layer.weights {
                *w = S::of(rng.gen_range(-limit..limit));
            }
        }
        m
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &S> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut S> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    fn activations(&self, input: &[S]) -> Vec<Vec<S>> {
        assert_eq!(input.len(), self.layers[0].n_in, "input width mismatch");
        let mut acts = vec![input.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(acts.last().expect("nonempty"));
            if i + 1 < self.layers.len() {
                for v in &mut z {
                    *v = v.max(S::zero());
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Class probabilities `[p_los, p_nlos]`.
    ///
    /// # Panics
    /// If `input` does not have 64 entries.
    pub fn forward(&self, input: &[S]) -> Vec<S> {
        softmax2(self.activations(input).last().expect("output layer"))
    }

    /// Mean loss and its exact gradient over a batch.
    pub fn gradient(&self, inputs: &[&[S]], labels: &[LinkCondition]) -> (S, Gradients<S>) {
        assert!(
            !inputs.is_empty() && inputs.len() == labels.len(),
            "batch must be nonempty and labeled"
        );
        let mut grads = Self::zeros();
        let m = S::of_usize(inputs.len());
        let eps = S::of(LOSS_EPSILON);
        let mut loss = S::zero();
        for (x, &label) in inputs.iter().zip(labels) {
            let acts = self.activations(x);
            let probs = softmax2(acts.last().expect("output"));
            let p = S::of_usize(label.index());
            let q = probs[1];
            let clipped = q.max(eps).min(S::one() - eps);
            loss -= p * clipped.ln() + (S::one() - p) * (S::one() - clipped).ln();
            // Through the clip the loss is flat, so the gradient vanishes there.
            let g1 = if q < eps || q > S::one() - eps {
                S::zero()
            } else {
                (q - p) / m
            };
            let mut delta = vec![-g1, g1];
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let gl = &mut grads.layers[li];
                for (o, &d) in delta.iter().enumerate() {
                    gl.biases[o] += d;
                    let row = &mut gl.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    for (w, &x) in row.iter_mut().zip(input) {
                        *w += d * x;
                    }
                }
                if li == 0 {
                    break;
                }
                let mut prev = vec![S::zero(); layer.n_in];
                for (row, &d) in layer.weights.chunks(layer.n_in).zip(&delta) {
                    for (pv, &w) in prev.iter_mut().zip(row) {
                        *pv += w * d;
                    }
                }
                for (pv, &a) in prev.iter_mut().zip(input) {
                    if a <= S::zero() {
                        *pv = S::zero();
                    }
                }
                delta = prev;
            }
        }
        (loss / m, grads)
    }

    pub fn gate(&self, cfr: &[S]) -> GateDecision {
        GateDecision::from_probability(self.forward(cfr)[1].f64())
    }

    pub fn cast<T: Scalar>(&self) -> MlpModel<T> {
        MlpModel {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    n_in: l.n_in,
                    n_out: l.n_out,
                    weights: l.weights.iter().map(|w| T::of(w.f64())).collect(),
                    biases: l.biases.iter().map(|b| T::of(b.f64())).collect(),
                })
                .collect(),
        }
    }

    /// The four layer sizes as little-endian `u32`, then every
    /// parameter as little-endian `f64` (per layer: weights row-major, then
    /// biases).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.n_params());
        out.extend_from_slice(&(self.layers[0].n_in as u32).to_le_bytes());
        for l in &self.layers {
            out.extend_from_slice(&(l.n_out as u32).to_le_bytes());
        }
        for p in self.params() {
            out.extend_from_slice(&p.f64().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let word = |i: usize| -> Result<u32> {
            bytes
                .get(4 * i..4 * i + 4)
                .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
                .ok_or_else(|| Error::ModelFormat("truncated header".into()))
        };
        let n_sizes = LAYER_SIZES.len();
        let sizes = (0..n_sizes).map(word).collect::<Result<Vec<_>>>()?;
        if sizes.iter().map(|&s| s as usize).ne(LAYER_SIZES) {
            return Err(Error::ModelFormat(format!(
                "unsupported layer sizes {sizes:?}"
            )));
        }
        let mut model = Self::zeros();
        let body = &bytes[4 * n_sizes..];
        if body.len() != 8 * model.n_params() {
            return Err(Error::ModelFormat(format!(
                "expected {} parameter bytes, found {}",
                8 * model.n_params(),
                body.len()
            )));
        }
        for (p, chunk) in model.params_mut().zip(body.chunks_exact(8)) {
            *p = S::of(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// `−(1/M) Σ [p ln p̂ + (1−p) ln(1−p̂)]` with `p̂` clipped to `[ε, 1−ε]`.
pub fn bce_loss<S: Scalar>(predictions: &[S], labels: &[S]) -> S {
    let eps = S::of(LOSS_EPSILON);
    let total = predictions
        .iter()
        .zip(labels)
        .fold(S::zero(), |acc, (&q, &p)| {
            let q = q.max(eps).min(S::one() - eps);
            acc - (p * q.ln() + (S::one() - p) * (S::one() - q).ln())
        });
    total / S::of_usize(predictions.len().max(1))
}

struct Adam<S> {
    m: Vec<S>,
    v: Vec<S>,
    t: i32,
}

impl<S: Scalar> Adam<S> {
    fn new(n: usize) -> Self {
        Self {
            m: vec![S::zero(); n],
            v: vec![S::zero(); n],
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MlpModel<S>, grads: &Gradients<S>, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (S::of(cfg.beta1), S::of(cfg.beta2));
        let c1 = S::one() - b1.powi(self.t);
        let c2 = S::one() - b2.powi(self.t);
        let lr = S::of(cfg.learning_rate);
        let eps = S::of(cfg.epsilon);
        for (((p, g), m), v) in model
            .params_mut()
            .zip(grads.params())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = b1 * *m + (S::one() - b1) * *g;
            *v = b2 * *v + (S::one() - b2) * *g * *g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

/// Held-out accuracy and false-detection rates of `model` on `samples`.
pub fn evaluate<S: Scalar>(model: &MlpModel<S>, samples: &[Sample]) -> (f64, f64, f64) {
    let mut correct = 0usize;
    let (mut said_los, mut said_los_wrong, mut said_nlos, mut said_nlos_wrong) =
        (0usize, 0usize, 0usize, 0usize);
    for s in samples {
        let x: Vec<S> = s.features.iter().map(|&v| S::of(v)).collect();
        let g = model.gate(&x);
        let truth_los = s.label == LinkCondition::LoS;
        if g.is_los == truth_los {
            correct += 1;
        }
        if g.is_los {
            said_los += 1;
            said_los_wrong += usize::from(!truth_los);
        } else {
            said_nlos += 1;
            said_nlos_wrong += usize::from(truth_los);
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (
        ratio(correct, samples.len()),
        ratio(said_los_wrong, said_los),
        ratio(said_nlos_wrong, said_nlos),
    )
}

/// Trains from a Glorot initialization on `train` and reports on `test`.
pub fn train<S: Scalar, R: Rng + ?Sized>(
    train: &[Sample],
    test: &[Sample],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<(MlpModel<S>, TrainReport)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut model = MlpModel::<S>::glorot(rng);
    let mut adam = Adam::new(model.n_params());
    let inputs: Vec<Vec<S>> = train
        .iter()
        .map(|s| s.features.iter().map(|&v| S::of(v)).collect())
        .collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&[S]> = batch.iter().map(|&i| inputs[i].as_slice()).collect();
            let ys: Vec<LinkCondition> = batch.iter().map(|&i| train[i].label).collect();
            let (loss, grads) = model.gradient(&xs, &ys);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged(format!(
                    "loss became {loss} in epoch {epoch}"
                )));
            }
            total += loss.f64() * batch.len() as f64;
            adam.step(&mut model, &grads, config);
        }
        epoch_losses.push(total / train.len() as f64);
    }
    let (accuracy, pf_los, pf_nlos) = evaluate(&model, test);
    Ok((
        model,
        TrainReport {
            epoch_losses,
            accuracy,
            pf_los,
            pf_nlos,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_is_ignorant() {
        let m = MlpModel::<f64>::zeros();
        assert_eq!(m.forward(&[0.3; 64]), vec![0.5, 0.5]);
        let (_, g) = m.gradient(
            &[&[0.2; 64], &[0.7; 64]],
            &[LinkCondition::LoS, LinkCondition::NLoS],
        );
        assert!(g.params().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn loss_examples() {
        assert!((bce_loss(&[0.5, 0.5], &[0.0, 1.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(&[0.0, 1.0], &[0.0, 1.0]) <= 1e-11);
        assert!((bce_loss(&[0.8], &[1.0]) - 0.8f64.ln().abs()).abs() < 1e-15);
    }

    #[test]
    fn gate_threshold() {
        assert!(!GateDecision::from_probability(0.7).is_los);
        assert!(GateDecision::from_probability(0.5).is_los);
        assert!(GateDecision::from_probability(0.0).is_los);
    }

    #[test]
    fn single_logit_fixture_matches_sigmoid() {
        let mut m = MlpModel::<f64>::zeros();
        m.layers[0].weights[0] = 1.0;
        m.layers[1].weights[0] = 1.0;
        m.layers[2].weights[50] = 2.0;
        m.layers[2].biases[1] = -0.5;
        let mut x = [0.0; 64];
        x[0] = 0.9;
        let expected = 1.0 / (1.0 + (-(2.0 * 0.9 - 0.5f64)).exp());
        assert!((m.forward(&x)[1] - expected).abs() < 1e-15);
    }
}
