//! Small dense-model toolkit: log-space helpers, Adam, and linear heads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn logsumexp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let z = logsumexp(logits.iter().copied());
    logits.iter().map(|l| (l - z).exp()).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Adam {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    /// Applies one descent step along `grads`.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.learning_rate * mhat / (vhat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// One logit, probability of the positive class.
    Sigmoid,
    Softmax,
}

/// Affine map from a feature vector to class scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub activation: Activation,
    pub num_classes: usize,
    pub input_dim: usize,
    /// Row-major `outputs × (input_dim + 1)`; the last column is the bias.
    pub weights: Vec<f64>,
}

impl LinearHead {
    pub fn new(activation: Activation, num_classes: usize, input_dim: usize) -> LinearHead {
        let outputs = match activation {
            Activation::Sigmoid => 1,
            Activation::Softmax => num_classes,
        };
        LinearHead {
            activation,
            num_classes,
            input_dim,
            weights: vec![0.0; outputs * (input_dim + 1)],
        }
    }

    fn outputs(&self) -> usize {
        match self.activation {
            Activation::Sigmoid => 1,
            Activation::Softmax => self.num_classes,
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let stride = self.input_dim + 1;
        (0..self.outputs())
            .map(|k| {
                let row = &self.weights[k * stride..(k + 1) * stride];
                row[..self.input_dim].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + row[self.input_dim]
            })
            .collect()
    }

    /// Class distribution. Sigmoid heads report `[1 - p, p]`.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let logits = self.logits(x);
        match self.activation {
            Activation::Sigmoid => {
                let p = sigmoid(logits[0]);
                vec![1.0 - p, p]
            }
            Activation::Softmax => softmax(&logits),
        }
    }

    /// Cross-entropy loss of one example, accumulating its gradient.
    pub fn loss_and_grad(&self, x: &[f64], label: usize, grad: &mut [f64]) -> f64 {
        let stride = self.input_dim + 1;
        let probs = self.probabilities(x);
        let deltas: Vec<f64> = match self.activation {
            Activation::Sigmoid => vec![probs[1] - if label == 1 { 1.0 } else { 0.0 }],
            Activation::Softmax => probs
                .iter()
                .enumerate()
                .map(|(k, p)| p - if k == label { 1.0 } else { 0.0 })
                .collect(),
        };
        for (k, d) in deltas.iter().enumerate() {
            let row = &mut grad[k * stride..(k + 1) * stride];
            for (g, v) in row[..self.input_dim].iter_mut().zip(x) {
                *g += d * v;
            }
            row[self.input_dim] += d;
        }
        -probs[label].max(1e-300).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_epochs() -> usize {
    20
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_patience() -> usize {
    5
}
fn default_batch_size() -> usize {
    8
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: default_epochs(),
            learning_rate: default_learning_rate(),
            patience: default_patience(),
            batch_size: default_batch_size(),
            seed: 0,
        }
    }
}

/// Fits `head` with mini-batch Adam, keeping the parameters with the best
/// `score` on the dev set. Training stops after `patience` epochs without
/// improvement. Returns the best head and its dev score.
pub fn fit_head<F>(
    mut head: LinearHead,
    train: &[(Vec<f64>, usize)],
    dev: &[(Vec<f64>, usize)],
    config: &TrainConfig,
    score: F,
) -> Result<(LinearHead, f64)>
where
    F: Fn(&LinearHead, &[(Vec<f64>, usize)]) -> f64,
{
    if train.is_empty() {
        return Err(Error::input("no training examples"));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(head.weights.len(), config.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grad = vec![0.0; head.weights.len()];
    let eval_set = if dev.is_empty() { train } else { dev };
    let mut best = (head.clone(), score(&head, eval_set));
    let mut stale = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let (x, y) = &train[i];
                total += head.loss_and_grad(x, *y, &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.update(&mut head.weights, &grad);
        }
        let s = score(&head, eval_set);
        log::debug!(
            "epoch {epoch}: loss {:.4} dev {:.4}",
            total / train.len() as f64,
            s
        );
        if s > best.1 {
            best = (head.clone(), s);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    Ok(best)
}

/// Fraction of examples whose argmax class equals the label.
pub fn accuracy(head: &LinearHead, data: &[(Vec<f64>, usize)]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = data
        .iter()
        .filter(|(x, y)| argmax(&head.probabilities(x)) == *y)
        .count();
    correct as f64 / data.len() as f64
}
