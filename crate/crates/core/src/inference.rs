//! Direction of the reported effect for an (intervention, outcome,
//! evidence sentence) candidate.

use serde::{Deserialize, Serialize};

use crate::corpus::Direction;
use crate::encoder::EncoderBackend;
use crate::error::{Error, Result};
use crate::eval::direction_prf;
use crate::features::{candidate_feature_dim, candidate_features};
use crate::nn::{argmax, fit_head, Activation, LinearHead, TrainConfig};
use crate::text::tokenize_words;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferSample {
    pub intervention: Vec<String>,
    pub outcome: Vec<String>,
    pub sentence: Vec<String>,
    pub label: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceModel {
    pub head: LinearHead,
    pub dev_macro_f1: f64,
}

fn words(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

impl InferenceModel {
    pub fn new(dim: usize) -> InferenceModel {
        InferenceModel {
            head: LinearHead::new(Activation::Softmax, 3, candidate_feature_dim(dim)),
            dev_macro_f1: 0.0,
        }
    }

    /// Class probabilities in [`Direction::ALL`] order.
    pub fn probabilities(
        &self,
        backend: &dyn EncoderBackend,
        intervention: &[&str],
        outcome: &[&str],
        evidence: &[&str],
    ) -> Result<Vec<f64>> {
        if evidence.is_empty() {
            return Err(Error::input("evidence sentence is empty"));
        }
        if outcome.is_empty() {
            return Err(Error::input("outcome text is empty"));
        }
        let x = candidate_features(backend, Some(intervention), outcome, evidence)?;
        Ok(self.head.probabilities(&x))
    }
}

/// Most probable direction and its probability.
pub fn predict_direction_words(
    model: &InferenceModel,
    backend: &dyn EncoderBackend,
    intervention: &[&str],
    outcome: &[&str],
    evidence: &[&str],
) -> Result<(Direction, f64)> {
    let p = model.probabilities(backend, intervention, outcome, evidence)?;
    let k = argmax(&p);
    Ok((Direction::from_index(k).expect("three classes"), p[k]))
}

pub fn predict_direction(
    model: &InferenceModel,
    backend: &dyn EncoderBackend,
    intervention: &str,
    outcome: &str,
    evidence: &str,
) -> Result<(Direction, f64)> {
    predict_direction_words(
        model,
        backend,
        &tokenize_words(intervention),
        &tokenize_words(outcome),
        &tokenize_words(evidence),
    )
}

fn macro_f1(head: &LinearHead, data: &[(Vec<f64>, usize)]) -> f64 {
    let gold: Vec<Direction> = data.iter().map(|(_, y)| Direction::from_index(*y).expect("label")).collect();
    let pred: Vec<Direction> = data
        .iter()
        .map(|(x, _)| Direction::from_index(argmax(&head.probabilities(x))).expect("label"))
        .collect();
    direction_prf(&gold, &pred).map_or(0.0, |s| s.macro_f1)
}

/// Keeps the parameters with the best dev macro-F1.
pub fn train_inference(
    backend: &dyn EncoderBackend,
    train: &[InferSample],
    dev: &[InferSample],
    config: &TrainConfig,
) -> Result<InferenceModel> {
    for d in Direction::ALL {
        if !train.iter().any(|s| s.label == d) {
            return Err(Error::input(format!("inference training data has no {d} samples")));
        }
    }
    let featurize = |samples: &[InferSample]| -> Result<Vec<(Vec<f64>, usize)>> {
        samples
            .iter()
            .map(|s| {
                let x = candidate_features(backend, Some(&words(&s.intervention)), &words(&s.outcome), &words(&s.sentence))?;
                Ok((x, s.label.index()))
            })
            .collect()
    };
    let model = InferenceModel::new(backend.dim());
    let (head, dev_macro_f1) = fit_head(model.head, &featurize(train)?, &featurize(dev)?, config, macro_f1)?;
    Ok(InferenceModel { head, dev_macro_f1 })
}
