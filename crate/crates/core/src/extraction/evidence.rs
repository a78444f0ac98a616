//! Binary classifier over sentences: does the sentence report a comparative
//! result?

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EvidenceSentence};
use crate::encoder::EncoderBackend;
use crate::error::{Error, Result};
use crate::features::{sentence_feature_dim, sentence_features};
use crate::nn::{fit_head, Activation, LinearHead, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_threshold() -> f64 {
    0.5
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        EvidenceConfig {
            threshold: default_threshold(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceClassifier {
    pub head: LinearHead,
    pub threshold: f64,
    pub dev_accuracy: f64,
}

/// A sentence given as its tokens, with a gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceSample {
    pub words: Vec<String>,
    pub label: bool,
}

impl EvidenceClassifier {
    pub fn score_words(&self, backend: &dyn EncoderBackend, words: &[&str]) -> Result<f64> {
        let x = sentence_features(backend, words)?;
        Ok(self.head.probabilities(&x)[1])
    }

    /// One score per sentence of the document.
    pub fn score_sentences(&self, backend: &dyn EncoderBackend, doc: &Document) -> Result<Vec<f64>> {
        doc.sentences()
            .iter()
            .map(|s| self.score_words(backend, &doc.token_texts(*s)))
            .collect()
    }
}

fn featurize(backend: &dyn EncoderBackend, samples: &[SentenceSample]) -> Result<Vec<(Vec<f64>, usize)>> {
    samples
        .iter()
        .map(|s| {
            let words: Vec<&str> = s.words.iter().map(String::as_str).collect();
            Ok((sentence_features(backend, &words)?, usize::from(s.label)))
        })
        .collect()
}

pub fn train_evidence_classifier(
    backend: &dyn EncoderBackend,
    train: &[SentenceSample],
    dev: &[SentenceSample],
    config: &EvidenceConfig,
) -> Result<EvidenceClassifier> {
    if !(0.0..=1.0).contains(&config.threshold) {
        return Err(Error::Config(format!("evidence threshold {} outside [0, 1]", config.threshold)));
    }
    let positives = train.iter().filter(|s| s.label).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::input("evidence training data must contain both classes"));
    }
    let train_x = featurize(backend, train)?;
    let dev_x = featurize(backend, dev)?;
    let head = LinearHead::new(Activation::Sigmoid, 2, sentence_feature_dim(backend.dim()));
    let threshold = config.threshold;
    let (head, dev_accuracy) = fit_head(head, &train_x, &dev_x, &config.train, |h, data| {
        let correct = data
            .iter()
            .filter(|(x, y)| (h.probabilities(x)[1] >= threshold) == (*y == 1))
            .count();
        correct as f64 / data.len().max(1) as f64
    })?;
    Ok(EvidenceClassifier {
        head,
        threshold,
        dev_accuracy,
    })
}

/// Sentences scoring at or above the classifier threshold, by index.
pub fn classify_sentences(
    clf: &EvidenceClassifier,
    backend: &dyn EncoderBackend,
    doc: &Document,
) -> Result<Vec<EvidenceSentence>> {
    Ok(clf
        .score_sentences(backend, doc)?
        .into_iter()
        .enumerate()
        .filter(|(_, score)| *score >= clf.threshold)
        .map(|(sentence_index, score)| EvidenceSentence { sentence_index, score })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::HashedEncoder;
    use crate::text::document_from_sentences;

    fn sample(text: &str, label: bool) -> SentenceSample {
        SentenceSample {
            words: text.split_whitespace().map(String::from).collect(),
            label,
        }
    }

    fn separable() -> Vec<SentenceSample> {
        let subjects = ["pain", "mortality", "nausea", "fatigue", "weight", "sleep", "cost", "anxiety"];
        let mut out = Vec::new();
        for s in subjects {
            out.push(sample(&format!("{s} was significantly reduced versus control"), true));
            out.push(sample(&format!("we enrolled adults to study {s} in clinics"), false));
        }
        out
    }

    #[test]
    fn separable_fixture() {
        let enc = HashedEncoder::new(32, 1).unwrap();
        let data = separable();
        let config = EvidenceConfig {
            train: TrainConfig {
                epochs: 200,
                learning_rate: 0.05,
                patience: 200,
                ..TrainConfig::default()
            },
            ..EvidenceConfig::default()
        };
        let clf = train_evidence_classifier(&enc, &data[..12], &data[12..], &config).unwrap();
        assert!(clf.dev_accuracy >= 0.95);
        let doc = document_from_sentences(
            "d",
            &[
                "we enrolled adults to study pain in clinics".into(),
                "pain was significantly reduced versus control".into(),
            ],
        )
        .unwrap();
        let found = classify_sentences(&clf, &enc, &doc).unwrap();
        assert_eq!(found.iter().map(|e| e.sentence_index).collect::<Vec<_>>(), vec![1]);
        for s in clf.score_sentences(&enc, &doc).unwrap() {
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn single_class_rejected() {
        let enc = HashedEncoder::new(8, 1).unwrap();
        let data = vec![sample("a b", true), sample("c d", true)];
        assert!(train_evidence_classifier(&enc, &data, &[], &EvidenceConfig::default()).is_err());
    }
}
