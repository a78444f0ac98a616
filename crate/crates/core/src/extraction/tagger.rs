//! Mention tagger: windowed token features, a per-label linear emission
//! layer and a CRF over the joint BIO tag set. Tagging runs per sentence.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bio::{decode_spans, encode_spans};
use super::crf::{crf_nll_gradient, viterbi_decode, Transitions};
use super::tagset::{Tag, TagSet};
use crate::corpus::{AnnotatedDocument, Document, EntityType, Mention, Span};
use crate::encoder::{EncoderBackend, Embedding};
use crate::error::{Error, Result};
use crate::eval::token_prf;
use crate::nn::{Adam, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaggerConfig {
    /// Tokens of context on each side of the tagged token.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_window() -> usize {
    2
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            window: default_window(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub tagset: TagSet,
    pub window: usize,
    pub encoder_dim: usize,
    /// Row-major `labels × (feature_dim + 1)`, bias last.
    pub weights: Vec<f64>,
    pub transitions: Transitions,
    pub dev_token_f1: f64,
}

/// Token embeddings of one sentence, ready for feature extraction.
pub struct SentenceInput {
    embeddings: Vec<Embedding>,
}

impl SentenceInput {
    pub fn encode(backend: &dyn EncoderBackend, words: &[&str]) -> Result<SentenceInput> {
        Ok(SentenceInput {
            embeddings: backend.encode_words(words)?,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }
}

impl TaggerModel {
    pub fn new(encoder_dim: usize, window: usize) -> TaggerModel {
        let tagset = TagSet::bio();
        let transitions = Transitions::zeros(&tagset);
        let feature_dim = (2 * window + 1) * encoder_dim + 2 * window;
        TaggerModel {
            weights: vec![0.0; tagset.len() * (feature_dim + 1)],
            tagset,
            window,
            encoder_dim,
            transitions,
            dev_token_f1: 0.0,
        }
    }

    pub fn feature_dim(&self) -> usize {
        (2 * self.window + 1) * self.encoder_dim + 2 * self.window
    }

    pub fn num_labels(&self) -> usize {
        self.tagset.len()
    }

    /// Window features of token `t`: neighbour embeddings in order, zeros
    /// past the sentence edge, then one indicator per missing neighbour.
    pub fn token_features(&self, input: &SentenceInput, t: usize) -> Vec<f64> {
        let w = self.window as isize;
        let d = self.encoder_dim;
        let mut f = Vec::with_capacity(self.feature_dim());
        let mut pads = Vec::with_capacity(2 * self.window);
        for off in -w..=w {
            let pos = t as isize + off;
            if pos >= 0 && (pos as usize) < input.len() {
                f.extend_from_slice(input.embeddings[pos as usize].as_slice());
                if off != 0 {
                    pads.push(0.0);
                }
            } else {
                f.extend(std::iter::repeat_n(0.0, d));
                pads.push(1.0);
            }
        }
        f.extend(pads);
        f
    }

    pub fn emissions(&self, input: &SentenceInput) -> Vec<Vec<f64>> {
        let stride = self.feature_dim() + 1;
        (0..input.len())
            .map(|t| {
                let f = self.token_features(input, t);
                (0..self.num_labels())
                    .map(|y| {
                        let row = &self.weights[y * stride..(y + 1) * stride];
                        row[..stride - 1].iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() + row[stride - 1]
                    })
                    .collect()
            })
            .collect()
    }

    /// Flattened parameters: emission weights, then transition scores.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend(&self.transitions.scores);
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        let n = self.weights.len();
        self.weights.copy_from_slice(&params[..n]);
        self.transitions.scores.copy_from_slice(&params[n..]);
    }

    /// Negative log-likelihood of `gold` and its gradient in the layout of
    /// [`TaggerModel::parameters`].
    pub fn nll_and_gradient(&self, input: &SentenceInput, gold: &[usize]) -> Result<(f64, Vec<f64>)> {
        let emissions = self.emissions(input);
        let g = crf_nll_gradient(&emissions, &self.transitions, gold)?;
        let stride = self.feature_dim() + 1;
        let mut grad = vec![0.0; self.weights.len()];
        for (t, d_emit) in g.emissions.iter().enumerate() {
            let f = self.token_features(input, t);
            for (y, dy) in d_emit.iter().enumerate() {
                if *dy == 0.0 {
                    continue;
                }
                let row = &mut grad[y * stride..(y + 1) * stride];
                for (r, x) in row[..stride - 1].iter_mut().zip(&f) {
                    *r += dy * x;
                }
                row[stride - 1] += dy;
            }
        }
        grad.extend(g.transitions);
        Ok((g.nll, grad))
    }

    pub fn decode(&self, input: &SentenceInput) -> Result<Vec<Tag>> {
        if input.is_empty() {
            return Ok(Vec::new());
        }
        let path = viterbi_decode(&self.emissions(input), &self.transitions)?;
        Ok(path.into_iter().map(|i| Tag::from_index(i).expect("label index")).collect())
    }
}

/// Gold tags for each sentence of a document. Spans crossing a sentence
/// boundary are clipped; outcome spans win over overlapping interventions.
pub fn gold_sentence_tags(doc: &AnnotatedDocument) -> Vec<Vec<Tag>> {
    let n = doc.document.num_tokens();
    let mut spans: Vec<(Span, EntityType)> = doc
        .mentions
        .iter()
        .filter(|m| m.etype == EntityType::Intervention)
        .map(|m| (m.span, m.etype))
        .collect();
    spans.extend(
        doc.mentions
            .iter()
            .filter(|m| m.etype == EntityType::Outcome)
            .map(|m| (m.span, m.etype)),
    );
    let tags = encode_spans(n, &spans);
    doc.document
        .sentences()
        .iter()
        .map(|s| {
            let mut t = tags[s.start..s.end].to_vec();
            if let Some(first) = t.first_mut() {
                if first.is_inside() {
                    *first = Tag::begin(first.entity_type().expect("inside tag has a type"));
                }
            }
            t
        })
        .collect()
}

/// Tags each sentence and returns the document's mentions in token order.
pub fn predict_mentions(model: &TaggerModel, backend: &dyn EncoderBackend, doc: &Document) -> Result<Vec<Mention>> {
    let mut out = Vec::new();
    for sentence in doc.sentences() {
        let input = SentenceInput::encode(backend, &doc.token_texts(*sentence))?;
        let tags = model.decode(&input)?;
        for (span, etype) in decode_spans(&tags) {
            out.push(Mention {
                mention_id: format!("m{}", out.len()),
                doc_id: doc.doc_id().to_string(),
                span: Span::new(span.start + sentence.start, span.end + sentence.start),
                etype,
            });
        }
    }
    Ok(out)
}

fn encode_corpus(backend: &dyn EncoderBackend, docs: &[AnnotatedDocument]) -> Result<Vec<(SentenceInput, Vec<usize>)>> {
    let mut out = Vec::new();
    for doc in docs {
        for (sentence, tags) in doc.document.sentences().iter().zip(gold_sentence_tags(doc)) {
            let input = SentenceInput::encode(backend, &doc.document.token_texts(*sentence))?;
            out.push((input, tags.iter().map(|t| t.index()).collect()));
        }
    }
    Ok(out)
}

pub fn dev_token_f1(model: &TaggerModel, backend: &dyn EncoderBackend, dev: &[AnnotatedDocument]) -> Result<f64> {
    let preds = dev
        .iter()
        .map(|d| predict_mentions(model, backend, &d.document))
        .collect::<Result<Vec<_>>>()?;
    Ok(token_prf(dev, &preds)?.overall.f1)
}

/// Trains with mini-batch Adam over sentences and keeps the parameters with
/// the best dev token F1 (train F1 when `dev` is empty).
pub fn train_tagger(
    backend: &dyn EncoderBackend,
    train: &[AnnotatedDocument],
    dev: &[AnnotatedDocument],
    config: &TaggerConfig,
) -> Result<TaggerModel> {
    if train.is_empty() {
        return Err(Error::input("tagger training set is empty"));
    }
    for etype in EntityType::ALL {
        if !train.iter().any(|d| d.mentions.iter().any(|m| m.etype == etype)) {
            log::warn!("tagger training data has no {etype} mentions");
        }
    }
    let tc = &config.train;
    if tc.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let data = encode_corpus(backend, train)?;
    let eval_docs = if dev.is_empty() { train } else { dev };

    let mut model = TaggerModel::new(backend.dim(), config.window);
    let mut params = model.parameters();
    let mut adam = Adam::new(params.len(), tc.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut order: Vec<usize> = (0..data.len()).filter(|&i| !data[i].0.is_empty()).collect();

    let mut best = model.clone();
    best.dev_token_f1 = dev_token_f1(&model, backend, eval_docs)?;
    let mut stale = 0;
    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(tc.batch_size) {
            let mut grad = vec![0.0; params.len()];
            for &i in batch {
                let (input, gold) = &data[i];
                let (nll, g) = model.nll_and_gradient(input, gold)?;
                total += nll;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.update(&mut params, &grad);
            model.set_parameters(&params);
        }
        let f1 = dev_token_f1(&model, backend, eval_docs)?;
        log::info!("tagger epoch {epoch}: nll {:.4} dev token F1 {f1:.4}", total / order.len().max(1) as f64);
        if f1 > best.dev_token_f1 {
            best = model.clone();
            best.dev_token_f1 = f1;
            stale = 0;
        } else {
            stale += 1;
            if stale >= tc.patience {
                break;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::HashedEncoder;

    #[test]
    fn window_features_pad_at_edges() {
        let enc = HashedEncoder::new(4, 0).unwrap();
        let model = TaggerModel::new(4, 1);
        let input = SentenceInput::encode(&enc, &["a", "b"]).unwrap();
        let f = model.token_features(&input, 0);
        assert_eq!(f.len(), model.feature_dim());
        assert_eq!(&f[..4], &[0.0; 4]);
        assert_eq!(&f[12..], &[1.0, 0.0]);
    }

    #[test]
    fn parameter_round_trip() {
        let mut model = TaggerModel::new(3, 1);
        let p: Vec<f64> = (0..model.parameters().len()).map(|i| i as f64).collect();
        model.set_parameters(&p);
        assert_eq!(model.parameters(), p);
    }

    #[test]
    fn clipped_gold_tags_start_with_begin() {
        let doc = crate::text::document_from_sentences("d", &["a b".into(), "c d".into()]).unwrap();
        let m = Mention {
            mention_id: "m".into(),
            doc_id: "d".into(),
            span: Span::new(1, 3),
            etype: EntityType::Outcome,
        };
        let ad = AnnotatedDocument::new(doc, vec![m], vec![], vec![], vec![]).unwrap();
        let tags = gold_sentence_tags(&ad);
        assert_eq!(tags, vec![vec![Tag::O, Tag::BOut], vec![Tag::BOut, Tag::O]]);
    }

    #[test]
    fn empty_training_set() {
        let enc = HashedEncoder::new(4, 0).unwrap();
        assert!(train_tagger(&enc, &[], &[], &TaggerConfig::default()).is_err());
    }
}
