//! Text encoders producing token and span vectors.
//!
//! Two backends ship: [`HashedEncoder`], a deterministic character n-gram
//! featurizer used for tests and desk-scale training, and
//! [`StaticEncoder`], which serves vectors exported from a pretrained model
//! as a word-vector text file.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Span};
use crate::error::{Error, Result};

/// A finite-valued vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Embedding> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("embedding has non-finite entries"));
        }
        Ok(Embedding(values))
    }

    pub fn zeros(dim: usize) -> Embedding {
        Embedding(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Embedding {
        Embedding(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub trait EncoderBackend: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Longest token sequence a single call accepts.
    fn max_tokens(&self) -> usize {
        usize::MAX
    }

    /// Whether the backend exposes parameters that heads could fine-tune.
    fn has_trainable_parameters(&self) -> bool {
        false
    }

    /// Encodes one sentence worth of token surfaces.
    fn encode_words(&self, words: &[&str]) -> Result<Vec<Embedding>>;
}

/// Encodes the tokens of `doc`, sentence by sentence. With `sentences`
/// given, only that range of sentences is encoded.
pub fn encode_tokens(
    backend: &dyn EncoderBackend,
    doc: &Document,
    sentences: Option<Range<usize>>,
) -> Result<Vec<Embedding>> {
    let range = sentences.unwrap_or(0..doc.num_sentences());
    if range.end > doc.num_sentences() {
        return Err(Error::input(format!(
            "sentence range {range:?} exceeds {} sentences",
            doc.num_sentences()
        )));
    }
    let mut out = Vec::new();
    for s in range {
        let span = doc.sentences()[s];
        if span.len() > backend.max_tokens() {
            return Err(Error::input(format!(
                "sentence {s} of {} has {} tokens; {} accepts at most {}",
                doc.doc_id(),
                span.len(),
                backend.name(),
                backend.max_tokens()
            )));
        }
        out.extend(backend.encode_words(&doc.token_texts(span))?);
    }
    Ok(out)
}

/// Mean of the token embeddings in `span`.
pub fn encode_span(backend: &dyn EncoderBackend, doc: &Document, span: Span) -> Result<Embedding> {
    if span.is_empty() {
        return Err(Error::input("cannot encode an empty span"));
    }
    if span.end > doc.num_tokens() {
        return Err(Error::input(format!(
            "span ({}, {}) exceeds {} tokens",
            span.start,
            span.end,
            doc.num_tokens()
        )));
    }
    let first = doc.sentence_of(span.start).unwrap_or(0);
    let last = doc.sentence_of(span.end - 1).unwrap_or(first);
    let offset = doc.sentences()[first].start;
    let vectors = encode_tokens(backend, doc, Some(first..last + 1))?;
    let vs: Vec<&Embedding> = vectors[span.start - offset..span.end - offset].iter().collect();
    mean(&vs, backend.dim())
}

/// Mean embedding of a free-standing text, split on whitespace.
pub fn encode_text(backend: &dyn EncoderBackend, text: &str) -> Result<Embedding> {
    let words = crate::text::tokenize_words(text);
    if words.is_empty() {
        return Err(Error::input("cannot encode empty text"));
    }
    let vectors = backend.encode_words(&words)?;
    mean(&vectors.iter().collect::<Vec<_>>(), backend.dim())
}

pub fn mean(vectors: &[&Embedding], dim: usize) -> Result<Embedding> {
    if vectors.is_empty() {
        return Err(Error::input("mean of zero vectors"));
    }
    let mut acc = vec![0.0; dim];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v.as_slice()) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Embedding::new(acc)
}

pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::input(format!(
            "cosine of vectors with widths {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::input("cosine similarity of a zero vector"));
    }
    let dot: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub(crate) fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Deterministic featurizer: the lowercased word, its character trigrams and
/// a few shape features are hashed into `dim` signed buckets and the result is
/// unit-normalized. Output for a token depends only on its surface and
/// whether it opens the sentence.
#[derive(Debug, Clone)]
pub struct HashedEncoder {
    dim: usize,
    seed: u64,
}

impl HashedEncoder {
    pub fn new(dim: usize, seed: u64) -> Result<HashedEncoder> {
        if dim == 0 {
            return Err(Error::Config("encoder.dim must be positive".into()));
        }
        Ok(HashedEncoder { dim, seed })
    }

    fn add(&self, acc: &mut [f64], feature: &str, weight: f64) {
        let h = fnv1a(self.seed, feature.as_bytes());
        let bucket = (h % self.dim as u64) as usize;
        let sign = if (h >> 63) & 1 == 1 { -1.0 } else { 1.0 };
        acc[bucket] += sign * weight;
    }

    pub fn encode_word(&self, word: &str, sentence_initial: bool) -> Embedding {
        let mut acc = vec![0.0; self.dim];
        let lower = word.to_lowercase();
        self.add(&mut acc, &format!("w:{lower}"), 2.0);
        let padded: Vec<char> = format!("<{lower}>").chars().collect();
        for gram in padded.windows(3) {
            let g: String = gram.iter().collect();
            self.add(&mut acc, &format!("g:{g}"), 1.0);
        }
        let first = word.chars().next();
        if first.is_some_and(char::is_uppercase) {
            self.add(&mut acc, "s:cap", 1.0);
        }
        if word.chars().any(|c| c.is_ascii_digit()) {
            self.add(&mut acc, "s:digit", 1.0);
        }
        if word.chars().all(|c| !c.is_alphanumeric()) {
            self.add(&mut acc, "s:punct", 1.0);
        }
        if sentence_initial {
            self.add(&mut acc, "s:initial", 1.0);
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            acc.iter_mut().for_each(|v| *v /= norm);
        } else {
            // all features cancelled; fall back to a fixed bucket
            acc[(fnv1a(self.seed, lower.as_bytes()) % self.dim as u64) as usize] = 1.0;
        }
        Embedding(acc)
    }
}

impl EncoderBackend for HashedEncoder {
    fn name(&self) -> &str {
        "hashed"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_words(&self, words: &[&str]) -> Result<Vec<Embedding>> {
        Ok(words
            .iter()
            .enumerate()
            .map(|(i, w)| self.encode_word(w, i == 0))
            .collect())
    }
}

/// Word vectors exported from a pretrained encoder, one `word v1 v2 ...` per
/// line. Lookup is case-insensitive; unknown words fall back to hashed
/// features of the same width.
pub struct StaticEncoder {
    dim: usize,
    vectors: HashMap<String, Embedding>,
    fallback: HashedEncoder,
}

impl StaticEncoder {
    pub fn load(path: &Path, seed: u64) -> Result<StaticEncoder> {
        let reader = BufReader::new(File::open(path)?);
        let mut vectors = HashMap::new();
        let mut dim = 0usize;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let values = parts
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            // word2vec header line ("count dim")
            if values.is_empty() || (i == 0 && values.len() == 1 && word.parse::<usize>().is_ok()) {
                continue;
            }
            if dim == 0 {
                dim = values.len();
            } else if values.len() != dim {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {dim} values, found {}", values.len()),
                });
            }
            let v = Embedding::new(values).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            vectors.insert(word.to_lowercase(), v);
        }
        if dim == 0 {
            return Err(Error::Config(format!("no vectors in {}", path.display())));
        }
        Ok(StaticEncoder {
            dim,
            vectors,
            fallback: HashedEncoder::new(dim, seed)?,
        })
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vectors.len()
    }
}

impl EncoderBackend for StaticEncoder {
    fn name(&self) -> &str {
        "pretrained"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_words(&self, words: &[&str]) -> Result<Vec<Embedding>> {
        Ok(words
            .iter()
            .enumerate()
            .map(|(i, w)| match self.vectors.get(&w.to_lowercase()) {
                Some(v) if v.norm() > 0.0 => v.clone(),
                _ => self.fallback.encode_word(w, i == 0),
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    #[serde(default = "default_encoder_name")]
    pub name: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    /// Vector file for the `pretrained` backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub fine_tune: bool,
}

fn default_encoder_name() -> String {
    "hashed".into()
}

fn default_dim() -> usize {
    64
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            name: default_encoder_name(),
            dim: default_dim(),
            seed: 0,
            path: None,
            fine_tune: false,
        }
    }
}

pub fn build_encoder(config: &EncoderConfig) -> Result<Arc<dyn EncoderBackend>> {
    let backend: Arc<dyn EncoderBackend> = match config.name.as_str() {
        "hashed" => Arc::new(HashedEncoder::new(config.dim, config.seed)?),
        "pretrained" => {
            let path = config
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("encoder.path is required for the pretrained backend".into()))?;
            let enc = StaticEncoder::load(path, config.seed)?;
            if enc.dim() != config.dim {
                return Err(Error::Config(format!(
                    "encoder.dim is {} but {} holds {}-wide vectors",
                    config.dim,
                    path.display(),
                    enc.dim()
                )));
            }
            Arc::new(enc)
        }
        other => return Err(Error::Config(format!("unknown encoder backend `{other}`"))),
    };
    if config.fine_tune && !backend.has_trainable_parameters() {
        return Err(Error::Config(format!(
            "encoder.fine_tune is set but the {} backend has no trainable parameters",
            backend.name()
        )));
    }
    Ok(backend)
}
