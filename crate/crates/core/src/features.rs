//! Fixed-width feature vectors built from encoder outputs.
//!
//! Sentence pairs are encoded jointly: the candidate text is located inside
//! the sentence and the tokens around that occurrence form a local context
//! vector next to the pooled representations of both sides.

use crate::encoder::{EncoderBackend, Embedding};
use crate::error::{Error, Result};

const CONTEXT_RADIUS: usize = 3;

fn pool_mean(vectors: &[Embedding], dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    if vectors.is_empty() {
        return acc;
    }
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v.as_slice()) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

fn pool_max(vectors: &[Embedding], dim: usize) -> Vec<f64> {
    if vectors.is_empty() {
        return vec![0.0; dim];
    }
    let mut acc = vec![f64::NEG_INFINITY; dim];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v.as_slice()) {
            *a = a.max(*x);
        }
    }
    acc
}

fn lower(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_lowercase()).collect()
}

/// First occurrence of `needle` as a contiguous token run in `haystack`,
/// compared case-insensitively.
pub fn find_subsequence(haystack: &[&str], needle: &[&str]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    let h = lower(haystack);
    let n = lower(needle);
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()] == n[..])
}

/// Where a candidate sits in a sentence: an exact run if there is one,
/// otherwise the longest run of shared tokens.
fn locate(sentence: &[&str], candidate: &[&str]) -> Option<(usize, usize)> {
    if let Some(i) = find_subsequence(sentence, candidate) {
        return Some((i, i + candidate.len()));
    }
    let cand: Vec<String> = lower(candidate)
        .into_iter()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .collect();
    let sent = lower(sentence);
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < sent.len() {
        if cand.contains(&sent[i]) {
            let mut j = i;
            while j < sent.len() && cand.contains(&sent[j]) {
                j += 1;
            }
            if best.is_none_or(|(s, e)| j - i > e - s) {
                best = Some((i, j));
            }
            i = j;
        } else {
            i += 1;
        }
    }
    best
}

fn context_window(vectors: &[Embedding], at: Option<(usize, usize)>, dim: usize) -> Vec<f64> {
    match at {
        Some((s, e)) => {
            let lo = s.saturating_sub(CONTEXT_RADIUS);
            let hi = (e + CONTEXT_RADIUS).min(vectors.len());
            let around: Vec<Embedding> = vectors[lo..s].iter().chain(&vectors[e..hi]).cloned().collect();
            pool_mean(&around, dim)
        }
        None => vec![0.0; dim],
    }
}

fn encode_nonempty(backend: &dyn EncoderBackend, words: &[&str], what: &str) -> Result<Vec<Embedding>> {
    if words.is_empty() {
        return Err(Error::input(format!("{what} is empty")));
    }
    backend.encode_words(words)
}

/// Sentence representation: mean and max pooled token vectors plus an
/// inverse-length term. Width `2 * dim + 1`.
pub fn sentence_features(backend: &dyn EncoderBackend, words: &[&str]) -> Result<Vec<f64>> {
    let dim = backend.dim();
    let vs = encode_nonempty(backend, words, "sentence")?;
    let mut f = pool_mean(&vs, dim);
    f.extend(pool_max(&vs, dim));
    f.push(1.0 / (words.len() as f64).sqrt());
    Ok(f)
}

pub fn sentence_feature_dim(dim: usize) -> usize {
    2 * dim + 1
}

/// Joint encoding of a candidate span and a sentence. Width `4 * dim + 4`.
pub fn pair_features(backend: &dyn EncoderBackend, candidate: &[&str], sentence: &[&str]) -> Result<Vec<f64>> {
    let dim = backend.dim();
    let cv = encode_nonempty(backend, candidate, "candidate")?;
    let sv = encode_nonempty(backend, sentence, "sentence")?;
    let c = pool_mean(&cv, dim);
    let s = pool_mean(&sv, dim);
    let at = locate(sentence, candidate);
    let exact = find_subsequence(sentence, candidate).is_some();
    let sent_lower = lower(sentence);
    let shared = lower(candidate).iter().filter(|w| sent_lower.contains(w)).count() as f64 / candidate.len() as f64;

    let mut f = Vec::with_capacity(4 * dim + 4);
    f.extend(&c);
    f.extend(&s);
    f.extend(c.iter().zip(&s).map(|(a, b)| a * b));
    f.extend(context_window(&sv, at, dim));
    f.push(if exact { 1.0 } else { 0.0 });
    f.push(at.map_or(0.0, |(p, _)| 1.0 - p as f64 / sentence.len() as f64));
    f.push(shared);
    f.push(1.0 / candidate.len() as f64);
    Ok(f)
}

pub fn pair_feature_dim(dim: usize) -> usize {
    4 * dim + 4
}

/// Encoding of an assembled `(intervention, outcome, evidence)` candidate.
/// Width `5 * dim + 1`; the intervention slot is zero when omitted.
pub fn candidate_features(
    backend: &dyn EncoderBackend,
    intervention: Option<&[&str]>,
    outcome: &[&str],
    evidence: &[&str],
) -> Result<Vec<f64>> {
    let dim = backend.dim();
    let iv = match intervention {
        Some(words) if !words.is_empty() => pool_mean(&backend.encode_words(words)?, dim),
        _ => vec![0.0; dim],
    };
    let ov = encode_nonempty(backend, outcome, "outcome")?;
    let ev = encode_nonempty(backend, evidence, "evidence sentence")?;
    let o = pool_mean(&ov, dim);
    let e = pool_mean(&ev, dim);
    let at = locate(evidence, outcome);
    let ctx = context_window(&ev, at, dim);

    let mut f = Vec::with_capacity(5 * dim + 1);
    f.extend(&iv);
    f.extend(&o);
    f.extend(&e);
    f.extend(&ctx);
    f.extend(ctx.iter().zip(&o).map(|(a, b)| a * b));
    f.push(if at.is_some() { 1.0 } else { 0.0 });
    Ok(f)
}

pub fn candidate_feature_dim(dim: usize) -> usize {
    5 * dim + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::HashedEncoder;

    #[test]
    fn subsequence_search() {
        let s = ["The", "aspirin", "group", "improved"];
        assert_eq!(find_subsequence(&s, &["Aspirin", "group"]), Some(1));
        assert_eq!(find_subsequence(&s, &["placebo"]), None);
        assert_eq!(find_subsequence(&s, &[]), None);
        assert_eq!(locate(&s, &["aspirin", "100", "mg"]), Some((1, 2)));
    }

    #[test]
    fn widths_match_declared_dims() {
        let enc = HashedEncoder::new(16, 0).unwrap();
        let sent = ["Aspirin", "reduced", "pain", "."];
        assert_eq!(sentence_features(&enc, &sent).unwrap().len(), sentence_feature_dim(16));
        assert_eq!(pair_features(&enc, &["aspirin"], &sent).unwrap().len(), pair_feature_dim(16));
        assert_eq!(
            candidate_features(&enc, Some(&["aspirin"]), &["pain"], &sent).unwrap().len(),
            candidate_feature_dim(16)
        );
        assert_eq!(
            candidate_features(&enc, None, &["pain"], &sent).unwrap().len(),
            candidate_feature_dim(16)
        );
        assert!(sentence_features(&enc, &[]).is_err());
        assert!(candidate_features(&enc, None, &["pain"], &[]).is_err());
    }
}
