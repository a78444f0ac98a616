//! Links each evidence sentence to a primary intervention, an optional
//! comparator and the outcomes mentioned inside it.

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Entity, EntityType, Mention};
use crate::encoder::EncoderBackend;
use crate::error::{Error, Result};
use crate::features::{pair_feature_dim, pair_features};
use crate::nn::{argmax, fit_head, Activation, LinearHead, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkLabel {
    Primary,
    Comparator,
    Unrelated,
}

impl LinkLabel {
    pub const ALL: [LinkLabel; 3] = [LinkLabel::Primary, LinkLabel::Comparator, LinkLabel::Unrelated];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A candidate span and the evidence sentence it is scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub candidate: Vec<String>,
    pub sentence: Vec<String>,
    pub label: LinkLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkerModel {
    pub head: LinearHead,
    pub dev_accuracy: f64,
}

fn words(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

impl LinkerModel {
    pub fn new(dim: usize) -> LinkerModel {
        LinkerModel {
            head: LinearHead::new(Activation::Softmax, 3, pair_feature_dim(dim)),
            dev_accuracy: 0.0,
        }
    }
}

/// Class distributions `[primary, comparator, unrelated]` for each candidate.
pub fn score_candidates(
    model: &LinkerModel,
    backend: &dyn EncoderBackend,
    sentence: &[&str],
    candidates: &[Vec<&str>],
) -> Result<Vec<[f64; 3]>> {
    if candidates.is_empty() {
        return Err(Error::input("no candidate interventions to score"));
    }
    candidates
        .iter()
        .map(|c| {
            let p = model.head.probabilities(&pair_features(backend, c, sentence)?);
            Ok([p[0], p[1], p[2]])
        })
        .collect()
}

/// Picks the primary candidate (highest primary probability) and the
/// comparator (highest comparator probability among candidates of other
/// entities, kept only when it beats that candidate's unrelated
/// probability). Candidates must be in document order; ties go to the
/// earliest.
pub fn select_roles(probs: &[[f64; 3]], entity_ids: &[&str]) -> (usize, Option<usize>) {
    let primary = argmax(&probs.iter().map(|p| p[0]).collect::<Vec<_>>());
    let mut comparator: Option<usize> = None;
    for (k, p) in probs.iter().enumerate() {
        if entity_ids[k] == entity_ids[primary] {
            continue;
        }
        if comparator.is_none_or(|best| p[1] > probs[best][1]) {
            comparator = Some(k);
        }
    }
    (primary, comparator.filter(|&k| probs[k][1] > probs[k][2]))
}

/// Entities attached to one evidence sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub evidence: usize,
    pub intervention: String,
    pub comparator: Option<String>,
    pub outcomes: Vec<String>,
    pub primary_prob: f64,
    pub comparator_prob: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LinkOutput {
    pub links: Vec<Link>,
    /// Evidence sentences dropped because the document has no intervention
    /// mentions.
    pub skipped_no_interventions: usize,
}

/// Links every evidence sentence of `doc`. Candidates are all intervention
/// mentions in the document that belong to an entity; ties go to the
/// earliest mention.
pub fn link_evidence(
    model: &LinkerModel,
    backend: &dyn EncoderBackend,
    doc: &Document,
    evidence: &[usize],
    mentions: &[Mention],
    entities: &[Entity],
) -> Result<LinkOutput> {
    let entity_of = |mid: &str| entities.iter().find(|e| e.mentions.iter().any(|m| m == mid));
    let mut candidates: Vec<(&Mention, &Entity)> = mentions
        .iter()
        .filter(|m| m.etype == EntityType::Intervention)
        .filter_map(|m| entity_of(&m.mention_id).map(|e| (m, e)))
        .collect();
    candidates.sort_by_key(|(m, _)| (m.span.start, m.span.end));
    let outcome_mentions: Vec<(&Mention, &Entity)> = mentions
        .iter()
        .filter(|m| m.etype == EntityType::Outcome)
        .filter_map(|m| entity_of(&m.mention_id).map(|e| (m, e)))
        .collect();

    let mut out = LinkOutput::default();
    for &ev in evidence {
        let sentence = doc
            .sentence(ev)
            .ok_or_else(|| Error::input(format!("evidence sentence {ev} out of range")))?;
        let mut outcomes: Vec<(usize, &str)> = outcome_mentions
            .iter()
            .filter(|(m, _)| sentence.contains(&m.span))
            .map(|(m, e)| (m.span.start, e.entity_id.as_str()))
            .collect();
        if outcomes.is_empty() {
            continue;
        }
        if candidates.is_empty() {
            out.skipped_no_interventions += 1;
            continue;
        }
        outcomes.sort();
        let mut outcome_ids: Vec<String> = Vec::new();
        for (_, id) in outcomes {
            if !outcome_ids.iter().any(|o| o == id) {
                outcome_ids.push(id.to_string());
            }
        }

        let cand_words: Vec<Vec<&str>> = candidates.iter().map(|(m, _)| doc.token_texts(m.span)).collect();
        let probs = score_candidates(model, backend, &doc.token_texts(sentence), &cand_words)?;
        let entity_ids: Vec<&str> = candidates.iter().map(|(_, e)| e.entity_id.as_str()).collect();
        let (primary_idx, comparator) = select_roles(&probs, &entity_ids);
        out.links.push(Link {
            evidence: ev,
            intervention: entity_ids[primary_idx].to_string(),
            comparator: comparator.map(|k| entity_ids[k].to_string()),
            outcomes: outcome_ids,
            primary_prob: probs[primary_idx][0],
            comparator_prob: comparator.map(|k| probs[k][1]),
        });
    }
    Ok(out)
}

pub fn train_linker(
    backend: &dyn EncoderBackend,
    train: &[LinkSample],
    dev: &[LinkSample],
    config: &TrainConfig,
) -> Result<LinkerModel> {
    if train.is_empty() {
        return Err(Error::input("linker training set is empty"));
    }
    for label in [LinkLabel::Primary, LinkLabel::Unrelated] {
        if !train.iter().any(|s| s.label == label) {
            return Err(Error::input(format!("linker training data has no {label:?} samples")));
        }
    }
    let featurize = |samples: &[LinkSample]| -> Result<Vec<(Vec<f64>, usize)>> {
        samples
            .iter()
            .map(|s| Ok((pair_features(backend, &words(&s.candidate), &words(&s.sentence))?, s.label.index())))
            .collect()
    };
    let model = LinkerModel::new(backend.dim());
    let (head, dev_accuracy) = fit_head(model.head, &featurize(train)?, &featurize(dev)?, config, crate::nn::accuracy)?;
    Ok(LinkerModel { head, dev_accuracy })
}
