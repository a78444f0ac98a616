//! Distant supervision: grouping mentions into entities by embedding
//! similarity, and deriving training samples for the downstream models.

pub mod distant;
pub mod sampling;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedDocument, Document, Entity, EntityType, Mention};
use crate::encoder::{cosine_similarity, encode_span, EncoderBackend, Embedding};
use crate::error::{Error, Result};
use crate::eval::b_cubed;

pub use distant::{build_training_corpus, load_prompts, training_samples, DistantConfig, DistantCorpus, Prompt, Sample};
pub use sampling::{sample_evidence_training, synthesize_linker_negatives};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupingConfig {
    /// Minimum cosine similarity for joining an existing entity.
    #[serde(default = "default_similarity_threshold")]
    pub similarity_threshold: f64,
}

fn default_similarity_threshold() -> f64 {
    0.75
}

impl Default for GroupingConfig {
    fn default() -> Self {
        GroupingConfig {
            similarity_threshold: default_similarity_threshold(),
        }
    }
}

impl GroupingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.similarity_threshold) {
            return Err(Error::Config(format!(
                "similarity_threshold {} outside [-1, 1]",
                self.similarity_threshold
            )));
        }
        Ok(())
    }
}

/// Where a mention went.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// Index into the seed list.
    Existing(usize),
    /// A fresh singleton entity that takes part in no relation.
    New,
}

/// Assigns each mention to the seed with the highest cosine similarity when
/// that similarity reaches `threshold`. Ties go to the earlier seed.
pub fn assign_mentions_to_entities(mentions: &[Embedding], seeds: &[Embedding], threshold: f64) -> Result<Vec<Assignment>> {
    mentions
        .iter()
        .map(|m| {
            let mut best: Option<(usize, f64)> = None;
            for (k, s) in seeds.iter().enumerate() {
                let sim = cosine_similarity(m, s)?;
                if best.is_none_or(|(_, b)| sim > b) {
                    best = Some((k, sim));
                }
            }
            Ok(match best {
                Some((k, sim)) if sim >= threshold => Assignment::Existing(k),
                _ => Assignment::New,
            })
        })
        .collect()
}

/// Groups mentions in order: each mention joins the most similar existing
/// group, compared through the group's first mention, or starts a new one.
/// Returns a group index per mention.
pub fn greedy_grouping(embeddings: &[Embedding], threshold: f64) -> Result<Vec<usize>> {
    let mut seeds: Vec<Embedding> = Vec::new();
    let mut out = Vec::with_capacity(embeddings.len());
    for e in embeddings {
        match assign_mentions_to_entities(std::slice::from_ref(e), &seeds, threshold)?[0] {
            Assignment::Existing(k) => out.push(k),
            Assignment::New => {
                out.push(seeds.len());
                seeds.push(e.clone());
            }
        }
    }
    Ok(out)
}

/// Groups predicted mentions of one document into entities, per type, in
/// document order. Entity ids are `e0, e1, ...`.
pub fn group_mentions(
    backend: &dyn EncoderBackend,
    doc: &Document,
    mentions: &[Mention],
    threshold: f64,
) -> Result<Vec<Entity>> {
    let mut order: Vec<&Mention> = mentions.iter().collect();
    order.sort_by_key(|m| (m.span.start, m.span.end, m.etype));
    let mut entities = Vec::new();
    for etype in EntityType::ALL {
        let typed: Vec<&Mention> = order.iter().copied().filter(|m| m.etype == etype).collect();
        let embeddings = typed
            .iter()
            .map(|m| encode_span(backend, doc, m.span))
            .collect::<Result<Vec<_>>>()?;
        let groups = greedy_grouping(&embeddings, threshold)?;
        let first = entities.len();
        for (m, g) in typed.iter().zip(groups) {
            if first + g == entities.len() {
                entities.push(Entity {
                    entity_id: String::new(),
                    doc_id: doc.doc_id().to_string(),
                    etype,
                    mentions: Vec::new(),
                    canonical_text: doc.span_text(m.span),
                });
            }
            entities[first + g].mentions.push(m.mention_id.clone());
        }
    }
    for (i, e) in entities.iter_mut().enumerate() {
        e.entity_id = format!("e{i}");
    }
    Ok(entities)
}

/// B³ F1 of the grouping induced on a gold document at `threshold`. Seeds
/// are the first mentions of the entities that take part in relations; every
/// gold mention of the same type is then assigned. `None` when the document
/// has no such entities.
pub fn induced_b_cubed(backend: &dyn EncoderBackend, doc: &AnnotatedDocument, threshold: f64) -> Result<Option<f64>> {
    let mut clusters_gold: Vec<Vec<&str>> = Vec::new();
    let mut clusters_pred: Vec<Vec<&str>> = Vec::new();
    let related: Vec<&Entity> = doc
        .entities
        .iter()
        .filter(|e| {
            doc.relations.iter().any(|r| {
                r.intervention == e.entity_id || r.outcome == e.entity_id || r.comparator.as_deref() == Some(&e.entity_id)
            })
        })
        .collect();
    if related.is_empty() {
        return Ok(None);
    }
    for etype in EntityType::ALL {
        let seeds: Vec<&Entity> = related.iter().copied().filter(|e| e.etype == etype).collect();
        let seed_vecs = seeds
            .iter()
            .map(|e| {
                let m = doc.mention(&e.mentions[0]).expect("validated");
                encode_span(backend, &doc.document, m.span)
            })
            .collect::<Result<Vec<_>>>()?;
        let typed: Vec<&Mention> = doc.mentions.iter().filter(|m| m.etype == etype).collect();
        let vecs = typed
            .iter()
            .map(|m| encode_span(backend, &doc.document, m.span))
            .collect::<Result<Vec<_>>>()?;
        let assignment = assign_mentions_to_entities(&vecs, &seed_vecs, threshold)?;
        let mut pred = vec![Vec::new(); seeds.len()];
        for (m, a) in typed.iter().zip(assignment) {
            match a {
                Assignment::Existing(k) => pred[k].push(m.mention_id.as_str()),
                Assignment::New => pred.push(vec![m.mention_id.as_str()]),
            }
        }
        clusters_pred.extend(pred);
        clusters_gold.extend(
            doc.entities
                .iter()
                .filter(|e| e.etype == etype)
                .map(|e| e.mentions.iter().map(String::as_str).collect()),
        );
    }
    Ok(Some(b_cubed(&clusters_gold, &clusters_pred).f1))
}

pub fn default_grid() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

/// Grid value with the highest mean induced B³ F1 over `dev`; ties go to
/// the smallest threshold.
pub fn tune_threshold(dev: &[AnnotatedDocument], backend: &dyn EncoderBackend, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::input("threshold grid is empty"));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    for &t in &sorted {
        let mut total = 0.0;
        let mut n = 0usize;
        for doc in dev {
            if let Some(f) = induced_b_cubed(backend, doc, t)? {
                total += f;
                n += 1;
            }
        }
        let score = if n == 0 { 0.0 } else { total / n as f64 };
        log::info!("threshold {t:.3}: mean B3 F1 {score:.4}");
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((t, score));
        }
    }
    Ok(best.expect("grid is non-empty").0)
}
