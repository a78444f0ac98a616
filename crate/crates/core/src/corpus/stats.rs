use serde::Serialize;

use super::AnnotatedDocument;
use crate::error::{Error, Result};

/// Corpus totals and per-abstract averages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub num_abstracts: usize,
    pub num_relations: usize,
    pub num_entities: usize,
    pub num_mentions: usize,
    pub avg_relations: f64,
    pub avg_entities: f64,
    pub avg_mentions: f64,
}

pub fn corpus_stats(corpus: &[AnnotatedDocument]) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::input("corpus statistics need at least one document"));
    }
    let n = corpus.len();
    let num_relations = corpus.iter().map(|d| d.relations.len()).sum();
    let num_entities = corpus.iter().map(|d| d.entities.len()).sum();
    let num_mentions = corpus.iter().map(|d| d.mentions.len()).sum();
    Ok(CorpusStats {
        num_abstracts: n,
        num_relations,
        num_entities,
        num_mentions,
        avg_relations: num_relations as f64 / n as f64,
        avg_entities: num_entities as f64 / n as f64,
        avg_mentions: num_mentions as f64 / n as f64,
    })
}
