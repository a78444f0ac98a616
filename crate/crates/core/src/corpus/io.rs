//! JSON-Lines reading and writing.
//!
//! One document per line:
//!
//! ```text
//! {"doc_id", "text", "tokens": [[s,e],...], "sentences": [[ts,te],...],
//!  "mentions": [{"id","type","start","end"}], "entities": [{"id","type","mentions":[...]}],
//!  "evidence": [idx,...], "relations": [{"i","c","o","direction","evidence"}]}
//! ```
//!
//! Relations may carry an optional `"confidence"`; gold records omit it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{AnnotatedDocument, Direction, Document, Entity, EntityType, Mention, RelationTuple, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub etype: EntityType,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub etype: EntityType,
    pub mentions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationRecord {
    pub i: String,
    #[serde(default)]
    pub c: Option<String>,
    pub o: String,
    pub direction: Direction,
    pub evidence: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocRecord {
    pub doc_id: String,
    pub text: String,
    pub tokens: Vec<(usize, usize)>,
    pub sentences: Vec<(usize, usize)>,
    #[serde(default)]
    pub mentions: Vec<MentionRecord>,
    #[serde(default)]
    pub entities: Vec<EntityRecord>,
    #[serde(default)]
    pub evidence: Vec<usize>,
    #[serde(default)]
    pub relations: Vec<RelationRecord>,
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PredictionRecord {
    doc_id: String,
    i: String,
    c: Option<String>,
    o: String,
    direction: Direction,
    evidence: usize,
    confidence: f64,
}

impl DocRecord {
    pub fn into_document(self) -> Result<AnnotatedDocument> {
        let document = Document::new(&self.doc_id, self.text, &self.tokens, &self.sentences)?;
        let doc_id = self.doc_id;
        let mentions: Vec<Mention> = self
            .mentions
            .into_iter()
            .map(|m| Mention {
                mention_id: m.id,
                doc_id: doc_id.clone(),
                span: Span::new(m.start, m.end),
                etype: m.etype,
            })
            .collect();
        let n = document.num_tokens();
        let entities = self
            .entities
            .into_iter()
            .map(|e| {
                let canonical_text = e
                    .mentions
                    .first()
                    .and_then(|id| mentions.iter().find(|m| &m.mention_id == id))
                    .filter(|m| m.span.end <= n && m.span.start < m.span.end)
                    .map(|m| document.span_text(m.span))
                    .unwrap_or_default();
                Entity {
                    entity_id: e.id,
                    doc_id: doc_id.clone(),
                    etype: e.etype,
                    mentions: e.mentions,
                    canonical_text,
                }
            })
            .collect();
        let relations = self
            .relations
            .into_iter()
            .map(|r| RelationTuple {
                doc_id: doc_id.clone(),
                intervention: r.i,
                comparator: r.c,
                outcome: r.o,
                direction: r.direction,
                evidence_sentence: r.evidence,
                confidence: r.confidence.unwrap_or(1.0),
            })
            .collect();
        AnnotatedDocument::new(document, mentions, entities, self.evidence, relations)
    }

    pub fn from_document(doc: &AnnotatedDocument) -> DocRecord {
        let d = &doc.document;
        DocRecord {
            doc_id: d.doc_id().to_string(),
            text: d.text().to_string(),
            tokens: d.tokens().iter().map(|t| (t.char_start, t.char_end)).collect(),
            sentences: d.sentences().iter().map(|s| (s.start, s.end)).collect(),
            mentions: doc
                .mentions
                .iter()
                .map(|m| MentionRecord {
                    id: m.mention_id.clone(),
                    etype: m.etype,
                    start: m.span.start,
                    end: m.span.end,
                })
                .collect(),
            entities: doc
                .entities
                .iter()
                .map(|e| EntityRecord {
                    id: e.entity_id.clone(),
                    etype: e.etype,
                    mentions: e.mentions.clone(),
                })
                .collect(),
            evidence: doc.evidence_sentences.clone(),
            relations: doc
                .relations
                .iter()
                .map(|r| RelationRecord {
                    i: r.intervention.clone(),
                    c: r.comparator.clone(),
                    o: r.outcome.clone(),
                    direction: r.direction,
                    evidence: r.evidence_sentence,
                    confidence: (r.confidence != 1.0).then_some(r.confidence),
                })
                .collect(),
        }
    }
}

/// Reads a JSON-Lines file into records, reporting the 1-based line of the
/// first malformed record. Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Parses JSON-Lines text already in memory.
pub fn parse_corpus(text: &str) -> Result<Vec<AnnotatedDocument>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: DocRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record.into_document()?);
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<AnnotatedDocument>> {
    read_jsonl::<DocRecord>(path)?
        .into_iter()
        .map(DocRecord::into_document)
        .collect()
}

pub fn write_corpus(docs: &[AnnotatedDocument], path: &Path) -> Result<()> {
    write_jsonl(path, docs.iter().map(DocRecord::from_document))
}

/// Writes one relation per line, in the given order.
pub fn write_predictions(relations: &[RelationTuple], path: &Path) -> Result<()> {
    write_jsonl(
        path,
        relations.iter().map(|r| PredictionRecord {
            doc_id: r.doc_id.clone(),
            i: r.intervention.clone(),
            c: r.comparator.clone(),
            o: r.outcome.clone(),
            direction: r.direction,
            evidence: r.evidence_sentence,
            confidence: r.confidence,
        }),
    )
}

pub fn load_predictions(path: &Path) -> Result<Vec<RelationTuple>> {
    Ok(read_jsonl::<PredictionRecord>(path)?
        .into_iter()
        .map(|r| RelationTuple {
            doc_id: r.doc_id,
            intervention: r.i,
            comparator: r.c,
            outcome: r.o,
            direction: r.direction,
            evidence_sentence: r.evidence,
            confidence: r.confidence,
        })
        .collect())
}
