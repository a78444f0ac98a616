//! Documents, annotations and extraction outputs.
//!
//! Every type here is constructed through a validating path: a value that
//! exists satisfies its invariants. Loading and writing live in [`io`],
//! aggregate counts in [`stats`].

mod io;
mod stats;

pub use io::{
    load_corpus, load_predictions, parse_corpus, read_jsonl, write_corpus, write_jsonl, write_predictions,
    DocRecord, EntityRecord, MentionRecord, RelationRecord,
};
pub use stats::{corpus_stats, CorpusStats};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open token interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityType {
    Intervention,
    Outcome,
}

impl EntityType {
    pub const ALL: [EntityType; 2] = [EntityType::Intervention, EntityType::Outcome];

    pub fn as_str(&self) -> &'static str {
        match self {
            EntityType::Intervention => "intervention",
            EntityType::Outcome => "outcome",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reported comparative effect of the intervention relative to the comparator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "increased")]
    Increased,
    #[serde(rename = "decreased")]
    Decreased,
    #[serde(rename = "no_diff")]
    NoDifference,
}

impl Direction {
    pub const ALL: [Direction; 3] = [
        Direction::Increased,
        Direction::Decreased,
        Direction::NoDifference,
    ];

    pub fn index(&self) -> usize {
        match self {
            Direction::Increased => 0,
            Direction::Decreased => 1,
            Direction::NoDifference => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Direction> {
        Direction::ALL.get(index).copied()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Increased => "increased",
            Direction::Decreased => "decreased",
            Direction::NoDifference => "no_diff",
        }
    }

    pub fn parse(s: &str) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.as_str() == s)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Character (not byte) offsets into the document text.
    pub char_start: usize,
    pub char_end: usize,
}

/// A tokenized abstract with stored sentence boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    doc_id: String,
    text: String,
    tokens: Vec<Token>,
    sentences: Vec<Span>,
}

impl Document {
    /// Builds a document from character offsets and sentence token ranges,
    /// checking that offsets are ordered, in bounds, and that sentences tile
    /// the token sequence.
    pub fn new(
        doc_id: impl Into<String>,
        text: impl Into<String>,
        offsets: &[(usize, usize)],
        sentences: &[(usize, usize)],
    ) -> Result<Document> {
        let doc_id = doc_id.into();
        let text = text.into();
        let byte_at: Vec<usize> = text
            .char_indices()
            .map(|(b, _)| b)
            .chain(std::iter::once(text.len()))
            .collect();
        let num_chars = byte_at.len() - 1;

        let mut tokens = Vec::with_capacity(offsets.len());
        let mut prev_end = 0usize;
        for (i, &(s, e)) in offsets.iter().enumerate() {
            if s >= e {
                return Err(Error::validation(
                    &doc_id,
                    format!("token {i} has empty or inverted offsets ({s}, {e})"),
                ));
            }
            if e > num_chars {
                return Err(Error::validation(
                    &doc_id,
                    format!("token {i} ends at {e}, past text length {num_chars}"),
                ));
            }
            if i > 0 && s < prev_end {
                return Err(Error::validation(
                    &doc_id,
                    format!("token {i} overlaps or precedes the previous token"),
                ));
            }
            prev_end = e;
            tokens.push(Token {
                text: text[byte_at[s]..byte_at[e]].to_string(),
                char_start: s,
                char_end: e,
            });
        }

        let mut expected = 0usize;
        let mut spans = Vec::with_capacity(sentences.len());
        for (i, &(s, e)) in sentences.iter().enumerate() {
            if s != expected || e <= s {
                return Err(Error::validation(
                    &doc_id,
                    format!("sentence {i} ({s}, {e}) does not continue the partition at token {expected}"),
                ));
            }
            expected = e;
            spans.push(Span::new(s, e));
        }
        if expected != tokens.len() {
            return Err(Error::validation(
                &doc_id,
                format!(
                    "sentences cover {expected} tokens but the document has {}",
                    tokens.len()
                ),
            ));
        }

        Ok(Document {
            doc_id,
            text,
            tokens,
            sentences: spans,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn sentences(&self) -> &[Span] {
        &self.sentences
    }

    pub fn num_sentences(&self) -> usize {
        self.sentences.len()
    }

    pub fn sentence(&self, index: usize) -> Option<Span> {
        self.sentences.get(index).copied()
    }

    /// Index of the sentence containing `token`.
    pub fn sentence_of(&self, token: usize) -> Option<usize> {
        self.sentences
            .iter()
            .position(|s| s.start <= token && token < s.end)
    }

    pub fn token_texts(&self, span: Span) -> Vec<&str> {
        self.tokens[span.start..span.end]
            .iter()
            .map(|t| t.text.as_str())
            .collect()
    }

    /// Text covered by a token span, taken from the original string.
    pub fn span_text(&self, span: Span) -> String {
        if span.is_empty() || span.end > self.tokens.len() {
            return String::new();
        }
        let s = self.tokens[span.start].char_start;
        let e = self.tokens[span.end - 1].char_end;
        self.text.chars().skip(s).take(e - s).collect()
    }

    pub fn sentence_text(&self, index: usize) -> String {
        self.sentence(index)
            .map(|s| self.span_text(s))
            .unwrap_or_default()
    }

    /// Sentences whose character extent intersects `[char_start, char_end)`.
    pub fn sentences_overlapping_chars(&self, char_start: usize, char_end: usize) -> Vec<usize> {
        self.sentences
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                let cs = self.tokens[s.start].char_start;
                let ce = self.tokens[s.end - 1].char_end;
                cs < char_end && char_start < ce
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn num_chars(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub mention_id: String,
    pub doc_id: String,
    pub span: Span,
    pub etype: EntityType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub entity_id: String,
    pub doc_id: String,
    pub etype: EntityType,
    pub mentions: Vec<String>,
    pub canonical_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceSentence {
    pub sentence_index: usize,
    pub score: f64,
}

/// The extracted finding: `(intervention, comparator, outcome, direction)`.
/// A missing comparator is the binary relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationTuple {
    pub doc_id: String,
    pub intervention: String,
    pub comparator: Option<String>,
    pub outcome: String,
    pub direction: Direction,
    pub evidence_sentence: usize,
    pub confidence: f64,
}

impl RelationTuple {
    /// Same relation with the comparator dropped.
    pub fn to_binary(&self) -> RelationTuple {
        RelationTuple {
            comparator: None,
            ..self.clone()
        }
    }
}

/// A document with its full annotation layer, validated as a unit.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDocument {
    pub document: Document,
    pub mentions: Vec<Mention>,
    pub entities: Vec<Entity>,
    pub evidence_sentences: Vec<usize>,
    pub relations: Vec<RelationTuple>,
}

impl AnnotatedDocument {
    pub fn new(
        document: Document,
        mentions: Vec<Mention>,
        entities: Vec<Entity>,
        evidence_sentences: Vec<usize>,
        relations: Vec<RelationTuple>,
    ) -> Result<AnnotatedDocument> {
        let doc = AnnotatedDocument {
            document,
            mentions,
            entities,
            evidence_sentences,
            relations,
        };
        doc.validate()?;
        Ok(doc)
    }

    /// A document with no annotations.
    pub fn unannotated(document: Document) -> AnnotatedDocument {
        AnnotatedDocument {
            document,
            mentions: Vec::new(),
            entities: Vec::new(),
            evidence_sentences: Vec::new(),
            relations: Vec::new(),
        }
    }

    pub fn doc_id(&self) -> &str {
        self.document.doc_id()
    }

    pub fn mention(&self, id: &str) -> Option<&Mention> {
        self.mentions.iter().find(|m| m.mention_id == id)
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.entity_id == id)
    }

    /// Spans of every mention of an entity, in list order.
    pub fn entity_spans(&self, entity_id: &str) -> Vec<Span> {
        self.entity(entity_id)
            .map(|e| {
                e.mentions
                    .iter()
                    .filter_map(|m| self.mention(m).map(|m| m.span))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Map from mention id to the id of the entity that contains it.
    pub fn mention_to_entity(&self) -> HashMap<&str, &str> {
        self.entities
            .iter()
            .flat_map(|e| {
                e.mentions
                    .iter()
                    .map(move |m| (m.as_str(), e.entity_id.as_str()))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let doc_id = self.document.doc_id();
        let n = self.document.num_tokens();
        let fail = |msg: String| Err(Error::validation(doc_id, msg));

        let mut mentions: HashMap<&str, &Mention> = HashMap::new();
        for m in &self.mentions {
            if m.doc_id != doc_id {
                return fail(format!("mention {} belongs to document {}", m.mention_id, m.doc_id));
            }
            if m.span.start >= m.span.end || m.span.end > n {
                return fail(format!(
                    "mention {} span ({}, {}) is outside 0 <= start < end <= {n}",
                    m.mention_id, m.span.start, m.span.end
                ));
            }
            if mentions.insert(&m.mention_id, m).is_some() {
                return fail(format!("duplicate mention id {}", m.mention_id));
            }
        }
        for etype in EntityType::ALL {
            let mut spans: Vec<(&Span, &str)> = self
                .mentions
                .iter()
                .filter(|m| m.etype == etype)
                .map(|m| (&m.span, m.mention_id.as_str()))
                .collect();
            spans.sort();
            for pair in spans.windows(2) {
                if pair[0].0.overlaps(pair[1].0) {
                    return fail(format!(
                        "overlapping {etype} mentions {} and {}",
                        pair[0].1, pair[1].1
                    ));
                }
            }
        }

        let mut seen_mentions: BTreeSet<&str> = BTreeSet::new();
        let mut entities: HashMap<&str, &Entity> = HashMap::new();
        for e in &self.entities {
            if e.doc_id != doc_id {
                return fail(format!("entity {} belongs to document {}", e.entity_id, e.doc_id));
            }
            if e.mentions.is_empty() {
                return fail(format!("entity {} has no mentions", e.entity_id));
            }
            if entities.insert(&e.entity_id, e).is_some() {
                return fail(format!("duplicate entity id {}", e.entity_id));
            }
            for mid in &e.mentions {
                let Some(m) = mentions.get(mid.as_str()) else {
                    return fail(format!("entity {} references unknown mention {mid}", e.entity_id));
                };
                if m.etype != e.etype {
                    return fail(format!(
                        "entity {} is {} but mention {mid} is {}",
                        e.entity_id, e.etype, m.etype
                    ));
                }
                if !seen_mentions.insert(mid) {
                    return fail(format!("mention {mid} belongs to more than one entity"));
                }
            }
        }

        let num_sentences = self.document.num_sentences();
        for &s in &self.evidence_sentences {
            if s >= num_sentences {
                return fail(format!("evidence sentence {s} out of range ({num_sentences} sentences)"));
            }
        }

        for (i, r) in self.relations.iter().enumerate() {
            if r.doc_id != doc_id {
                return fail(format!("relation {i} belongs to document {}", r.doc_id));
            }
            let role = |id: &str, want: EntityType, name: &str| -> Result<()> {
                match entities.get(id) {
                    None => Err(Error::validation(
                        doc_id,
                        format!("relation {i} references missing {name} entity {id}"),
                    )),
                    Some(e) if e.etype != want => Err(Error::validation(
                        doc_id,
                        format!("relation {i} {name} entity {id} is not of type {want}"),
                    )),
                    Some(_) => Ok(()),
                }
            };
            role(&r.intervention, EntityType::Intervention, "intervention")?;
            role(&r.outcome, EntityType::Outcome, "outcome")?;
            if let Some(c) = &r.comparator {
                role(c, EntityType::Intervention, "comparator")?;
                if *c == r.intervention {
                    return fail(format!("relation {i} uses {c} as both intervention and comparator"));
                }
            }
            if r.evidence_sentence >= num_sentences {
                return fail(format!(
                    "relation {i} evidence sentence {} out of range",
                    r.evidence_sentence
                ));
            }
            if !(0.0..=1.0).contains(&r.confidence) {
                return fail(format!("relation {i} confidence {} not in [0, 1]", r.confidence));
            }
        }
        Ok(())
    }

    /// Gold grouping as clusters of mention spans keyed by entity id.
    pub fn clusters(&self, etype: Option<EntityType>) -> BTreeMap<String, Vec<Span>> {
        self.entities
            .iter()
            .filter(|e| etype.is_none_or(|t| t == e.etype))
            .map(|e| (e.entity_id.clone(), self.entity_spans(&e.entity_id)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> Document {
        // "Aspirin reduced pain . Placebo did not ."
        Document::new(
            "d1",
            "Aspirin reduced pain. Placebo did not.",
            &[(0, 7), (8, 15), (16, 20), (20, 21), (22, 29), (30, 33), (34, 37), (37, 38)],
            &[(0, 4), (4, 8)],
        )
        .unwrap()
    }

    #[test]
    fn token_surfaces_come_from_text() {
        let d = doc();
        assert_eq!(d.tokens()[0].text, "Aspirin");
        assert_eq!(d.tokens()[3].text, ".");
        assert_eq!(d.span_text(Span::new(0, 3)), "Aspirin reduced pain");
        assert_eq!(d.sentence_of(5), Some(1));
        assert_eq!(d.sentences_overlapping_chars(18, 25), vec![0, 1]);
    }

    #[test]
    fn multibyte_offsets_are_characters() {
        let d = Document::new("u", "β-blocker ok", &[(0, 9), (10, 12)], &[(0, 2)]).unwrap();
        assert_eq!(d.tokens()[0].text, "β-blocker");
        assert_eq!(d.span_text(Span::new(0, 2)), "β-blocker ok");
    }

    #[test]
    fn rejects_bad_offsets_and_partitions() {
        assert!(Document::new("x", "ab cd", &[(0, 2), (1, 5)], &[(0, 2)]).is_err());
        assert!(Document::new("x", "ab cd", &[(0, 2), (3, 9)], &[(0, 2)]).is_err());
        assert!(Document::new("x", "ab cd", &[(0, 2), (3, 5)], &[(0, 1)]).is_err());
        assert!(Document::new("x", "ab cd", &[(0, 2), (3, 5)], &[(0, 1), (0, 2)]).is_err());
        assert!(Document::new("x", "", &[], &[]).is_ok());
    }

    fn mention(id: &str, s: usize, e: usize, t: EntityType) -> Mention {
        Mention {
            mention_id: id.into(),
            doc_id: "d1".into(),
            span: Span::new(s, e),
            etype: t,
        }
    }

    fn entity(id: &str, t: EntityType, ms: &[&str]) -> Entity {
        Entity {
            entity_id: id.into(),
            doc_id: "d1".into(),
            etype: t,
            mentions: ms.iter().map(|s| s.to_string()).collect(),
            canonical_text: String::new(),
        }
    }

    #[test]
    fn validation_catches_each_invariant() {
        use EntityType::*;
        let ok_mentions = vec![
            mention("m1", 0, 1, Intervention),
            mention("m2", 2, 3, Outcome),
            mention("m3", 4, 5, Intervention),
        ];
        let ok_entities = vec![
            entity("e1", Intervention, &["m1"]),
            entity("e2", Outcome, &["m2"]),
            entity("e3", Intervention, &["m3"]),
        ];
        let rel = RelationTuple {
            doc_id: "d1".into(),
            intervention: "e1".into(),
            comparator: Some("e3".into()),
            outcome: "e2".into(),
            direction: Direction::Decreased,
            evidence_sentence: 0,
            confidence: 1.0,
        };
        AnnotatedDocument::new(doc(), ok_mentions.clone(), ok_entities.clone(), vec![0], vec![rel.clone()])
            .unwrap();

        let mut overlapping = ok_mentions.clone();
        overlapping.push(mention("m4", 0, 2, Intervention));
        let err = AnnotatedDocument::new(doc(), overlapping, vec![], vec![], vec![]).unwrap_err();
        assert!(err.to_string().contains("overlapping"), "{err}");

        // different types may overlap
        let mut cross = ok_mentions.clone();
        cross.push(mention("m4", 0, 2, Outcome));
        assert!(AnnotatedDocument::new(doc(), cross, vec![], vec![], vec![]).is_ok());

        let mut missing = rel.clone();
        missing.outcome = "e9".into();
        let err = AnnotatedDocument::new(doc(), ok_mentions.clone(), ok_entities.clone(), vec![], vec![missing])
            .unwrap_err();
        assert!(err.to_string().contains("missing outcome entity e9"), "{err}");

        let mut same = rel.clone();
        same.comparator = Some("e1".into());
        assert!(AnnotatedDocument::new(doc(), ok_mentions.clone(), ok_entities.clone(), vec![], vec![same]).is_err());

        let mut wrong_type = rel.clone();
        wrong_type.outcome = "e3".into();
        assert!(AnnotatedDocument::new(doc(), ok_mentions.clone(), ok_entities.clone(), vec![], vec![wrong_type])
            .is_err());

        let mut shared = ok_entities.clone();
        shared.push(entity("e4", Intervention, &["m1"]));
        assert!(AnnotatedDocument::new(doc(), ok_mentions.clone(), shared, vec![], vec![]).is_err());

        let mixed = vec![entity("e1", Intervention, &["m2"])];
        assert!(AnnotatedDocument::new(doc(), ok_mentions.clone(), mixed, vec![], vec![]).is_err());

        assert!(AnnotatedDocument::new(doc(), ok_mentions.clone(), vec![], vec![7], vec![]).is_err());
        let out_of_doc = vec![mention("m1", 7, 9, Outcome)];
        assert!(AnnotatedDocument::new(doc(), out_of_doc, vec![], vec![], vec![]).is_err());
    }
}
