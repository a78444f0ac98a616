//! Token- and entity-level extraction scores.

use std::collections::BTreeSet;

use serde::Serialize;

use super::prf::Prf;
use crate::corpus::{AnnotatedDocument, EntityType, Mention, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TypedPrf {
    pub intervention: Prf,
    pub outcome: Prf,
    pub overall: Prf,
}

impl TypedPrf {
    fn from_parts(intervention: Prf, outcome: Prf) -> TypedPrf {
        TypedPrf {
            intervention,
            outcome,
            overall: intervention + outcome,
        }
    }

    pub fn get(&self, etype: EntityType) -> Prf {
        match etype {
            EntityType::Intervention => self.intervention,
            EntityType::Outcome => self.outcome,
        }
    }
}

fn token_set(mentions: &[Mention], etype: EntityType) -> BTreeSet<usize> {
    mentions
        .iter()
        .filter(|m| m.etype == etype)
        .flat_map(|m| m.span.start..m.span.end)
        .collect()
}

fn aligned<'a, T>(gold: &'a [AnnotatedDocument], pred: &'a [T]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::input(format!(
            "{} gold documents but {} prediction sets",
            gold.len(),
            pred.len()
        )));
    }
    Ok(())
}

/// Per-token comparison of typed labels: a token counts once per type that
/// covers it on either side.
pub fn token_prf(gold: &[AnnotatedDocument], pred: &[Vec<Mention>]) -> Result<TypedPrf> {
    aligned(gold, pred)?;
    let mut parts = [Prf::default(); 2];
    for (g, p) in gold.iter().zip(pred) {
        for (slot, etype) in EntityType::ALL.iter().enumerate() {
            let gs = token_set(&g.mentions, *etype);
            let ps = token_set(p, *etype);
            let tp = gs.intersection(&ps).count();
            parts[slot] += Prf::from_counts(tp, ps.len() - tp, gs.len() - tp);
        }
    }
    Ok(TypedPrf::from_parts(parts[0], parts[1]))
}

/// How a predicted span is compared with a gold mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpanMatch {
    #[default]
    Exact,
    /// Any token overlap; diagnostic only.
    Overlap,
}

impl SpanMatch {
    fn matches(self, a: Span, b: Span) -> bool {
        match self {
            SpanMatch::Exact => a == b,
            SpanMatch::Overlap => a.overlaps(&b),
        }
    }
}

/// Entity-level extraction for one document. A gold entity is found when at
/// least one of its mentions is predicted; every predicted span that is not a
/// mention of any gold entity is a false positive, duplicates included.
pub fn entity_prf(gold: &AnnotatedDocument, pred: &[Mention], matching: SpanMatch) -> TypedPrf {
    let mut parts = [Prf::default(); 2];
    for (slot, etype) in EntityType::ALL.iter().enumerate() {
        let preds: Vec<Span> = pred.iter().filter(|m| m.etype == *etype).map(|m| m.span).collect();
        let gold_mentions: Vec<Span> = gold
            .mentions
            .iter()
            .filter(|m| m.etype == *etype)
            .map(|m| m.span)
            .collect();
        let mut tp = 0;
        let mut fn_ = 0;
        for e in gold.entities.iter().filter(|e| e.etype == *etype) {
            let found = gold
                .entity_spans(&e.entity_id)
                .iter()
                .any(|g| preds.iter().any(|p| matching.matches(*p, *g)));
            if found {
                tp += 1;
            } else {
                fn_ += 1;
            }
        }
        let fp = preds
            .iter()
            .filter(|p| !gold_mentions.iter().any(|g| matching.matches(**p, *g)))
            .count();
        parts[slot] = Prf::from_counts(tp, fp, fn_);
    }
    TypedPrf::from_parts(parts[0], parts[1])
}

/// Sum of per-document entity counts.
pub fn entity_prf_corpus(gold: &[AnnotatedDocument], pred: &[Vec<Mention>], matching: SpanMatch) -> Result<TypedPrf> {
    aligned(gold, pred)?;
    let mut parts = [Prf::default(); 2];
    for (g, p) in gold.iter().zip(pred) {
        let s = entity_prf(g, p, matching);
        parts[0] += s.intervention;
        parts[1] += s.outcome;
    }
    Ok(TypedPrf::from_parts(parts[0], parts[1]))
}

/// Evidence-sentence detection scored as a set of sentence indices.
pub fn evidence_prf(gold: &[AnnotatedDocument], pred: &[Vec<usize>]) -> Result<Prf> {
    aligned(gold, pred)?;
    Ok(gold
        .iter()
        .zip(pred)
        .map(|(g, p)| {
            let gs: BTreeSet<usize> = g.evidence_sentences.iter().copied().collect();
            let ps: BTreeSet<usize> = p.iter().copied().collect();
            let tp = gs.intersection(&ps).count();
            Prf::from_counts(tp, ps.len() - tp, gs.len() - tp)
        })
        .sum())
}
