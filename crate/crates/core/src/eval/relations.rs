//! Relation-level scoring, linking accuracy and per-direction metrics.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::prf::Prf;
use crate::corpus::{AnnotatedDocument, Direction, RelationTuple, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationMode {
    /// Intervention, comparator, outcome and direction must all match.
    Triplet,
    /// Comparator ignored.
    Binary,
}

/// Resolves each predicted entity to the gold entity it denotes. The
/// grounded mentions of a predicted entity are those of its spans that
/// exactly match a gold mention of the same type; the entity resolves when
/// all grounded mentions belong to one gold entity.
pub fn resolve_entities(gold: &AnnotatedDocument, pred: &AnnotatedDocument) -> HashMap<String, Option<String>> {
    let m2e = gold.mention_to_entity();
    let gold_by_span: HashMap<(Span, crate::corpus::EntityType), &str> = gold
        .mentions
        .iter()
        .filter_map(|m| m2e.get(m.mention_id.as_str()).map(|e| ((m.span, m.etype), *e)))
        .collect();
    pred.entities
        .iter()
        .map(|e| {
            let mut grounded = e.mentions.iter().filter_map(|mid| {
                let m = pred.mention(mid)?;
                gold_by_span.get(&(m.span, m.etype)).copied()
            });
            let resolved = match grounded.next() {
                Some(first) if grounded.all(|g| g == first) => Some(first.to_string()),
                _ => None,
            };
            (e.entity_id.clone(), resolved)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    i: String,
    c: Option<String>,
    o: String,
    direction: Direction,
}

fn project(relations: &[RelationTuple], mode: RelationMode) -> Vec<RelationTuple> {
    match mode {
        RelationMode::Triplet => relations.to_vec(),
        RelationMode::Binary => {
            // highest confidence first, so dedupe keeps the strongest copy
            let mut sorted: Vec<RelationTuple> = relations.iter().map(RelationTuple::to_binary).collect();
            sorted.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
            let mut seen = Vec::new();
            let mut out = Vec::new();
            for r in sorted {
                let k = (r.intervention.clone(), r.outcome.clone(), r.direction);
                if !seen.contains(&k) {
                    seen.push(k);
                    out.push(r);
                }
            }
            out
        }
    }
}

fn document_counts(gold: &AnnotatedDocument, pred: &AnnotatedDocument, mode: RelationMode) -> (usize, usize, usize) {
    let resolve = resolve_entities(gold, pred);
    let lookup = |id: &str| resolve.get(id).cloned().flatten();
    let gold_rel = project(&gold.relations, mode);
    let mut pred_rel = project(&pred.relations, mode);
    pred_rel.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));

    let gold_keys: Vec<Key> = gold_rel
        .iter()
        .map(|r| Key {
            i: r.intervention.clone(),
            c: r.comparator.clone(),
            o: r.outcome.clone(),
            direction: r.direction,
        })
        .collect();
    let mut used = vec![false; gold_keys.len()];
    let mut tp = 0;
    for r in &pred_rel {
        let (Some(i), Some(o)) = (lookup(&r.intervention), lookup(&r.outcome)) else {
            continue;
        };
        let c = match &r.comparator {
            Some(c) => match lookup(c) {
                Some(g) => Some(g),
                None => continue,
            },
            None => None,
        };
        let key = Key {
            i,
            c,
            o,
            direction: r.direction,
        };
        if let Some(j) = (0..gold_keys.len()).find(|&j| !used[j] && gold_keys[j] == key) {
            used[j] = true;
            tp += 1;
        }
    }
    (tp, pred_rel.len() - tp, gold_keys.len() - tp)
}

/// Relation P/R/F1 over aligned gold and predicted documents. Predictions
/// are matched greedily in order of confidence; each gold relation is
/// matched at most once.
pub fn relation_prf(gold: &[AnnotatedDocument], pred: &[AnnotatedDocument], mode: RelationMode) -> Result<Prf> {
    if gold.len() != pred.len() {
        return Err(Error::input(format!(
            "{} gold documents but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut total = Prf::default();
    for (g, p) in gold.iter().zip(pred) {
        if g.doc_id() != p.doc_id() {
            return Err(Error::input(format!(
                "document order differs: gold {} vs predicted {}",
                g.doc_id(),
                p.doc_id()
            )));
        }
        let (tp, fp, fn_) = document_counts(g, p, mode);
        total += Prf::from_counts(tp, fp, fn_);
    }
    Ok(total)
}

/// Entities linked to one evidence sentence, with ids in the gold space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub doc_id: String,
    pub evidence: usize,
    pub intervention: Option<String>,
    pub comparator: Option<String>,
    pub outcomes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkingAccuracy {
    pub intervention: f64,
    pub comparator: f64,
    pub outcome: f64,
}

/// Gold link targets: one per gold relation, keyed by its evidence sentence.
pub fn gold_links(doc: &AnnotatedDocument) -> Vec<LinkRecord> {
    doc.relations
        .iter()
        .map(|r| LinkRecord {
            doc_id: r.doc_id.clone(),
            evidence: r.evidence_sentence,
            intervention: Some(r.intervention.clone()),
            comparator: r.comparator.clone(),
            outcomes: vec![r.outcome.clone()],
        })
        .collect()
}

/// Fraction of gold relations whose intervention, comparator and outcome
/// were each linked to the same evidence sentence. The comparator rate is
/// taken over gold relations that have a comparator.
pub fn linking_accuracy(gold: &[LinkRecord], pred: &[LinkRecord]) -> Result<LinkingAccuracy> {
    if gold.is_empty() {
        return Err(Error::input("linking accuracy needs at least one gold link"));
    }
    let by_sentence: HashMap<(&str, usize), Vec<&LinkRecord>> = pred.iter().fold(HashMap::new(), |mut m, p| {
        m.entry((p.doc_id.as_str(), p.evidence)).or_insert_with(Vec::new).push(p);
        m
    });
    let (mut i_ok, mut c_ok, mut c_total, mut o_ok, mut o_total) = (0, 0, 0, 0, 0);
    for g in gold {
        let preds = by_sentence.get(&(g.doc_id.as_str(), g.evidence)).cloned().unwrap_or_default();
        if preds.iter().any(|p| p.intervention.is_some() && p.intervention == g.intervention) {
            i_ok += 1;
        }
        if g.comparator.is_some() {
            c_total += 1;
            if preds.iter().any(|p| p.comparator == g.comparator) {
                c_ok += 1;
            }
        }
        for o in &g.outcomes {
            o_total += 1;
            if preds.iter().any(|p| p.outcomes.contains(o)) {
                o_ok += 1;
            }
        }
    }
    let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(LinkingAccuracy {
        intervention: rate(i_ok, gold.len()),
        comparator: rate(c_ok, c_total),
        outcome: rate(o_ok, o_total),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionScores {
    pub per_class: BTreeMap<Direction, Prf>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub support: BTreeMap<Direction, usize>,
}

pub fn direction_prf(gold: &[Direction], pred: &[Direction]) -> Result<DirectionScores> {
    if gold.len() != pred.len() {
        return Err(Error::input(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let mut per_class = BTreeMap::new();
    let mut support = BTreeMap::new();
    for d in Direction::ALL {
        let tp = gold.iter().zip(pred).filter(|(g, p)| **g == d && **p == d).count();
        let fp = gold.iter().zip(pred).filter(|(g, p)| **g != d && **p == d).count();
        let fn_ = gold.iter().zip(pred).filter(|(g, p)| **g == d && **p != d).count();
        per_class.insert(d, Prf::from_counts(tp, fp, fn_));
        support.insert(d, tp + fn_);
    }
    let correct = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    let accuracy = if gold.is_empty() { 0.0 } else { correct as f64 / gold.len() as f64 };
    let macro_f1 = per_class.values().map(|p| p.f1).sum::<f64>() / Direction::ALL.len() as f64;
    Ok(DirectionScores {
        per_class,
        accuracy,
        macro_f1,
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::*;

    #[test]
    fn direction_fixture() {
        // confusion (gold rows, pred cols) over inc/dec/nd:
        // inc: 2 1 0 ; dec: 1 1 0 ; nd: 0 0 3
        let gold = [Increased, Increased, Increased, Decreased, Decreased, NoDifference, NoDifference, NoDifference];
        let pred = [Increased, Increased, Decreased, Increased, Decreased, NoDifference, NoDifference, NoDifference];
        let s = direction_prf(&gold, &pred).unwrap();
        let inc = s.per_class[&Increased];
        assert!((inc.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((inc.recall - 2.0 / 3.0).abs() < 1e-12);
        let dec = s.per_class[&Decreased];
        assert_eq!((dec.precision, dec.recall), (0.5, 0.5));
        assert_eq!(s.per_class[&NoDifference].f1, 1.0);
        assert_eq!(s.accuracy, 6.0 / 8.0);
    }

    #[test]
    fn single_class_predictions() {
        let s = direction_prf(&[Increased, Decreased], &[Increased, Increased]).unwrap();
        let nd = s.per_class[&NoDifference];
        assert_eq!((nd.precision, nd.recall), (0.0, 0.0));
        let dec = s.per_class[&Decreased];
        assert_eq!((dec.precision, dec.recall), (0.0, 0.0));
        assert!(direction_prf(&[Increased], &[]).is_err());
    }

    fn link(doc: &str, ev: usize, i: &str, c: Option<&str>, o: &[&str]) -> LinkRecord {
        LinkRecord {
            doc_id: doc.into(),
            evidence: ev,
            intervention: Some(i.into()),
            comparator: c.map(Into::into),
            outcomes: o.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn linking_four_cases() {
        let gold = vec![
            link("d", 0, "A", Some("P"), &["o1"]),
            link("d", 1, "A", Some("P"), &["o2"]),
            link("d", 2, "B", Some("P"), &["o3"]),
            link("e", 0, "X", Some("Y"), &["o4"]),
        ];
        let pred = vec![
            link("d", 0, "A", Some("P"), &["o1"]),
            link("d", 1, "A", Some("P"), &["o2"]),
            link("d", 2, "A", Some("P"), &["o3"]),
            link("e", 0, "X", Some("Z"), &[]),
        ];
        let acc = linking_accuracy(&gold, &pred).unwrap();
        assert_eq!(acc.intervention, 0.75);
        assert_eq!(acc.comparator, 0.75);
        assert_eq!(acc.outcome, 0.75);
        assert_eq!(linking_accuracy(&gold, &gold).unwrap().intervention, 1.0);
        assert!(linking_accuracy(&[], &pred).is_err());
    }
}
