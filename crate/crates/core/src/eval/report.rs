//! Corpus-level evaluation of a pipeline run: every stage metric in one
//! flat map, plus a plain-text table.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::clustering::{b_cubed, ceaf_e, muc};
use super::extraction::{entity_prf_corpus, evidence_prf, token_prf, SpanMatch};
use super::prf::Prf;
use super::relations::{gold_links, linking_accuracy, relation_prf, resolve_entities, LinkRecord, RelationMode};
use crate::corpus::{AnnotatedDocument, Direction, EntityType, Span};
use crate::error::{Error, Result};
use crate::linking::Link;
use crate::synth::HardCase;

/// Flat metric name to value. Names are dotted paths such as
/// `entities.intervention.f1`.
pub type Metrics = BTreeMap<String, f64>;

fn put_prf(m: &mut Metrics, prefix: &str, p: &Prf) {
    m.insert(format!("{prefix}.precision"), p.precision);
    m.insert(format!("{prefix}.recall"), p.recall);
    m.insert(format!("{prefix}.f1"), p.f1);
}

/// For each gold relation, the gold direction and the predicted direction
/// of the matching predicted relation (same resolved intervention and
/// outcome; same evidence sentence preferred, then higher confidence), or
/// `None` when nothing matched.
pub fn aligned_directions(gold: &[AnnotatedDocument], pred: &[AnnotatedDocument]) -> Result<Vec<(Direction, Option<Direction>)>> {
    check_aligned(gold, pred)?;
    let mut out = Vec::new();
    for (g, p) in gold.iter().zip(pred) {
        let resolve = resolve_entities(g, p);
        let lookup = |id: &str| resolve.get(id).cloned().flatten();
        let resolved: Vec<_> = p
            .relations
            .iter()
            .filter_map(|r| Some((lookup(&r.intervention)?, lookup(&r.outcome)?, r)))
            .collect();
        for gr in &g.relations {
            let best = resolved
                .iter()
                .filter(|(i, o, _)| *i == gr.intervention && *o == gr.outcome)
                .max_by(|a, b| {
                    (a.2.evidence_sentence == gr.evidence_sentence)
                        .cmp(&(b.2.evidence_sentence == gr.evidence_sentence))
                        .then(a.2.confidence.total_cmp(&b.2.confidence))
                        .then(b.2.evidence_sentence.cmp(&a.2.evidence_sentence))
                });
            out.push((gr.direction, best.map(|(_, _, r)| r.direction)));
        }
    }
    Ok(out)
}

/// Per-class direction scores where a missing prediction counts as a
/// false negative for the gold class.
pub fn direction_scores(pairs: &[(Direction, Option<Direction>)]) -> (BTreeMap<Direction, Prf>, f64) {
    let mut per_class = BTreeMap::new();
    for d in Direction::ALL {
        let tp = pairs.iter().filter(|(g, p)| *g == d && *p == Some(d)).count();
        let fp = pairs.iter().filter(|(g, p)| *g != d && *p == Some(d)).count();
        let fn_ = pairs.iter().filter(|(g, p)| *g == d && *p != Some(d)).count();
        per_class.insert(d, Prf::from_counts(tp, fp, fn_));
    }
    let macro_f1 = per_class.values().map(|p| p.f1).sum::<f64>() / Direction::ALL.len() as f64;
    (per_class, macro_f1)
}

/// Predicted links with entity ids mapped into the gold id space.
pub fn resolve_links(gold: &[AnnotatedDocument], pred: &[AnnotatedDocument], links: &[Vec<Link>]) -> Result<Vec<LinkRecord>> {
    check_aligned(gold, pred)?;
    if links.len() != pred.len() {
        return Err(Error::input(format!(
            "{} link lists for {} documents",
            links.len(),
            pred.len()
        )));
    }
    let mut out = Vec::new();
    for ((g, p), ls) in gold.iter().zip(pred).zip(links) {
        let resolve = resolve_entities(g, p);
        let lookup = |id: &str| resolve.get(id).cloned().flatten();
        for l in ls {
            out.push(LinkRecord {
                doc_id: p.doc_id().to_string(),
                evidence: l.evidence,
                intervention: lookup(&l.intervention),
                comparator: l.comparator.as_deref().and_then(lookup),
                outcomes: l.outcomes.iter().filter_map(|o| lookup(o)).collect(),
            });
        }
    }
    Ok(out)
}

type MentionKey = (Span, EntityType);

fn clusters(doc: &AnnotatedDocument) -> Vec<Vec<MentionKey>> {
    doc.entities
        .iter()
        .map(|e| {
            e.mentions
                .iter()
                .filter_map(|m| doc.mention(m).map(|m| (m.span, m.etype)))
                .collect()
        })
        .collect()
}

/// Grouping quality averaged over documents, with mentions keyed by span
/// and type so that gold and predicted clusters share a key space.
pub fn grouping_scores(gold: &[AnnotatedDocument], pred: &[AnnotatedDocument]) -> Result<[Prf; 3]> {
    check_aligned(gold, pred)?;
    let n = gold.len().max(1) as f64;
    let mut sums = [[0.0; 3]; 3];
    for (g, p) in gold.iter().zip(pred) {
        let (gc, pc) = (clusters(g), clusters(p));
        for (k, s) in [b_cubed(&gc, &pc), muc(&gc, &pc), ceaf_e(&gc, &pc)].iter().enumerate() {
            sums[k][0] += s.precision;
            sums[k][1] += s.recall;
            sums[k][2] += s.f1;
        }
    }
    Ok(sums.map(|[p, r, f]| Prf {
        precision: p / n,
        recall: r / n,
        f1: f / n,
        ..Prf::default()
    }))
}

/// Fraction of hard cases whose outcome received the correct direction.
pub fn hard_case_accuracy(gold: &[AnnotatedDocument], pred: &[AnnotatedDocument], cases: &[HardCase]) -> Result<Option<f64>> {
    check_aligned(gold, pred)?;
    if cases.is_empty() {
        return Ok(None);
    }
    let index: HashMap<&str, usize> = gold.iter().enumerate().map(|(k, d)| (d.doc_id(), k)).collect();
    let mut correct = 0;
    for c in cases {
        let Some(&k) = index.get(c.doc_id.as_str()) else {
            return Err(Error::input(format!("hard case refers to unknown document {}", c.doc_id)));
        };
        let (g, p) = (&gold[k], &pred[k]);
        let Some(gr) = g
            .relations
            .iter()
            .find(|r| r.evidence_sentence == c.evidence && r.outcome == c.outcome)
        else {
            return Err(Error::input(format!("hard case {}:{} has no gold relation", c.doc_id, c.evidence)));
        };
        let single = AnnotatedDocument {
            relations: vec![gr.clone()],
            ..g.clone()
        };
        let pairs = aligned_directions(std::slice::from_ref(&single), std::slice::from_ref(p))?;
        if pairs[0].1 == Some(gr.direction) {
            correct += 1;
        }
    }
    Ok(Some(correct as f64 / cases.len() as f64))
}

fn check_aligned(gold: &[AnnotatedDocument], pred: &[AnnotatedDocument]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::input(format!(
            "{} gold documents but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    for (g, p) in gold.iter().zip(pred) {
        if g.doc_id() != p.doc_id() {
            return Err(Error::input(format!(
                "document order differs: gold {} vs predicted {}",
                g.doc_id(),
                p.doc_id()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalInputs<'a> {
    /// Enables linking accuracy.
    pub links: Option<&'a [Vec<Link>]>,
    /// Enables hard-case accuracy.
    pub hard_cases: &'a [HardCase],
    /// Adds overlap-matched entity scores under `entities_overlap.*`.
    pub partial: bool,
}

/// Every metric for a run.
pub fn evaluate(gold: &[AnnotatedDocument], pred: &[AnnotatedDocument], inputs: EvalInputs) -> Result<Metrics> {
    let EvalInputs {
        links,
        hard_cases,
        partial,
    } = inputs;
    check_aligned(gold, pred)?;
    let mut m = Metrics::new();
    let pred_mentions: Vec<_> = pred.iter().map(|d| d.mentions.clone()).collect();
    let tokens = token_prf(gold, &pred_mentions)?;
    let entities = entity_prf_corpus(gold, &pred_mentions, SpanMatch::Exact)?;
    for (name, t) in [("tokens", &tokens), ("entities", &entities)] {
        put_prf(&mut m, &format!("{name}.intervention"), &t.intervention);
        put_prf(&mut m, &format!("{name}.outcome"), &t.outcome);
        put_prf(&mut m, &format!("{name}.overall"), &t.overall);
    }
    if partial {
        let overlap = entity_prf_corpus(gold, &pred_mentions, SpanMatch::Overlap)?;
        put_prf(&mut m, "entities_overlap.overall", &overlap.overall);
    }
    let pred_evidence: Vec<Vec<usize>> = pred.iter().map(|d| d.evidence_sentences.clone()).collect();
    put_prf(&mut m, "evidence", &evidence_prf(gold, &pred_evidence)?);

    put_prf(&mut m, "relations.triplet", &relation_prf(gold, pred, RelationMode::Triplet)?);
    put_prf(&mut m, "relations.binary", &relation_prf(gold, pred, RelationMode::Binary)?);

    let pairs = aligned_directions(gold, pred)?;
    let (per_class, macro_f1) = direction_scores(&pairs);
    for (d, p) in &per_class {
        put_prf(&mut m, &format!("direction.{}", d.as_str()), p);
    }
    m.insert("direction.macro_f1".into(), macro_f1);
    m.insert("direction.coverage".into(), ratio(pairs.iter().filter(|(_, p)| p.is_some()).count(), pairs.len()));

    let [b3, mu, ce] = grouping_scores(gold, pred)?;
    put_prf(&mut m, "grouping.b_cubed", &b3);
    put_prf(&mut m, "grouping.muc", &mu);
    put_prf(&mut m, "grouping.ceaf_e", &ce);

    if let Some(links) = links {
        let gold_records: Vec<LinkRecord> = gold.iter().flat_map(gold_links).collect();
        if !gold_records.is_empty() {
            let acc = linking_accuracy(&gold_records, &resolve_links(gold, pred, links)?)?;
            m.insert("linking.intervention".into(), acc.intervention);
            m.insert("linking.comparator".into(), acc.comparator);
            m.insert("linking.outcome".into(), acc.outcome);
        }
    }
    if let Some(acc) = hard_case_accuracy(gold, pred, hard_cases)? {
        m.insert("hard_cases.accuracy".into(), acc);
    }
    m.insert("documents".into(), gold.len() as f64);
    m.insert("relations.gold".into(), gold.iter().map(|d| d.relations.len()).sum::<usize>() as f64);
    m.insert("relations.predicted".into(), pred.iter().map(|d| d.relations.len()).sum::<usize>() as f64);
    Ok(m)
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Renders the metrics as a fixed-layout table. Missing metrics print `-`.
pub fn render_table(m: &Metrics) -> String {
    let cell = |key: &str| m.get(key).map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    let prf_row = |out: &mut String, label: &str, prefix: &str| {
        let _ = writeln!(
            out,
            "  {label:<24} {:>6} {:>6} {:>6}",
            cell(&format!("{prefix}.precision")),
            cell(&format!("{prefix}.recall")),
            cell(&format!("{prefix}.f1"))
        );
    };
    let mut out = String::new();
    let _ = writeln!(out, "  {:<24} {:>6} {:>6} {:>6}", "", "P", "R", "F1");
    let _ = writeln!(out, "Extraction");
    prf_row(&mut out, "tokens", "tokens.overall");
    prf_row(&mut out, "entities", "entities.overall");
    prf_row(&mut out, "  intervention", "entities.intervention");
    prf_row(&mut out, "  outcome", "entities.outcome");
    prf_row(&mut out, "evidence", "evidence");
    let _ = writeln!(out, "Linking accuracy");
    let _ = writeln!(
        out,
        "  {:<24} {:>6} {:>6} {:>6}",
        "I / C / O",
        cell("linking.intervention"),
        cell("linking.comparator"),
        cell("linking.outcome")
    );
    let _ = writeln!(out, "Inference");
    for d in Direction::ALL {
        prf_row(&mut out, d.as_str(), &format!("direction.{}", d.as_str()));
    }
    let _ = writeln!(out, "  {:<24} {:>20}", "macro F1", cell("direction.macro_f1"));
    let _ = writeln!(out, "Relations");
    prf_row(&mut out, "triplet", "relations.triplet");
    prf_row(&mut out, "binary", "relations.binary");
    let _ = writeln!(out, "Grouping");
    prf_row(&mut out, "B-cubed", "grouping.b_cubed");
    prf_row(&mut out, "MUC", "grouping.muc");
    prf_row(&mut out, "CEAF-e", "grouping.ceaf_e");
    if let Some(v) = m.get("hard_cases.accuracy") {
        let _ = writeln!(out, "Hard cases accuracy {v:.2}");
    }
    out
}
