//! Training-sample construction for the evidence classifier and linker.

use rand::seq::index::sample;
use rand::Rng;

use crate::corpus::{Document, Span};

/// Sentences overlapping any character span are positives; each positive
/// is paired with the unused non-positive sentence closest to it in token
/// length (earliest on ties). Returns `(sentence, is_positive)` with each
/// negative right after its positive.
pub fn sample_evidence_training(doc: &Document, evidence_chars: &[(usize, usize)]) -> Vec<(usize, bool)> {
    let mut positives: Vec<usize> = evidence_chars
        .iter()
        .flat_map(|&(s, e)| doc.sentences_overlapping_chars(s, e))
        .collect();
    positives.sort_unstable();
    positives.dedup();
    paired_negatives(doc, &positives)
}

/// Length-matched negatives for known positive sentence indices.
pub fn paired_negatives(doc: &Document, positives: &[usize]) -> Vec<(usize, bool)> {
    let len = |i: usize| doc.sentence(i).map_or(0, |s| s.len());
    let mut available: Vec<usize> = (0..doc.num_sentences()).filter(|i| !positives.contains(i)).collect();
    let mut out = Vec::with_capacity(2 * positives.len());
    let mut short = 0;
    for &p in positives {
        out.push((p, true));
        let target = len(p);
        let pick = available
            .iter()
            .enumerate()
            .min_by_key(|(_, &s)| (len(s).abs_diff(target), s))
            .map(|(k, _)| k);
        match pick {
            Some(k) => out.push((available.remove(k), false)),
            None => short += 1,
        }
    }
    if short > 0 {
        log::warn!("{}: {short} evidence positives without a negative", doc.doc_id());
    }
    out
}

/// Up to `k` spans for the UNRELATED class, preferring in turn: other tagged
/// interventions, the compound span joining intervention and comparator when
/// they sit close together in one sentence, and random short spans.
/// `exclude` holds spans that must never be emitted (mentions of the gold
/// pair's entities); random spans also avoid them.
pub fn synthesize_linker_negatives<R: Rng>(
    doc: &Document,
    tagged: &[Span],
    exclude: &[Span],
    gold_intervention: Span,
    gold_comparator: Option<Span>,
    k: usize,
    rng: &mut R,
) -> Vec<Span> {
    let mut blocked: Vec<Span> = exclude.to_vec();
    blocked.push(gold_intervention);
    blocked.extend(gold_comparator);

    let mut others: Vec<Span> = tagged
        .iter()
        .copied()
        .filter(|s| !blocked.iter().any(|b| b.overlaps(s)))
        .collect();
    others.sort();
    others.dedup();
    let mut out: Vec<Span> = if others.len() > k {
        let mut idx = sample(rng, others.len(), k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| others[i]).collect()
    } else {
        others
    };

    if out.len() < k {
        if let Some(c) = gold_comparator {
            let (a, b) = if gold_intervention.start <= c.start {
                (gold_intervention, c)
            } else {
                (c, gold_intervention)
            };
            let same_sentence = doc.sentence_of(a.start).is_some() && doc.sentence_of(a.start) == doc.sentence_of(b.end - 1);
            if same_sentence && b.start >= a.end && b.start - a.end <= 2 {
                out.push(Span::new(a.start, b.end));
            }
        }
    }

    let sentences: Vec<Span> = doc.sentences().iter().copied().filter(|s| !s.is_empty()).collect();
    let mut attempts = 0;
    while out.len() < k && !sentences.is_empty() && attempts < 50 * k {
        attempts += 1;
        let s = sentences[rng.gen_range(0..sentences.len())];
        let len = rng.gen_range(1..=4usize.min(s.len()));
        let start = rng.gen_range(s.start..=s.end - len);
        let span = Span::new(start, start + len);
        if blocked.iter().any(|b| b.overlaps(&span)) || out.contains(&span) {
            continue;
        }
        out.push(span);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::document_from_sentences;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn doc(sentences: &[&str]) -> Document {
        let s: Vec<String> = sentences.iter().map(|s| s.to_string()).collect();
        document_from_sentences("d", &s).unwrap()
    }

    #[test]
    fn length_matched_negative() {
        // token lengths 2, 5, 4, 7
        let d = doc(&["a b", "c d e f g", "h i j k", "l m n o p q r"]);
        let start = d.tokens()[d.sentence(2).unwrap().start].char_start;
        let out = sample_evidence_training(&d, &[(start, start + 1)]);
        // candidates 0 (|2-4|=2), 1 (1), 3 (3)
        assert_eq!(out, vec![(2, true), (1, false)]);
    }

    #[test]
    fn straddling_span_and_exhaustion() {
        let d = doc(&["a b", "c d", "e f"]);
        let from = d.tokens()[1].char_start;
        let to = d.tokens()[2].char_end;
        let out = sample_evidence_training(&d, &[(from, to)]);
        assert_eq!(out, vec![(0, true), (2, false), (1, true)]);
        let all = sample_evidence_training(&d, &[(0, d.num_chars())]);
        assert!(all.iter().all(|(_, pos)| *pos));
    }

    #[test]
    fn negative_categories() {
        let d = doc(&["aspirin versus placebo and heparin were given .", "pain fell ."]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let i = Span::new(0, 1);
        let c = Span::new(2, 3);
        let heparin = Span::new(4, 5);
        let out = synthesize_linker_negatives(&d, &[i, c, heparin], &[], i, Some(c), 3, &mut rng);
        assert_eq!(out[0], heparin);
        assert_eq!(out[1], Span::new(0, 3));
        assert_eq!(out.len(), 3);
        assert!(!out[2].overlaps(&i) && !out[2].overlaps(&c));

        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = synthesize_linker_negatives(&d, &[], &[], i, Some(c), 5, &mut rng);
            assert_eq!(out[0], Span::new(0, 3));
            for s in &out[1..] {
                assert!(!s.overlaps(&i) && !s.overlaps(&c));
                assert!(d.sentence_of(s.start) == d.sentence_of(s.end - 1));
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let d = doc(&["a b c d e f g h", "i j k l"]);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            synthesize_linker_negatives(&d, &[], &[], Span::new(0, 1), None, 3, &mut rng)
        };
        assert_eq!(run(7), run(7));
    }
}
