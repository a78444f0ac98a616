use proptest::prelude::*;

use trial_evidence::corpus::{
    corpus_stats, load_corpus, load_predictions, parse_corpus, write_corpus, write_predictions, AnnotatedDocument, Entity, EntityType, Mention,
    RelationTuple, Span,
};
use trial_evidence::synth::{generate, SynthConfig};
use trial_evidence::text::document_from_sentences;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthetic_corpus_round_trips(seed in 0u64..10_000, n in 1usize..6) {
        let corpus = generate(&SynthConfig::new(n, seed), "p").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_corpus(&corpus.docs, &path).unwrap();
        let back = load_corpus(&path).unwrap();
        prop_assert_eq!(&back, &corpus.docs);

        let relations: Vec<RelationTuple> = corpus.docs.iter().flat_map(|d| d.relations.clone()).collect();
        let pred = dir.path().join("p.jsonl");
        write_predictions(&relations, &pred).unwrap();
        prop_assert_eq!(load_predictions(&pred).unwrap(), relations);
    }

    #[test]
    fn synthetic_documents_validate(seed in 0u64..10_000) {
        let corpus = generate(&SynthConfig::new(3, seed), "v").unwrap();
        for d in &corpus.docs {
            prop_assert!(d.validate().is_ok());
            prop_assert!(!d.relations.is_empty());
        }
    }
}

#[test]
fn malformed_lines_report_line_number() {
    let good = r#"{"doc_id":"a","text":"x y","tokens":[[0,1],[2,3]],"sentences":[[0,2]]}"#;
    let text = format!("{good}\n{{not json\n");
    let err = parse_corpus(&text).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");

    // mention pointing outside the document
    let bad = r#"{"doc_id":"a","text":"x y","tokens":[[0,1],[2,3]],"sentences":[[0,2]],"mentions":[{"id":"m","type":"intervention","start":1,"end":5}]}"#;
    assert!(parse_corpus(bad).is_err());
}

/// Builds a corpus with the given per-document counts of relations,
/// entities and mentions.
fn corpus_with_counts(docs: usize, relations: usize, entities: usize, mentions: usize) -> Vec<AnnotatedDocument> {
    let share = |total: usize, k: usize| total / docs + usize::from(k < total % docs);
    (0..docs)
        .map(|k| {
            let (r, e, m) = (share(relations, k), share(entities, k), share(mentions, k));
            assert!(e > r && m >= e);
            let words: Vec<String> = (0..m).map(|i| format!("w{i}")).collect();
            let doc_id = format!("d{k}");
            let doc = document_from_sentences(&doc_id, &[words.join(" ")]).unwrap();
            // entity 0 is the intervention, the rest outcomes
            let etype = |e: usize| if e == 0 { EntityType::Intervention } else { EntityType::Outcome };
            let mention_list: Vec<Mention> = (0..m)
                .map(|i| Mention {
                    mention_id: format!("m{i}"),
                    doc_id: doc_id.clone(),
                    span: Span::new(i, i + 1),
                    etype: etype(i.min(e - 1)),
                })
                .collect();
            let entity_list: Vec<Entity> = (0..e)
                .map(|j| Entity {
                    entity_id: format!("e{j}"),
                    doc_id: doc_id.clone(),
                    etype: etype(j),
                    mentions: if j + 1 < e { vec![format!("m{j}")] } else { (j..m).map(|i| format!("m{i}")).collect() },
                    canonical_text: format!("w{j}"),
                })
                .collect();
            let relation_list: Vec<RelationTuple> = (0..r)
                .map(|j| RelationTuple {
                    doc_id: doc_id.clone(),
                    intervention: "e0".into(),
                    comparator: None,
                    outcome: format!("e{}", j + 1),
                    direction: trial_evidence::corpus::Direction::NoDifference,
                    evidence_sentence: 0,
                    confidence: 1.0,
                })
                .collect();
            AnnotatedDocument::new(doc, mention_list, entity_list, vec![0], relation_list).unwrap()
        })
        .collect()
}

#[test]
fn stats_match_reference_table() {
    // totals of the reference training split and its rounded averages
    let corpus = corpus_with_counts(1772, 4565, 12556, 29908);
    let s = corpus_stats(&corpus).unwrap();
    assert_eq!((s.num_abstracts, s.num_relations, s.num_entities, s.num_mentions), (1772, 4565, 12556, 29908));
    let round2 = |x: f64| (x * 100.0).round() / 100.0;
    assert_eq!(round2(s.avg_relations), 2.58);
    assert_eq!(round2(s.avg_entities), 7.09);
    assert_eq!(round2(s.avg_mentions), 16.88);
}

#[test]
fn stats_on_small_fixture() {
    let corpus = corpus_with_counts(2, 3, 6, 9);
    let s = corpus_stats(&corpus).unwrap();
    assert_eq!(s.avg_relations, 1.5);
    assert_eq!(s.avg_entities, 3.0);
    assert_eq!(s.avg_mentions, 4.5);
    assert!(corpus_stats(&[]).is_err());
}
