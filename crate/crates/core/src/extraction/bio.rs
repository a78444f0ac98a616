use super::tagset::Tag;
use crate::corpus::{EntityType, Span};

/// Typed spans from a BIO sequence. An `I-X` that does not continue an
/// `X` span opens a new one, as if it were `B-X`.
pub fn decode_spans(labels: &[Tag]) -> Vec<(Span, EntityType)> {
    let mut out = Vec::new();
    let mut open: Option<(usize, EntityType)> = None;
    for (i, &tag) in labels.iter().enumerate() {
        let continues = tag.is_inside() && open.is_some_and(|(_, t)| Some(t) == tag.entity_type());
        if continues {
            continue;
        }
        if let Some((s, t)) = open.take() {
            out.push((Span::new(s, i), t));
        }
        if let Some(t) = tag.entity_type() {
            open = Some((i, t));
        }
    }
    if let Some((s, t)) = open {
        out.push((Span::new(s, labels.len()), t));
    }
    out
}

/// BIO labels for `len` tokens. Spans must not overlap.
pub fn encode_spans(len: usize, spans: &[(Span, EntityType)]) -> Vec<Tag> {
    let mut tags = vec![Tag::O; len];
    for &(span, t) in spans {
        for (i, tag) in tags.iter_mut().enumerate().take(span.end).skip(span.start) {
            *tag = if i == span.start { Tag::begin(t) } else { Tag::inside(t) };
        }
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use EntityType::*;

    #[test]
    fn decoding_examples() {
        assert_eq!(decode_spans(&[Tag::BInt, Tag::IInt, Tag::O]), vec![(Span::new(0, 2), Intervention)]);
        assert_eq!(decode_spans(&[Tag::IOut, Tag::O]), vec![(Span::new(0, 1), Outcome)]);
        assert_eq!(
            decode_spans(&[Tag::BInt, Tag::BInt]),
            vec![(Span::new(0, 1), Intervention), (Span::new(1, 2), Intervention)]
        );
        assert_eq!(
            decode_spans(&[Tag::BInt, Tag::IOut, Tag::IOut]),
            vec![(Span::new(0, 1), Intervention), (Span::new(1, 3), Outcome)]
        );
        assert!(decode_spans(&[]).is_empty());
    }

    fn span_sets() -> impl Strategy<Value = (usize, Vec<(Span, EntityType)>)> {
        (1usize..30).prop_flat_map(|len| {
            proptest::collection::vec((0..len, 1usize..4, any::<bool>()), 0..8).prop_map(move |cands| {
                let mut taken = vec![false; len];
                let mut spans = Vec::new();
                for (s, l, is_int) in cands {
                    let e = (s + l).min(len);
                    if (s..e).any(|i| taken[i]) {
                        continue;
                    }
                    (s..e).for_each(|i| taken[i] = true);
                    spans.push((Span::new(s, e), if is_int { Intervention } else { Outcome }));
                }
                spans.sort();
                (len, spans)
            })
        })
    }

    proptest! {
        #[test]
        fn encode_then_decode_is_identity((len, spans) in span_sets()) {
            prop_assert_eq!(decode_spans(&encode_spans(len, &spans)), spans);
        }

        #[test]
        fn decoded_spans_never_overlap(tags in proptest::collection::vec(0usize..5, 0..40)) {
            let tags: Vec<Tag> = tags.into_iter().map(|i| Tag::from_index(i).unwrap()).collect();
            let spans = decode_spans(&tags);
            for w in spans.windows(2) {
                prop_assert!(w[0].0.end <= w[1].0.start);
            }
            let covered: usize = spans.iter().map(|(s, _)| s.len()).sum();
            prop_assert_eq!(covered, tags.iter().filter(|t| **t != Tag::O).count());
        }
    }
}
