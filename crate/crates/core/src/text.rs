//! Whitespace-and-punctuation tokenization.

use crate::corpus::Document;
use crate::error::Result;

fn is_edge_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Character offsets of tokens in `text`. Whitespace separates tokens and
/// leading/trailing punctuation is split off one character at a time, so
/// `"(8%,"` becomes `(`, `8`, `%`, `,`.
pub fn tokenize(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let (mut s, mut e) = (start, i);
        let mut tail = Vec::new();
        while s < e && is_edge_punct(chars[s]) {
            out.push((s, s + 1));
            s += 1;
        }
        while e > s && is_edge_punct(chars[e - 1]) {
            tail.push((e - 1, e));
            e -= 1;
        }
        if s < e {
            out.push((s, e));
        }
        out.extend(tail.into_iter().rev());
    }
    out
}

pub fn tokenize_words(text: &str) -> Vec<&str> {
    let byte_at: Vec<usize> = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .collect();
    tokenize(text)
        .into_iter()
        .map(|(s, e)| &text[byte_at[s]..byte_at[e]])
        .collect()
}

/// Builds a document from pre-split sentences joined by single spaces.
/// Sentences with no tokens are dropped.
pub fn document_from_sentences(doc_id: &str, sentences: &[String]) -> Result<Document> {
    let mut text = String::new();
    let mut offsets = Vec::new();
    let mut ranges = Vec::new();
    for sentence in sentences {
        let toks = tokenize(sentence);
        if toks.is_empty() {
            continue;
        }
        if !text.is_empty() {
            text.push(' ');
        }
        let base = text.chars().count();
        let first = offsets.len();
        offsets.extend(toks.iter().map(|(s, e)| (s + base, e + base)));
        ranges.push((first, offsets.len()));
        text.push_str(sentence);
    }
    Document::new(doc_id, text, &offsets, &ranges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_edge_punctuation() {
        let words = tokenize_words("reducing low birth weight (8% vs. 11%, P = 0.4).");
        assert_eq!(
            words,
            vec!["reducing", "low", "birth", "weight", "(", "8", "%", "vs", ".", "11", "%", ",", "P", "=", "0.4", ")", "."]
        );
        assert_eq!(tokenize_words("  "), Vec::<&str>::new());
        assert_eq!(tokenize_words("pre-term"), vec!["pre-term"]);
    }

    #[test]
    fn builds_documents() {
        let d = document_from_sentences("d", &["Aspirin helps.".into(), "".into(), "Done.".into()]).unwrap();
        assert_eq!(d.num_sentences(), 2);
        assert_eq!(d.text(), "Aspirin helps. Done.");
        assert_eq!(d.sentence_text(1), "Done.");
        assert_eq!(d.tokens()[3].text, "Done");
    }
}
