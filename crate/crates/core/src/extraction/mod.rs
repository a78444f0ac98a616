//! Mention tagging and evidence sentence classification.

pub mod bio;
pub mod crf;
pub mod evidence;
pub mod tagger;
pub mod tagset;

pub use evidence::{classify_sentences, train_evidence_classifier, EvidenceClassifier, EvidenceConfig, SentenceSample};
pub use tagger::{predict_mentions, train_tagger, TaggerConfig, TaggerModel};
pub use tagset::{Tag, TagSet};
