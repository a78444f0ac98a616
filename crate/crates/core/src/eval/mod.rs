//! Evaluation metrics.

pub mod clustering;
pub mod extraction;
pub mod prf;
pub mod relations;
pub mod report;

pub use clustering::{b_cubed, ceaf_e, muc};
pub use extraction::{entity_prf, entity_prf_corpus, evidence_prf, token_prf, SpanMatch, TypedPrf};
pub use prf::Prf;
pub use relations::{direction_prf, linking_accuracy, relation_prf, DirectionScores, LinkRecord, LinkingAccuracy, RelationMode};
pub use report::{evaluate, render_table, EvalInputs, Metrics};
