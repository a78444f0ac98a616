//! Extraction of intervention, comparator, outcome and effect-direction
//! relations from clinical trial abstracts.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod extraction;
pub mod features;
pub mod inference;
pub mod linking;
pub mod nn;
pub mod pipeline;
pub mod supervision;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
