//! Classification of software requirements into functional and
//! non-functional categories under heavy class imbalance.
//!
//! The pipeline is: load a labelled corpus ([`corpus`]), vectorize with
//! TF-IDF ([`vectorizer`]), optionally rebalance the training split
//! ([`resampler`]), fit a classifier ([`models`]) and score it
//! ([`evaluation`]). [`harness`] runs the whole thing under stratified
//! cross-validation without leaking held-out rows into any fitted step.


pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod harness;

pub mod models;
pub mod resampler;
mod sparse;
pub mod vectorizer;

pub use corpus::{Dataset, Label, RequirementRecord};
pub use error::{Error, Result};
pub use models::{ModelSpec, TrainedModel};
pub use resampler::ResampleMode;
pub use vectorizer::{FeatureMatrix, Vocabulary};
