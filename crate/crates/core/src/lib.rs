//! One-class novelty detection over language embeddings and duration-budgeted
//! multi-list utterance selection.
//!
//! Three classifiers ([`ocsvm`], [`iforest`], [`dsvdd`]) score a pool of
//! utterances against a small target-language seed set; [`selection`] turns
//! the three rankings into a k-hour subset.

pub mod cli;
pub mod corpus;
pub mod dsvdd;
pub mod error;
pub mod evaluation;
pub mod iforest;
pub mod model;
pub mod numcore;
pub mod ocsvm;
pub mod selection;

pub use corpus::{Corpus, UtteranceRecord};
pub use error::{Error, ErrorKind, Result};
pub use model::{Classifier, SavedModel};
