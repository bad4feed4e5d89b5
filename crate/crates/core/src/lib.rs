//! Text-based attention indices built from token selection matrices.
//!
//! A [`SelectionMatrix`] picks the documents that contain at least one
//! active token in every non-empty dimension; the share of selected
//! documents per time bucket is the attention index. [`evolve`] searches
//! for the matrix whose index best explains a target series under a
//! penalized least-squares objective, and [`synthlab`] builds corpora with
//! a known answer to check that search against.
//!
//! ```
//! use optidx::{build_corpus, attention_series, SelectionMatrix, Vocabulary};
//!
//! let vocab = Vocabulary::new(["economy", "policy", "uncertain"]).unwrap();
//! let docs = vec![
//!     ("2000-01".to_string(), vec!["economy", "policy", "uncertain"]),
//!     ("2000-01".to_string(), vec!["economy"]),
//!     ("2000-02".to_string(), vec!["uncertain", "economy", "policy"]),
//! ];
//! let (corpus, _) = build_corpus(docs, vocab.clone()).unwrap();
//! let omega = SelectionMatrix::from_tokens(&vocab, &[vec!["economy"], vec!["policy"], vec!["uncertain"]]).unwrap();
//! assert_eq!(attention_series(&omega, &corpus).unwrap().values, vec![0.5, 1.0]);
//! ```

pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evolve;
pub mod objective;
mod postings;
pub mod rng;
pub mod selection;
pub mod synthlab;

pub use corpus::{build_corpus, Document, TimeBucketedCorpus, TokenId, Vocabulary, WindowSplit};
pub use error::{Error, Result};
pub use objective::{score_matrix, standardize_target, FitnessRecord, PenaltyConfig, TargetSeries};
pub use selection::{attention_series, is_selected, SelectionMatrix};
