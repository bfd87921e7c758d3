//! Benchmark toolkit for predicting next-year corporate bankruptcy from the
//! MD&A section of annual reports.
//!
//! The crate covers the whole path from raw filings to ranked predictions:
//!
//! * [`corpus`]: report/bankruptcy records, JSONL ingestion and a synthetic
//!   corpus generator with a planted distress signal.
//! * [`sampling`]: firm-year instances with leakage-safe prediction windows
//!   and the temporal train/validation/test segmentation.
//! * [`textprep`] and [`features`]: preprocessing, vocabularies, binary and
//!   TF-IDF unigram+bigram features, chi-squared selection.
//! * [`linear`], [`embeddings`], [`neural`]: logistic regression, skip-gram
//!   word vectors and the feed-forward head trained with Adam.
//! * [`metrics`]: AUC, average precision, recall@k, CAP ratio and cumulative
//!   decile ranks.
//! * [`harness`]: pipelines, hyperparameter search and full experiments.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the double-precision variants used by the harness.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod features;
pub mod harness;
pub mod linear;
pub mod metrics;
pub mod neural;
pub mod sampling;
pub mod scalar;
pub mod textprep;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type LogisticModel64 = linear::LogisticModel<f64>;
pub type LogisticModel32 = linear::LogisticModel<f32>;
pub type MlpModel64 = neural::MlpModel<f64>;
pub type MlpModel32 = neural::MlpModel<f32>;
pub type AdamState64 = neural::AdamState<f64>;
pub type SkipGramModel64 = embeddings::SkipGramModel<f64>;
pub type SkipGramModel32 = embeddings::SkipGramModel<f32>;
pub type SparseVector64 = features::SparseVector<f64>;
pub type RankedPredictions64 = metrics::RankedPredictions<f64>;
