//! Evaluation toolkit for topic-model runs.
//!
//! The crate ingests corpora, topic-model runs and sentence embeddings through
//! neutral file formats ([`interchange`]), scores runs with a suite of balance,
//! n-gram, coherence and stability metrics ([`metrics`], [`stability`]), keeps
//! an append-only store of evaluated runs ([`rundb`]) for cross-run statistics
//! ([`stats`]), and ships a deterministic anchor-sentence topic model
//! ([`anchor`]) whose output is scored with the same machinery.

pub mod anchor;
pub mod cli;
pub mod error;
pub mod interchange;
pub mod metrics;
pub mod rundb;
pub mod stability;
pub mod stats;
pub mod textproc;

pub use error::{Error, Result};
pub use interchange::{Corpus, EmbeddingMatrix, RunRecord, Sentence, Source, TopicRecord};
pub use metrics::MetricReport;
