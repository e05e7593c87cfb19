//! Detection and attribution of machine-generated text.
//!
//! The crate covers the full shallow-learning pipeline: corpus ingestion and
//! preprocessing ([`corpus`]), deterministic tokenization ([`textseg`]),
//! lexical-complexity features ([`stylometry`]), subword skip-gram embeddings
//! trained on the corpus itself ([`embeddings`]), from-scratch classifiers
//! ([`models`]), and an evaluation harness with a few-shot learning-curve
//! protocol ([`eval`]). [`pipeline`] ties featurization, training, and
//! persistence together; [`synth`] generates deterministic benchmark corpora
//! for harness experiments.

mod binio;

pub mod corpus;
pub mod embeddings;
pub mod eval;
pub mod models;
pub mod pipeline;
pub mod stylometry;
pub mod synth;
pub mod textseg;

/// Crate-wide error type.
///
/// `Io` is the only variant produced by operating-system failures; everything
/// else reports invalid inputs, formats, or undefined computations. The CLI
/// relies on this distinction for its exit-code contract.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Validation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("undefined feature: {0}")]
    UndefinedFeature(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("bad file format: {0}")]
    Format(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for operating-system I/O failures (unreadable file, full disk),
    /// false for content-level problems.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
