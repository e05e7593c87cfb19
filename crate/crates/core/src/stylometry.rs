//! The four lexical-complexity measures: average word length, average
//! sentence length, vocabulary richness, and repetition rate.
//!
//! Lengths are measured in Unicode code points. Sentence length includes
//! internal spaces and punctuation of the trimmed sentence. All measures are
//! undefined on empty inputs and reported as errors rather than silent zeros,
//! which would corrupt training.

use std::collections::HashMap;

use crate::corpus::{preprocess, Document, PreprocessMode};
use crate::textseg::{split_sentences, tokenize_words, SentenceSegmentation, TokenSequence};
use crate::{Error, Result};

/// The four measures plus the counts they are derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StyloFeatures {
    /// Average word length, chars per word.
    pub awl: f64,
    /// Average sentence length, chars per sentence.
    pub asl: f64,
    /// Vocabulary richness: distinct types over token count.
    pub vr: f64,
    /// Repetition rate: types occurring more than once, over token count.
    pub rr: f64,
    /// Token count.
    pub n: usize,
    /// Sentence count.
    pub m: usize,
    /// Distinct token types.
    pub unique_types: usize,
    /// Types with occurrence count >= 2.
    pub repeated_types: usize,
}

impl StyloFeatures {
    /// The measures as a fixed-order vector `[awl, asl, vr, rr]`.
    pub fn values(&self) -> [f64; 4] {
        [self.awl, self.asl, self.vr, self.rr]
    }

    pub const NAMES: [&'static str; 4] = ["awl", "asl", "vr", "rr"];
}

/// Mean token length in code points.
pub fn awl(tokens: &TokenSequence) -> Result<f64> {
    if tokens.is_empty() {
        return Err(Error::UndefinedFeature("awl of empty token sequence".into()));
    }
    let total: usize = tokens.tokens.iter().map(|t| t.chars().count()).sum();
    Ok(total as f64 / tokens.len() as f64)
}

/// Mean sentence length in code points, internal spaces included.
pub fn asl(sentences: &SentenceSegmentation) -> Result<f64> {
    if sentences.is_empty() {
        return Err(Error::UndefinedFeature("asl of empty segmentation".into()));
    }
    let total: usize = sentences.sentences.iter().map(|s| s.chars().count()).sum();
    Ok(total as f64 / sentences.len() as f64)
}

/// Distinct types over token count; in (0, 1].
pub fn vr(tokens: &TokenSequence) -> Result<f64> {
    if tokens.is_empty() {
        return Err(Error::UndefinedFeature("vr of empty token sequence".into()));
    }
    Ok(type_counts(tokens).len() as f64 / tokens.len() as f64)
}

/// Types occurring at least twice, over token count; in [0, 0.5].
pub fn rr(tokens: &TokenSequence) -> Result<f64> {
    if tokens.is_empty() {
        return Err(Error::UndefinedFeature("rr of empty token sequence".into()));
    }
    let repeated = type_counts(tokens).values().filter(|&&c| c >= 2).count();
    Ok(repeated as f64 / tokens.len() as f64)
}

fn type_counts(tokens: &TokenSequence) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for tok in &tokens.tokens {
        *counts.entry(tok.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Computes all four measures from a token sequence and segmentation.
pub fn compute(tokens: &TokenSequence, sentences: &SentenceSegmentation) -> Result<StyloFeatures> {
    let counts = type_counts(tokens);
    let unique_types = counts.len();
    let repeated_types = counts.values().filter(|&&c| c >= 2).count();
    Ok(StyloFeatures {
        awl: awl(tokens)?,
        asl: asl(sentences)?,
        vr: unique_types as f64 / tokens.len() as f64,
        rr: repeated_types as f64 / tokens.len() as f64,
        n: tokens.len(),
        m: sentences.len(),
        unique_types,
        repeated_types,
    })
}

/// Preprocesses, segments, and measures one document. The error names the
/// document when the cleaned text has no tokens or sentences.
pub fn feature_row(doc: &Document, mode: PreprocessMode) -> Result<StyloFeatures> {
    let clean = preprocess(&doc.raw_text, mode);
    let tokens = tokenize_words(&clean);
    let sentences = split_sentences(&clean);
    if tokens.is_empty() || sentences.is_empty() {
        return Err(Error::UndefinedFeature(format!(
            "document '{}' has no tokens or sentences after {} preprocessing",
            doc.id, mode
        )));
    }
    compute(&tokens, &sentences)
}
