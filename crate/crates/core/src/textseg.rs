//! Deterministic word tokenization and sentence segmentation over cleaned
//! text.
//!
//! The rules are fixed so every downstream count is reproducible: words are
//! whitespace-separated pieces with surrounding punctuation stripped and
//! case folded; sentences end after maximal runs of `.`, `!`, `?`.

/// Characters that end a sentence.
pub const SENTENCE_TERMINATORS: [char; 3] = ['.', '!', '?'];

/// Ordered lowercase word tokens of one text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Ordered sentence strings of one text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSegmentation {
    pub sentences: Vec<String>,
}

impl SentenceSegmentation {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Splits on whitespace, strips leading/trailing non-alphanumeric characters
/// from each piece, lowercases, and drops pieces that become empty.
///
/// Interior punctuation survives, so "don't" stays one token.
pub fn tokenize_words(clean_text: &str) -> TokenSequence {
    let tokens = clean_text
        .split_whitespace()
        .filter_map(|piece| {
            let trimmed = piece.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.chars().flat_map(char::to_lowercase).collect())
            }
        })
        .collect();
    TokenSequence { tokens }
}

/// Splits after maximal runs of sentence terminators, trims each piece, and
/// drops empty pieces. A trailing piece without a terminator is one sentence.
pub fn split_sentences(clean_text: &str) -> SentenceSegmentation {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = clean_text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        let run_ends = SENTENCE_TERMINATORS.contains(&c)
            && chars.peek().is_none_or(|n| !SENTENCE_TERMINATORS.contains(n));
        if run_ends {
            push_trimmed(&mut sentences, &current);
            current.clear();
        }
    }
    push_trimmed(&mut sentences, &current);
    SentenceSegmentation { sentences }
}

fn push_trimmed(sentences: &mut Vec<String>, piece: &str) {
    let trimmed = piece.trim();
    if !trimmed.is_empty() {
        sentences.push(trimmed.to_string());
    }
}
