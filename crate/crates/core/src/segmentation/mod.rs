//! Token accounting and budgeted chunking of transcripts.

mod bpe;
mod chunk;

use std::path::Path;

use thiserror::Error;

pub use bpe::{learn_merges, write_merges, BpeCounter, PreTokenizer};
pub use chunk::{chunk, chunk_with, line_counts, Chunk, DEFAULT_TOKEN_BUDGET};

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("token counter configuration: {0}")]
    Config(String),
    #[error("token budget must be positive")]
    ZeroBudget,
    #[error("utterance {id} renders to {tokens} tokens, over the budget of {budget}")]
    OversizedUtterance { id: usize, tokens: usize, budget: usize },
}

/// Counts tokens in rendered transcript text.
///
/// `Words` is an offline approximation: one token per whitespace-separated
/// word plus one per punctuation mark. A word of punctuation alone counts only
/// its marks.
#[derive(Debug, Clone)]
pub enum TokenCounter {
    Bpe(BpeCounter),
    Words,
}

const BUNDLED_MERGES: &str = include_str!("../../fixtures/merges.txt");

impl TokenCounter {
    /// BPE over the merge table shipped with the crate, learned from
    /// synthetic meetings and the bundled puzzle text.
    pub fn bundled() -> Self {
        TokenCounter::Bpe(
            BpeCounter::from_merges(BUNDLED_MERGES, PreTokenizer::Gpt2).expect("bundled merge table is valid"),
        )
    }

    pub fn from_merges_file(path: &Path) -> Result<Self, SegmentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SegmentError::Config(format!("cannot read merge table {}: {e}", path.display())))?;
        Ok(TokenCounter::Bpe(BpeCounter::from_merges(&text, PreTokenizer::Gpt2)?))
    }

    pub fn count(&self, text: &str) -> usize {
        match self {
            TokenCounter::Bpe(bpe) => bpe.count(text),
            TokenCounter::Words => count_words(text),
        }
    }
}

fn count_words(text: &str) -> usize {
    text.split_whitespace()
        .map(|word| {
            let marks = word.chars().filter(|c| !c.is_alphanumeric()).count();
            usize::from(marks < word.chars().count()) + marks
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_counter_by_hand() {
        let c = TokenCounter::Words;
        assert_eq!(c.count(""), 0);
        assert_eq!(c.count("Alice: no red gems"), 5);
        assert_eq!(c.count("don't  stop!\n"), 4);
        assert_eq!(c.count("-- ok"), 3);
    }

    #[test]
    fn bundled_table_counts_fewer_tokens_than_bytes() {
        let c = TokenCounter::bundled();
        let text = "Alice: The octopus means none of the gems touch.\n";
        let n = c.count(text);
        assert!(n > 0 && n < text.len(), "{n}");
        assert_eq!(c.count(""), 0);
    }

    #[test]
    fn missing_merge_file_is_config_error() {
        let err = TokenCounter::from_merges_file(Path::new("/nonexistent/merges.txt")).unwrap_err();
        assert!(matches!(err, SegmentError::Config(_)));
    }
}
