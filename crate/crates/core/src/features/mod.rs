//! TF-IDF features over rendered trajectory texts, token-length statistics
//! and the train/validation/test split.

mod sparse;
mod split;
mod stats;
mod vocab;

use std::path::PathBuf;

use thiserror::Error;

pub use sparse::{read_triplets, write_triplets, CsrMatrix, SparseVector};
pub use split::{split_dataset, DatasetSplit, SplitConfig};
pub use stats::{token_length_stats, whitespace_token_count, TokenStats};
pub use vocab::{fit_vocabulary, transform, transform_corpus, Vocabulary, DEFAULT_MAX_FEATURES};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot fit a vocabulary on an empty corpus")]
    EmptyCorpus,
    #[error("invalid n-gram range ({0}, {1})")]
    NgramRange(usize, usize),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("split: {0}")]
    Split(String),
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// All n-grams with `lo <= n <= hi`, tokens joined by a single space.
pub fn ngrams(tokens: &[String], (lo, hi): (usize, usize)) -> Vec<String> {
    let mut out = Vec::new();
    for n in lo..=hi {
        if n == 0 || n > tokens.len() {
            continue;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}
