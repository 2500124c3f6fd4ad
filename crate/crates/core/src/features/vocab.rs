use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{ngrams, tokenize, CsrMatrix, FeatureError, SparseVector};
use crate::scalar::Real;

pub const DEFAULT_MAX_FEATURES: usize = 300_000;

/// Retained n-grams with their document frequencies. Feature indices follow
/// lexicographic n-gram order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    ngram_range: (usize, usize),
    max_features: usize,
    n_documents: u64,
    terms: Vec<String>,
    df: Vec<u64>,
    index: HashMap<String, u32>,
}

fn document_ngrams(text: &str, range: (usize, usize)) -> HashSet<String> {
    ngrams(&tokenize(text), range).into_iter().collect()
}

/// Counts document frequencies and keeps the `max_features` most frequent
/// n-grams, ties broken lexicographically.
pub fn fit_vocabulary<S: AsRef<str> + Sync>(
    corpus: &[S],
    ngram_range: (usize, usize),
    max_features: usize,
) -> Result<Vocabulary, FeatureError> {
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let (lo, hi) = ngram_range;
    if lo == 0 || lo > hi {
        return Err(FeatureError::NgramRange(lo, hi));
    }
    let counts: HashMap<String, u64> = corpus
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<String, u64>, doc| {
            for g in document_ngrams(doc.as_ref(), ngram_range) {
                *acc.entry(g).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, std::mem::take(&mut a)) };
            for (k, v) in small {
                *big.entry(k).or_default() += v;
            }
            big
        });
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.par_sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_features);
    ranked.par_sort_unstable_by(|a, b| a.0.cmp(&b.0));
    Ok(Vocabulary::from_parts(ngram_range, max_features, corpus.len() as u64, ranked))
}

impl Vocabulary {
    fn from_parts(
        ngram_range: (usize, usize),
        max_features: usize,
        n_documents: u64,
        sorted: Vec<(String, u64)>,
    ) -> Vocabulary {
        let (terms, df): (Vec<String>, Vec<u64>) = sorted.into_iter().unzip();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocabulary { ngram_range, max_features, n_documents, terms, df, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_documents(&self) -> u64 {
        self.n_documents
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        self.ngram_range
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn get(&self, ngram: &str) -> Option<u32> {
        self.index.get(ngram).copied()
    }

    pub fn term(&self, index: u32) -> &str {
        &self.terms[index as usize]
    }

    pub fn df(&self, index: u32) -> u64 {
        self.df[index as usize]
    }

    /// `(ngram, df)` in index order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.terms.iter().map(String::as_str).zip(self.df.iter().copied())
    }

    /// Smoothed inverse document frequency `ln((1+N)/(1+df)) + 1`.
    pub fn idf(&self, index: u32) -> f64 {
        let n = self.n_documents as f64;
        ((1.0 + n) / (1.0 + self.df(index) as f64)).ln() + 1.0
    }

    /// TSV form: a `#` header line with the corpus size and settings, then
    /// `ngram<TAB>index<TAB>df` rows.
    pub fn to_tsv(&self) -> String {
        let mut out = String::with_capacity(self.terms.len() * 24);
        let (lo, hi) = self.ngram_range;
        let _ = writeln!(
            out,
            "# n_documents={} ngram_min={lo} ngram_max={hi} max_features={}",
            self.n_documents, self.max_features
        );
        for (i, (t, df)) in self.entries().enumerate() {
            let _ = writeln!(out, "{t}\t{i}\t{df}");
        }
        out
    }

    /// Hex SHA-256 of [`Vocabulary::to_tsv`].
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_tsv().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        fs::write(path, self.to_tsv()).map_err(|source| FeatureError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Vocabulary, FeatureError> {
        let text = fs::read_to_string(path).map_err(|source| FeatureError::Io { path: path.to_path_buf(), source })?;
        Self::from_tsv(&text).map_err(|(line, message)| FeatureError::Parse { path: path.to_path_buf(), line, message })
    }

    pub fn from_tsv(text: &str) -> Result<Vocabulary, (usize, String)> {
        let mut lines = text.lines();
        let header = lines.next().ok_or((1, "empty vocabulary file".to_string()))?;
        let settings: BTreeMap<&str, &str> = header
            .strip_prefix('#')
            .ok_or((1, "missing header line".to_string()))?
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let num = |key: &str| -> Result<u64, (usize, String)> {
            settings
                .get(key)
                .ok_or((1, format!("header lacks {key}")))?
                .parse()
                .map_err(|e| (1, format!("{key}: {e}")))
        };
        let n_documents = num("n_documents")?;
        let range = (num("ngram_min")? as usize, num("ngram_max")? as usize);
        let max_features = num("max_features")? as usize;
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let mut cols = line.split('\t');
            let (Some(term), Some(idx), Some(df), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
                return Err((lineno, "expected ngram, index, df".to_string()));
            };
            let idx: usize = idx.parse().map_err(|e| (lineno, format!("index: {e}")))?;
            let df: u64 = df.parse().map_err(|e| (lineno, format!("df: {e}")))?;
            if idx != rows.len() {
                return Err((lineno, format!("index {idx} out of sequence")));
            }
            if df == 0 || df > n_documents {
                return Err((lineno, format!("df {df} outside [1, {n_documents}]")));
            }
            rows.push((term.to_string(), df));
        }
        if rows.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err((1, "n-grams are not in strictly increasing order".to_string()));
        }
        Ok(Vocabulary::from_parts(range, max_features, n_documents, rows))
    }
}

/// Sublinear tf (`1 + ln tf`) times idf, L2-normalised. Out-of-vocabulary
/// n-grams are dropped; a text without known n-grams gives the zero vector.
pub fn transform<T: Real>(text: &str, vocab: &Vocabulary) -> SparseVector<T> {
    let mut tf: BTreeMap<u32, u32> = BTreeMap::new();
    for g in ngrams(&tokenize(text), vocab.ngram_range) {
        if let Some(i) = vocab.get(&g) {
            *tf.entry(i).or_default() += 1;
        }
    }
    let weights: Vec<(u32, f64)> = tf.into_iter().map(|(i, c)| (i, (1.0 + (c as f64).ln()) * vocab.idf(i))).collect();
    let norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    let (indices, values) = weights.into_iter().map(|(i, w)| (i, T::of(w / norm))).unzip();
    SparseVector::from_sorted(indices, values)
}

pub fn transform_corpus<T: Real, S: AsRef<str> + Sync>(corpus: &[S], vocab: &Vocabulary) -> CsrMatrix<T> {
    let rows: Vec<SparseVector<T>> = corpus.par_iter().map(|t| transform(t.as_ref(), vocab)).collect();
    CsrMatrix::from_rows(vocab.len(), &rows)
}
