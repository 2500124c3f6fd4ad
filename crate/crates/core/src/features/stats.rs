use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Default token counter: whitespace-separated words.
pub fn whitespace_token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Exact histogram of per-document token counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    histogram: BTreeMap<usize, usize>,
    n: usize,
}

pub fn token_length_stats<S, F>(corpus: &[S], tokenizer: F) -> TokenStats
where
    S: AsRef<str>,
    F: Fn(&str) -> usize,
{
    let mut stats = TokenStats::default();
    for doc in corpus {
        stats.add(tokenizer(doc.as_ref()));
    }
    stats
}

impl TokenStats {
    pub fn add(&mut self, count: usize) {
        *self.histogram.entry(count).or_default() += 1;
        self.n += 1;
    }

    pub fn histogram(&self) -> &BTreeMap<usize, usize> {
        &self.histogram
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Nearest-rank percentile: the smallest count `c` such that at least
    /// `p`% of documents have at most `c` tokens. `None` on an empty corpus.
    pub fn percentile(&self, p: f64) -> Option<usize> {
        if self.n == 0 {
            return None;
        }
        let rank = ((p.clamp(0.0, 100.0) / 100.0) * self.n as f64).ceil().max(1.0) as usize;
        let mut cum = 0;
        for (&c, &k) in &self.histogram {
            cum += k;
            if cum >= rank {
                return Some(c);
            }
        }
        self.histogram.keys().next_back().copied()
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.histogram.iter().map(|(&c, &k)| (c * k) as f64).sum::<f64>() / self.n as f64
    }

    /// Sample standard deviation (n - 1 denominator).
    pub fn std_dev(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let ss: f64 = self.histogram.iter().map(|(&c, &k)| k as f64 * (c as f64 - m).powi(2)).sum();
        (ss / (self.n - 1) as f64).sqrt()
    }

    pub fn max(&self) -> Option<usize> {
        self.histogram.keys().next_back().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_document() {
        let s = token_length_stats(&["one two three four five six seven eight nine ten"], whitespace_token_count);
        assert_eq!(s.percentile(99.0), Some(10));
        assert_eq!(s.percentile(0.0), Some(10));
        assert_eq!(s.mean(), 10.0);
    }

    #[test]
    fn nearest_rank_values() {
        let mut s = TokenStats::default();
        for c in 1..=100 {
            s.add(c);
        }
        assert_eq!(s.percentile(99.0), Some(99));
        assert_eq!(s.percentile(50.0), Some(50));
        assert_eq!(s.percentile(100.0), Some(100));
        assert!((s.std_dev() - 29.011491975882016).abs() < 1e-12);
        assert_eq!(TokenStats::default().percentile(50.0), None);
    }

    proptest! {
        #[test]
        fn percentile_monotone(counts in prop::collection::vec(0usize..500, 1..200), p in 0.0f64..100.0, q in 0.0f64..100.0) {
            let mut s = TokenStats::default();
            for c in counts {
                s.add(c);
            }
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            prop_assert!(s.percentile(lo) <= s.percentile(hi));
        }
    }
}
