use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FeatureError;

/// RNG stream reserved for dataset splitting.
const SPLIT_STREAM: u64 = 0x5350_4c49_54;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    /// Share of the (capped) training pool held back for checkpoint selection.
    pub validation_fraction: f64,
    pub train_cap: Option<usize>,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { test_fraction: 0.05, validation_fraction: 0.05, train_cap: None, seed: 0 }
    }
}

/// Row indices of each part, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` under the seed, takes the test part off the front, draws
/// the training pool (up to `train_cap`) from the remainder and carves the
/// validation slice off that pool.
pub fn split_dataset(n: usize, config: &SplitConfig) -> Result<DatasetSplit, FeatureError> {
    let frac_ok = |f: f64| f > 0.0 && f < 1.0;
    if !frac_ok(config.test_fraction) {
        return Err(FeatureError::Split(format!("test_fraction {} not in (0, 1)", config.test_fraction)));
    }
    if !frac_ok(config.validation_fraction) {
        return Err(FeatureError::Split(format!(
            "validation_fraction {} not in (0, 1)",
            config.validation_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SPLIT_STREAM);
    order.shuffle(&mut rng);

    let n_test = (n as f64 * config.test_fraction).round() as usize;
    let (test, pool) = order.split_at(n_test.min(n));
    let pool_len = match config.train_cap {
        Some(cap) if cap > pool.len() => {
            return Err(FeatureError::Split(format!("train_cap {cap} exceeds the {} non-test rows", pool.len())))
        }
        Some(cap) => cap,
        None => pool.len(),
    };
    let pool = &pool[..pool_len];
    let n_val = (pool_len as f64 * config.validation_fraction).round() as usize;
    let (validation, train) = pool.split_at(n_val.min(pool_len));

    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(DatasetSplit { train: sorted(train), validation: sorted(validation), test: sorted(test) })
}
