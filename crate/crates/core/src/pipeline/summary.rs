use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::features::TokenStats;
use crate::model::{EpochRecord, MetricsReport};
use crate::registerdata::PersonHistory;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHash {
    /// Relative to the experiment output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub persons_generated: usize,
    pub cohort_size: usize,
    pub base_move_hazard: f64,
    /// Share of all generated persons with a move after the split year.
    pub generated_mover_share: f64,
    /// Share of cohort members labelled as movers.
    pub cohort_prevalence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDescriptives {
    pub n: usize,
    pub age_mean: f64,
    pub age_sd: f64,
    pub female_share: f64,
    pub has_children_share: f64,
    pub income_percentile_mean: f64,
    /// Share with at least one residence change up to the split year.
    pub previous_mobility_share: f64,
    pub tokens_mean: f64,
    pub tokens_sd: f64,
}

/// Characteristics at the split year, by outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub movers: GroupDescriptives,
    pub non_movers: GroupDescriptives,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub p50: usize,
    pub p90: usize,
    pub p99: usize,
    pub max: usize,
    pub mean_movers: f64,
    pub mean_non_movers: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub vocabulary_size: usize,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub class_weights: [f64; 2],
    pub test: MetricsReport,
    /// Test AUPRC minus test prevalence.
    pub auprc_lift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSummary {
    pub points: usize,
    pub movers: usize,
    pub pca_components: usize,
    pub pca_explained_variance: f64,
    pub perplexity: f64,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub row_entropy_max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub population: PopulationSummary,
    pub descriptives: Descriptives,
    pub tokens: TokenSummaries,
    pub split: SplitSizes,
    /// Chance-level AUPRC: prevalence of the test split.
    pub prevalence_baseline: f64,
    pub models: ModelSummaries,
    pub projection: Option<ProjectionSummary>,
    pub artifacts: Vec<ArtifactHash>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSummaries {
    pub trajectory: TokenSummary,
    #[serde(rename = "static")]
    pub static_only: TokenSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummaries {
    pub trajectory: ModelSummary,
    #[serde(rename = "static")]
    pub static_only: ModelSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn share(flags: impl Iterator<Item = bool>) -> f64 {
    let (mut k, mut n) = (0usize, 0usize);
    for f in flags {
        n += 1;
        k += usize::from(f);
    }
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

fn group(histories: &[&PersonHistory], tokens: &[usize], split_year: i32) -> GroupDescriptives {
    let at_split: Vec<_> = histories.iter().filter_map(|h| h.up_to(split_year).last()).collect();
    let ages: Vec<f64> = at_split.iter().map(|r| r.age as f64).collect();
    let (age_mean, age_sd) = mean_sd(&ages);
    let incomes: Vec<f64> = at_split.iter().map(|r| r.income_percentile as f64).collect();
    let toks: Vec<f64> = tokens.iter().map(|&t| t as f64).collect();
    let (tokens_mean, tokens_sd) = mean_sd(&toks);
    GroupDescriptives {
        n: histories.len(),
        age_mean,
        age_sd,
        female_share: share(at_split.iter().map(|r| r.sex == "2")),
        has_children_share: share(at_split.iter().map(|r| r.child_status == "1")),
        income_percentile_mean: mean_sd(&incomes).0,
        previous_mobility_share: share(histories.iter().map(|h| {
            h.up_to(split_year).windows(2).any(|w| w[0].residence_municipality != w[1].residence_municipality)
        })),
        tokens_mean,
        tokens_sd,
    }
}

/// Per-outcome characteristics of the cohort. `histories`, `labels` and
/// `tokens` are aligned.
pub(crate) fn descriptives(histories: &[PersonHistory], labels: &[u8], tokens: &[usize], split_year: i32) -> Descriptives {
    let pick = |want: u8| -> (Vec<&PersonHistory>, Vec<usize>) {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == want).collect();
        (idx.iter().map(|&i| &histories[i]).collect(), idx.iter().map(|&i| tokens[i]).collect())
    };
    let (mh, mt) = pick(1);
    let (nh, nt) = pick(0);
    Descriptives { movers: group(&mh, &mt, split_year), non_movers: group(&nh, &nt, split_year) }
}

pub(crate) fn token_summary(counts: &[usize], labels: &[u8]) -> TokenSummary {
    let mut stats = TokenStats::default();
    counts.iter().for_each(|&c| stats.add(c));
    let by = |want: u8| {
        let xs: Vec<f64> = counts.iter().zip(labels).filter(|(_, &l)| l == want).map(|(&c, _)| c as f64).collect();
        mean_sd(&xs).0
    };
    TokenSummary {
        n: stats.len(),
        mean: stats.mean(),
        sd: stats.std_dev(),
        p50: stats.percentile(50.0).unwrap_or(0),
        p90: stats.percentile(90.0).unwrap_or(0),
        p99: stats.percentile(99.0).unwrap_or(0),
        max: stats.max().unwrap_or(0),
        mean_movers: by(1),
        mean_non_movers: by(0),
    }
}
