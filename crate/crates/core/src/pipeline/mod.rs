//! Stage functions shared by the command-line subcommands and the
//! end-to-end experiment, plus the file formats that pass between stages.

mod config;
mod experiment;
mod summary;

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codebook::{Codebook, CodebookError, LookupMode};
use crate::features::{
    fit_vocabulary, read_triplets, transform_corpus, write_triplets, CsrMatrix, DatasetSplit, FeatureError, Vocabulary,
};
use crate::model::{classification_metrics, predict_proba, LinearModel, MetricsReport, ModelError};
use crate::project::{pca_fit, tsne, DenseMatrix, ProjectError, Projection2D, TsneConfig};
use crate::registerdata::{cohort_filter, ConfigError, LoadError, PersonHistory};
use crate::textualize::{render, DatasetError, DatasetRow, RenderedTrajectory, TemplateError, TemplateSet};
use crate::trajectory::{build_labeled, BuildOptions, LabeledTrajectory, TrajectoryError};

pub use config::{BuildConfig, EvaluationConfig, ExperimentConfig, FeatureConfig, PathsConfig, ProjectionConfig, SplitParams};
pub use experiment::run_experiment;
pub use summary::{
    ArtifactHash, Descriptives, ExperimentSummary, GroupDescriptives, ModelSummaries, ModelSummary, PopulationSummary,
    ProjectionSummary, SplitSizes, TokenSummaries, TokenSummary, SUMMARY_SCHEMA_VERSION,
};

pub const METRICS_SCHEMA_VERSION: u32 = 1;
/// RNG stream reserved for the projection subsample.
const PROJECTION_STREAM: u64 = 0x5052_4f4a;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Project(#[from] ProjectError),
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: io::Error) -> PipelineError {
        PipelineError::Io { path: path.to_path_buf(), source }
    }

    /// Bad input or configuration, as opposed to a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            PipelineError::Config(_)
                | PipelineError::Validation(_)
                | PipelineError::Parse { .. }
                | PipelineError::Load(LoadError::Validation(_))
                | PipelineError::Trajectory(TrajectoryError::Codebook { .. })
        )
    }
}

pub fn load_codebook(dir: Option<&Path>) -> Result<Codebook, PipelineError> {
    Ok(match dir {
        Some(d) => Codebook::load_dir(d)?,
        None => Codebook::bundled(),
    })
}

pub fn load_templates(path: Option<&Path>) -> Result<TemplateSet, PipelineError> {
    Ok(match path {
        Some(p) => TemplateSet::load(p)?,
        None => TemplateSet::bundled(),
    })
}

impl BuildConfig {
    pub fn options(&self) -> BuildOptions {
        BuildOptions { lookup: LookupMode { lenient: self.lenient_codes, harmonize: self.harmonize }, strict_codes: self.strict_codes }
    }
}

/// Cohort filter, then a labelled trajectory per retained person, in input
/// order. The first failing person aborts the build.
pub fn build_corpus(
    histories: &[PersonHistory],
    book: &Codebook,
    split_year: i32,
    opts: BuildOptions,
    static_only: bool,
) -> Result<Vec<LabeledTrajectory>, PipelineError> {
    let cohort = cohort_filter(histories, split_year);
    let built: Result<Vec<_>, _> =
        cohort.par_iter().map(|h| build_labeled(h, book, split_year, opts, static_only)).collect();
    Ok(built?)
}

pub fn render_corpus(items: &[LabeledTrajectory], templates: &TemplateSet) -> Result<Vec<RenderedTrajectory>, PipelineError> {
    let rendered: Result<Vec<_>, _> = items.par_iter().map(|t| render(t, templates)).collect();
    Ok(rendered?)
}

pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), PipelineError> {
    let io = |e| PipelineError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let file = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| PipelineError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(|e| PipelineError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Parse { path: path.to_path_buf(), line: e.line(), message: e.to_string() })
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let mut f = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| PipelineError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// TF-IDF matrices for one split, with the vocabulary fitted on the
/// training part only.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub vocabulary: Vocabulary,
    pub train: (CsrMatrix<f64>, Vec<u8>),
    pub validation: (CsrMatrix<f64>, Vec<u8>),
    pub test: (CsrMatrix<f64>, Vec<u8>),
}

pub const FEATURE_PARTS: [&str; 3] = ["train", "validation", "test"];

pub fn vectorize(rows: &[DatasetRow], split: &DatasetSplit, cfg: &FeatureConfig) -> Result<FeatureSet, PipelineError> {
    if let Some(&i) = split.train.iter().chain(&split.validation).chain(&split.test).find(|&&i| i >= rows.len()) {
        return Err(PipelineError::Validation(format!("split index {i} out of range for {} rows", rows.len())));
    }
    let texts = |idx: &[usize]| idx.iter().map(|&i| rows[i].text.as_str()).collect::<Vec<_>>();
    let labels = |idx: &[usize]| idx.iter().map(|&i| rows[i].label).collect::<Vec<_>>();
    let vocabulary = fit_vocabulary(&texts(&split.train), (cfg.ngram_min, cfg.ngram_max), cfg.max_features)?;
    let part = |idx: &[usize]| (transform_corpus(&texts(idx), &vocabulary), labels(idx));
    Ok(FeatureSet {
        train: part(&split.train),
        validation: part(&split.validation),
        test: part(&split.test),
        vocabulary,
    })
}

pub fn write_labels(labels: &[u8], path: &Path) -> Result<(), PipelineError> {
    let mut text = String::with_capacity(labels.len() * 2);
    for l in labels {
        text.push(char::from(b'0' + l));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(PipelineError::Parse { path: path.to_path_buf(), line: i + 1, message: format!("label {other:?}") }),
        })
        .collect()
}

impl FeatureSet {
    /// `vocabulary.tsv` plus `<part>.triplets` and `<part>.labels` per part.
    pub fn write_dir(&self, dir: &Path) -> Result<(), PipelineError> {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        self.vocabulary.save(&dir.join("vocabulary.tsv"))?;
        for (name, (x, y)) in FEATURE_PARTS.iter().zip([&self.train, &self.validation, &self.test]) {
            write_triplets(x, &dir.join(format!("{name}.triplets")))?;
            write_labels(y, &dir.join(format!("{name}.labels")))?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<FeatureSet, PipelineError> {
        let vocabulary = Vocabulary::load(&dir.join("vocabulary.tsv"))?;
        let read = |name: &str| -> Result<(CsrMatrix<f64>, Vec<u8>), PipelineError> {
            let x = read_triplets(&dir.join(format!("{name}.triplets")))?;
            let y = read_labels(&dir.join(format!("{name}.labels")))?;
            if x.n_rows() != y.len() {
                return Err(PipelineError::Validation(format!("{name}: {} feature rows but {} labels", x.n_rows(), y.len())));
            }
            Ok((x, y))
        };
        Ok(FeatureSet { train: read("train")?, validation: read("validation")?, test: read("test")?, vocabulary })
    }

    pub fn part(&self, name: &str) -> Option<&(CsrMatrix<f64>, Vec<u8>)> {
        match name {
            "train" => Some(&self.train),
            "validation" => Some(&self.validation),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// Metrics file shared with other implementations: the metric fields at
/// top level next to `schema_version`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

impl MetricsDocument {
    pub fn new(dataset: Option<&str>, metrics: MetricsReport) -> MetricsDocument {
        MetricsDocument { schema_version: METRICS_SCHEMA_VERSION, dataset: dataset.map(str::to_string), metrics }
    }
}

/// Probabilities and metrics of a model on one labelled matrix.
pub fn evaluate(
    model: &LinearModel<f64>,
    x: &CsrMatrix<f64>,
    labels: &[u8],
    threshold: f64,
) -> Result<(Vec<f64>, MetricsReport), PipelineError> {
    let p = predict_proba(model, x)?;
    let m = classification_metrics(&p, labels, threshold)?;
    Ok((p, m))
}

/// `score,label` CSV, the format of the shared metric fixtures.
pub fn write_scores_csv(scores: &[f64], labels: &[u8], path: &Path) -> Result<(), PipelineError> {
    let io = |e| PipelineError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "score,label").map_err(io)?;
    for (s, l) in scores.iter().zip(labels) {
        writeln!(w, "{s:?},{l}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_scores_csv(path: &Path) -> Result<(Vec<f64>, Vec<u8>), PipelineError> {
    let parse = |line: usize, message: String| PipelineError::Parse { path: path.to_path_buf(), line, message };
    let mut r = csv::Reader::from_reader(File::open(path).map_err(|e| PipelineError::io(path, e))?);
    let headers = r.headers().map_err(|e| parse(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| parse(1, format!("missing column {name:?}")));
    let (si, li) = (col("score")?, col("label")?);
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse(i + 2, e.to_string()))?;
        let s: f64 = rec[si].trim().parse().map_err(|e| parse(i + 2, format!("score {:?}: {e}", &rec[si])))?;
        let l = match rec[li].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(parse(i + 2, format!("label {other:?} is not 0 or 1"))),
        };
        scores.push(s);
        labels.push(l);
    }
    Ok((scores, labels))
}

/// Outcome of projecting a labelled sample.
#[derive(Debug, Clone)]
pub struct ProjectionRun {
    pub projection: Projection2D<f64>,
    /// Row indices (into the input matrix) of the projected points.
    pub rows: Vec<usize>,
    pub pca_components: usize,
    pub explained_variance: f64,
    pub initial_kl: f64,
    pub row_entropy_max_error: f64,
}

/// Draws up to `sample_size` rows under `seed`, reduces them with PCA and
/// embeds them with t-SNE. Columns that are zero throughout the sample are
/// dropped before the PCA, which leaves the principal subspace unchanged.
pub fn project_sample(
    x: &CsrMatrix<f64>,
    labels: &[u8],
    sample_size: usize,
    pca_components: usize,
    tsne_cfg: &TsneConfig,
    seed: u64,
) -> Result<ProjectionRun, PipelineError> {
    let mut rows: Vec<usize> = (0..x.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PROJECTION_STREAM);
    rows.shuffle(&mut rng);
    rows.truncate(sample_size);
    rows.sort_unstable();
    let sample = x.select_rows(&rows);
    let mut used = vec![false; x.n_cols()];
    for r in sample.rows() {
        r.indices.iter().for_each(|&j| used[j as usize] = true);
    }
    let col_map: Vec<Option<usize>> = used
        .iter()
        .scan(0usize, |next, &u| {
            Some(if u {
                *next += 1;
                Some(*next - 1)
            } else {
                None
            })
        })
        .collect();
    let d = used.iter().filter(|&&u| u).count();
    let mut dense = DenseMatrix::zeros(sample.n_rows(), d);
    for (i, r) in sample.rows().enumerate() {
        let out = dense.row_mut(i);
        for (&j, &v) in r.indices.iter().zip(r.values) {
            out[col_map[j as usize].expect("column in use")] = v;
        }
    }
    let n = dense.rows();
    let k = pca_components.min(d).min(n.saturating_sub(1));
    if k < 2 {
        return Err(PipelineError::Validation(format!("projection needs at least 3 rows and 2 used features, got {n} x {d}")));
    }
    let pca = pca_fit(&dense, k)?;
    let reduced = pca.transform(&dense)?;
    let result = tsne(&reduced, tsne_cfg)?;
    let target = tsne_cfg.perplexity.ln();
    let row_entropy_max_error = result.row_entropies.iter().map(|h| (h - target).abs()).fold(0.0, f64::max);
    Ok(ProjectionRun {
        projection: Projection2D {
            coords: result.coords,
            labels: rows.iter().map(|&i| labels[i]).collect(),
            kl_divergence: result.final_kl,
        },
        rows,
        pca_components: k,
        explained_variance: pca.explained_variance_ratio.iter().sum(),
        initial_kl: result.initial_kl,
        row_entropy_max_error,
    })
}
