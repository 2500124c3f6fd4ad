use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::summary::{descriptives, token_summary};
use super::{
    build_corpus, evaluate, load_codebook, load_templates, project_sample, render_corpus, sha256_file, write_json,
    write_labels, write_scores_csv, ArtifactHash, ExperimentConfig, ExperimentSummary, FeatureSet, MetricsDocument,
    ModelSummaries, ModelSummary, PipelineError, PopulationSummary, ProjectionSummary, SplitSizes, TokenSummaries,
};
use crate::features::{split_dataset, whitespace_token_count, write_triplets, DatasetSplit};
use crate::model::{train, ModelArtifact};
use crate::project::export_scatter;
use crate::registerdata::{cohort_filter, generate_population, write_records, RecordFormat};
use crate::textualize::{render_dataset, DatasetRow, RenderedTrajectory};

struct Outputs {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn path(&mut self, rel: &str) -> Result<PathBuf, PipelineError> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
        self.written.push(PathBuf::from(rel));
        Ok(p)
    }

    fn hashes(&self) -> Result<Vec<ArtifactHash>, PipelineError> {
        let mut out = Vec::with_capacity(self.written.len());
        for rel in &self.written {
            let p = self.root.join(rel);
            let bytes = fs::metadata(&p).map_err(|e| PipelineError::io(&p, e))?.len();
            let path = rel.iter().map(|c| c.to_string_lossy()).collect::<Vec<_>>().join("/");
            out.push(ArtifactHash { path, sha256: sha256_file(&p)?, bytes });
        }
        out.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(out)
    }
}

fn train_and_evaluate(
    name: &str,
    rows: &[DatasetRow],
    split: &DatasetSplit,
    cfg: &ExperimentConfig,
    out: &mut Outputs,
    log: &dyn Fn(&str),
) -> Result<(ModelSummary, FeatureSet), PipelineError> {
    let fs = super::vectorize(rows, split, &cfg.features)?;
    log(&format!("{name}: vocabulary of {} n-grams", fs.vocabulary.len()));
    fs.vocabulary.save(&out.path(&format!("{name}/vocabulary.tsv"))?)?;
    write_triplets(&fs.test.0, &out.path(&format!("{name}/test.triplets"))?)?;
    write_labels(&fs.test.1, &out.path(&format!("{name}/test.labels"))?)?;

    let report = train(&fs.train.0, &fs.train.1, &fs.validation.0, &fs.validation.1, &cfg.train)?;
    log(&format!("{name}: best epoch {} of {}", report.best_epoch, report.history.len()));
    let artifact = ModelArtifact::from_report(&report, &cfg.train, &fs.vocabulary.content_hash());
    artifact.save(&out.path(&format!("{name}/model.json"))?)?;

    let (probs, metrics) = evaluate(&report.model, &fs.test.0, &fs.test.1, cfg.evaluation.threshold)?;
    write_scores_csv(&probs, &fs.test.1, &out.path(&format!("{name}/predictions.csv"))?)?;
    write_json(&MetricsDocument::new(Some(name), metrics.clone()), &out.path(&format!("{name}/metrics.json"))?)?;
    log(&format!("{name}: test AUPRC {:.4} (prevalence {:.4})", metrics.auprc, metrics.prevalence));
    Ok((
        ModelSummary {
            vocabulary_size: fs.vocabulary.len(),
            best_epoch: report.best_epoch,
            history: report.history,
            class_weights: report.class_weights,
            auprc_lift: metrics.auprc - metrics.prevalence,
            test: metrics,
        },
        fs,
    ))
}

fn token_counts(rendered: &[RenderedTrajectory]) -> Vec<usize> {
    rendered.iter().map(|r| whitespace_token_count(&r.text)).collect()
}

/// generate → cohort → build (full and static-only) → render → split →
/// vectorize → train → evaluate → project, writing every artifact under
/// `out_dir` and returning the summary that is also written to
/// `out_dir/summary.json`. The summary depends only on the configuration.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path, log: &dyn Fn(&str)) -> Result<ExperimentSummary, PipelineError> {
    let mut cfg = config.clone();
    let seed = cfg.propagate_seed()?;
    cfg.validate()?;
    let book = load_codebook(cfg.paths.codebook_dir.as_deref())?;
    let templates = load_templates(cfg.paths.templates.as_deref())?;
    fs::create_dir_all(out_dir).map_err(|e| PipelineError::io(out_dir, e))?;
    let mut out = Outputs { root: out_dir.to_path_buf(), written: Vec::new() };
    let split_year = cfg.synth.split_year;

    let pop = generate_population(&cfg.synth)?;
    log(&format!("generated {} persons (mover share {:.4})", pop.histories.len(), pop.mover_share));
    let records = out.path("data/records.csv")?;
    let f = File::create(&records).map_err(|e| PipelineError::io(&records, e))?;
    write_records(BufWriter::new(f), &pop.histories, RecordFormat::Csv).map_err(|e| PipelineError::io(&records, e))?;

    let cohort = cohort_filter(&pop.histories, split_year);
    let opts = cfg.build.options();
    let full = render_corpus(&build_corpus(&cohort, &book, split_year, opts, false)?, &templates)?;
    let stat = render_corpus(&build_corpus(&cohort, &book, split_year, opts, true)?, &templates)?;
    log(&format!("cohort of {} persons rendered", cohort.len()));
    render_dataset(&full, &out.path("data/trajectory.jsonl")?)?;
    render_dataset(&stat, &out.path("data/static.jsonl")?)?;
    let labels: Vec<u8> = full.iter().map(|r| u8::from(r.label.moved)).collect();

    let split = split_dataset(full.len(), &cfg.split_config()?)?;
    write_json(&split, &out.path("data/split.json")?)?;

    let rows_full: Vec<DatasetRow> = full.iter().map(DatasetRow::from).collect();
    let rows_stat: Vec<DatasetRow> = stat.iter().map(DatasetRow::from).collect();
    let (trajectory_model, fs_full) = train_and_evaluate("trajectory", &rows_full, &split, &cfg, &mut out, log)?;
    let (static_model, _) = train_and_evaluate("static", &rows_stat, &split, &cfg, &mut out, log)?;

    let p = &cfg.projection;
    let projection = if p.sample_size > 0 {
        let run = project_sample(&fs_full.test.0, &fs_full.test.1, p.sample_size, p.pca_components, &p.tsne, seed)?;
        export_scatter(&run.projection, &out.path("projection/scatter.csv")?, false)?;
        if p.svg {
            crate::project::write_scatter_svg(&run.projection, &out.path("projection/scatter.svg")?)?;
        }
        log(&format!("projected {} points, KL {:.4} -> {:.4}", run.rows.len(), run.initial_kl, run.projection.kl_divergence));
        Some(ProjectionSummary {
            points: run.rows.len(),
            movers: run.projection.labels.iter().filter(|&&l| l == 1).count(),
            pca_components: run.pca_components,
            pca_explained_variance: run.explained_variance,
            perplexity: p.tsne.perplexity,
            initial_kl: run.initial_kl,
            final_kl: run.projection.kl_divergence,
            row_entropy_max_error: run.row_entropy_max_error,
        })
    } else {
        None
    };

    let full_tokens = token_counts(&full);
    let stat_tokens = token_counts(&stat);
    let mut echo = cfg.clone();
    echo.paths.work_dir = None;
    let summary = ExperimentSummary {
        schema_version: super::SUMMARY_SCHEMA_VERSION,
        seed,
        population: PopulationSummary {
            persons_generated: pop.histories.len(),
            cohort_size: cohort.len(),
            base_move_hazard: pop.base_move_hazard,
            generated_mover_share: pop.mover_share,
            cohort_prevalence: labels.iter().filter(|&&l| l == 1).count() as f64 / labels.len().max(1) as f64,
        },
        descriptives: descriptives(&cohort, &labels, &full_tokens, split_year),
        tokens: TokenSummaries {
            trajectory: token_summary(&full_tokens, &labels),
            static_only: token_summary(&stat_tokens, &labels),
        },
        split: SplitSizes { train: split.train.len(), validation: split.validation.len(), test: split.test.len() },
        prevalence_baseline: trajectory_model.test.prevalence,
        models: ModelSummaries { trajectory: trajectory_model, static_only: static_model },
        projection,
        artifacts: out.hashes()?,
        config: echo,
    };
    write_json(&summary, &out_dir.join("summary.json"))?;
    Ok(summary)
}
