use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;

use lifetraj::codebook::Codebook;
use lifetraj::features::split_dataset;
use lifetraj::model::{classification_metrics, train, ModelArtifact};
use lifetraj::pipeline::{
    build_corpus, evaluate, load_codebook, load_templates, project_sample, read_json, read_jsonl, render_corpus,
    run_experiment, write_json, write_jsonl, write_scores_csv, ExperimentConfig, FeatureSet, MetricsDocument,
    PipelineError,
};
use lifetraj::project::{write_scatter_csv, write_scatter_svg};
use lifetraj::registerdata::{generate_population, load_records, write_records, LoadOptions, RecordFormat, ValidationRules};
use lifetraj::textualize::{read_dataset, render_dataset};
use lifetraj::trajectory::LabeledTrajectory;

use crate::{CodebookAction, Command, Failure, Format, GlobalArgs};

fn config(g: &GlobalArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if g.seed.is_some() {
        cfg.seed = g.seed;
    }
    if g.lenient_codes {
        cfg.build.lenient_codes = true;
    }
    if let Some(t) = g.threshold {
        cfg.evaluation.threshold = t;
    }
    if let Some(p) = g.perplexity {
        cfg.projection.tsne.perplexity = p;
    }
    if let Some(d) = &g.out_dir {
        cfg.paths.work_dir = Some(d.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig, fallback: &str) -> Result<PathBuf, Failure> {
    let dir = cfg.paths.work_dir.clone().unwrap_or_else(|| PathBuf::from(fallback));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn validate_codebook(dir: Option<&Path>) -> Result<(), Failure> {
    let book = match dir {
        Some(d) => Codebook::load_dir(d).map_err(|e| Failure::Validation(e.to_string()))?,
        None => Codebook::bundled(),
    };
    let report = book.coverage_report();
    print!("{report}");
    if report.is_ok() {
        return Ok(());
    }
    let mut problems = Vec::new();
    for c in report.crosswalks.iter().filter(|c| !c.is_ok()) {
        let mut parts = Vec::new();
        if !c.missing_sources.is_empty() {
            parts.push(format!("unmapped source codes {}", c.missing_sources.join(", ")));
        }
        if !c.unknown_sources.is_empty() {
            parts.push(format!("unknown source codes {}", c.unknown_sources.join(", ")));
        }
        if !c.unknown_targets.is_empty() {
            parts.push(format!("unknown target codes {}", c.unknown_targets.join(", ")));
        }
        if !c.missing_dictionaries.is_empty() {
            parts.push(format!("missing dictionaries {}", c.missing_dictionaries.join(", ")));
        }
        problems.push(format!("{} -> {}: {}", c.from_scheme, c.to_scheme, parts.join("; ")));
    }
    problems.extend(report.overlaps.iter().map(|o| format!("overlap: {o}")));
    Err(Failure::Validation(format!("codebook coverage check failed\n  {}", problems.join("\n  "))))
}

fn validation(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

pub(crate) fn run(g: &GlobalArgs, command: Command) -> Result<(), Failure> {
    let mut cfg = config(g)?;
    match command {
        Command::ValidateCodebook { dir, codebook_dir }
        | Command::Codebook { action: CodebookAction::Validate { dir, codebook_dir } } => {
            validate_codebook(dir.or(codebook_dir).or(cfg.paths.codebook_dir).as_deref())
        }
        Command::Generate { format, population_size } => {
            if let Some(n) = population_size {
                cfg.synth.population_size = n;
            }
            cfg.propagate_seed()?;
            let pop = generate_population(&cfg.synth).map_err(validation)?;
            let dir = out_dir(&cfg, ".")?;
            let (fmt, name) = match format {
                Format::Csv => (RecordFormat::Csv, "records.csv"),
                Format::Jsonl => (RecordFormat::Jsonl, "records.jsonl"),
            };
            let path = dir.join(name);
            let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_records(BufWriter::new(f), &pop.histories, fmt).with_context(|| format!("writing {}", path.display()))?;
            eprintln!(
                "wrote {} persons to {} (mover share {:.4}, base hazard {:.5})",
                pop.histories.len(),
                path.display(),
                pop.mover_share,
                pop.base_move_hazard
            );
            Ok(())
        }
        Command::Build { records, codebook_dir, split_year, strict_codes, harmonize } => {
            let book = load_codebook(codebook_dir.or(cfg.paths.codebook_dir.clone()).as_deref())?;
            let format = RecordFormat::from_path(&records)
                .ok_or_else(|| validation(format!("{}: extension must be .csv or .jsonl", records.display())))?;
            let opts = LoadOptions { rules: ValidationRules { span: None, codebook: Some(&book) }, fail_fast: false };
            let opts = if cfg.build.lenient_codes { LoadOptions { rules: ValidationRules::default(), ..opts } } else { opts };
            let histories = load_records(&records, format, &opts).map_err(PipelineError::from)?;
            cfg.build.strict_codes |= strict_codes;
            cfg.build.harmonize |= harmonize;
            let split_year = split_year.unwrap_or(cfg.synth.split_year);
            let items = build_corpus(&histories, &book, split_year, cfg.build.options(), g.static_only)?;
            let name = if g.static_only { "trajectories_static.jsonl" } else { "trajectories.jsonl" };
            let path = out_dir(&cfg, ".")?.join(name);
            write_jsonl(&items, &path)?;
            eprintln!("built {} of {} histories into {}", items.len(), histories.len(), path.display());
            Ok(())
        }
        Command::Render { trajectories, templates } => {
            let templates = load_templates(templates.or(cfg.paths.templates.clone()).as_deref())?;
            let items: Vec<LabeledTrajectory> = read_jsonl(&trajectories)?;
            let rendered = render_corpus(&items, &templates)?;
            let path = out_dir(&cfg, ".")?.join("dataset.jsonl");
            render_dataset(&rendered, &path).map_err(PipelineError::from)?;
            eprintln!("rendered {} trajectories into {}", rendered.len(), path.display());
            Ok(())
        }
        Command::Split { dataset } => {
            let rows = read_dataset(&dataset).map_err(PipelineError::from)?;
            let split = split_dataset(rows.len(), &cfg.split_config()?).map_err(validation)?;
            let path = out_dir(&cfg, ".")?.join("split.json");
            write_json(&split, &path)?;
            eprintln!(
                "split {} rows: train {}, validation {}, test {}",
                rows.len(),
                split.train.len(),
                split.validation.len(),
                split.test.len()
            );
            Ok(())
        }
        Command::Vectorize { dataset, split } => {
            let rows = read_dataset(&dataset).map_err(PipelineError::from)?;
            let split = read_json(&split)?;
            let fs = lifetraj::pipeline::vectorize(&rows, &split, &cfg.features)?;
            let dir = out_dir(&cfg, ".")?.join("features");
            fs.write_dir(&dir)?;
            eprintln!("vocabulary of {} n-grams; features in {}", fs.vocabulary.len(), dir.display());
            Ok(())
        }
        Command::Train { features } => {
            cfg.propagate_seed()?;
            let fs = FeatureSet::read_dir(&features)?;
            let report = train(&fs.train.0, &fs.train.1, &fs.validation.0, &fs.validation.1, &cfg.train)
                .map_err(|e| Failure::from(PipelineError::from(e)))?;
            for h in &report.history {
                eprintln!(
                    "epoch {}: train loss {:.5}, validation loss {:.5}, validation AUPRC {:.5}",
                    h.epoch, h.train_loss, h.validation_loss, h.validation_auprc
                );
            }
            let artifact = ModelArtifact::from_report(&report, &cfg.train, &fs.vocabulary.content_hash());
            let path = out_dir(&cfg, ".")?.join("model.json");
            artifact.save(&path).map_err(PipelineError::from)?;
            eprintln!("kept epoch {}; model in {}", report.best_epoch, path.display());
            Ok(())
        }
        Command::Evaluate { model, features, part, scores } => {
            let threshold = cfg.evaluation.threshold;
            let dir = out_dir(&cfg, ".")?;
            let doc = match (model, features, scores) {
                (_, _, Some(scores)) => {
                    let (s, y) = lifetraj::pipeline::read_scores_csv(&scores)?;
                    let m = classification_metrics(&s, &y, threshold).map_err(|e| validation(PipelineError::from(e)))?;
                    MetricsDocument::new(None, m)
                }
                (Some(model), Some(features), None) => {
                    let artifact = ModelArtifact::load(&model).map_err(PipelineError::from)?;
                    let fs = FeatureSet::read_dir(&features)?;
                    if artifact.vocabulary_hash != fs.vocabulary.content_hash() {
                        return Err(validation("model was trained on a different vocabulary"));
                    }
                    let (x, y) = fs.part(&part).ok_or_else(|| validation(format!("unknown part {part:?}")))?;
                    let (p, m) = evaluate(&artifact.model_as::<f64>(), x, y, threshold)?;
                    write_scores_csv(&p, y, &dir.join("predictions.csv"))?;
                    MetricsDocument::new(Some(&part), m)
                }
                _ => return Err(validation("evaluate needs --scores, or --model with --features")),
            };
            let path = dir.join("metrics.json");
            write_json(&doc, &path)?;
            let m = &doc.metrics;
            println!(
                "AUPRC {:.5}  balanced accuracy {:.5}  F1-macro {:.5}  prevalence {:.5}  (n = {})",
                m.auprc, m.balanced_accuracy, m.f1_macro, m.prevalence, m.n
            );
            Ok(())
        }
        Command::Project { features, part, sample_size } => {
            let seed = cfg.propagate_seed()?;
            let fs = FeatureSet::read_dir(&features)?;
            let (x, y) = fs.part(&part).ok_or_else(|| validation(format!("unknown part {part:?}")))?;
            let p = &cfg.projection;
            let n = sample_size.unwrap_or(p.sample_size).min(x.n_rows());
            p.tsne.validate(n).map_err(validation)?;
            let run = project_sample(x, y, n, p.pca_components, &p.tsne, seed)?;
            let dir = out_dir(&cfg, ".")?;
            write_scatter_csv(&run.projection, &dir.join("scatter.csv")).map_err(PipelineError::from)?;
            if p.svg {
                write_scatter_svg(&run.projection, &dir.join("scatter.svg")).map_err(PipelineError::from)?;
            }
            eprintln!(
                "projected {} points via {} principal components; KL {:.4} -> {:.4}",
                run.rows.len(),
                run.pca_components,
                run.initial_kl,
                run.projection.kl_divergence
            );
            Ok(())
        }
        Command::Experiment => {
            let dir = out_dir(&cfg, "lifetraj-out")?;
            let summary = run_experiment(&cfg, &dir, &|msg| eprintln!("{msg}"))?;
            let (t, s) = (&summary.models.trajectory.test, &summary.models.static_only.test);
            println!("prevalence baseline  {:.5}", summary.prevalence_baseline);
            println!("trajectory AUPRC     {:.5}  balanced accuracy {:.5}", t.auprc, t.balanced_accuracy);
            println!("static-only AUPRC    {:.5}  balanced accuracy {:.5}", s.auprc, s.balanced_accuracy);
            println!("summary: {}", dir.join("summary.json").display());
            Ok(())
        }
    }
}
