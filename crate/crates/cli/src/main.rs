mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lifetraj::pipeline::PipelineError;

#[derive(Debug, Parser)]
#[command(name = "lifetraj", version, about = "Life-trajectory texts from coded register records")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Args)]
struct GlobalArgs {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Render unknown codes as placeholders instead of failing.
    #[arg(long, global = true)]
    lenient_codes: bool,
    /// Probability threshold for class 1.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Baseline profile only, no events.
    #[arg(long, global = true)]
    static_only: bool,
    #[arg(long, global = true)]
    perplexity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic population of register records.
    Generate {
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        population_size: Option<usize>,
    },
    /// Check dictionaries and crosswalks for coverage gaps.
    ValidateCodebook {
        /// Codebook directory (default: the bundled codebook).
        #[arg(value_name = "DIR", conflicts_with = "codebook_dir")]
        dir: Option<PathBuf>,
        #[arg(long)]
        codebook_dir: Option<PathBuf>,
    },
    /// Codebook utilities.
    Codebook {
        #[command(subcommand)]
        action: CodebookAction,
    },
    /// Build labelled trajectories from a record file.
    Build {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        codebook_dir: Option<PathBuf>,
        #[arg(long)]
        split_year: Option<i32>,
        /// Fire occupation/industry events on pure recodings.
        #[arg(long)]
        strict_codes: bool,
        #[arg(long)]
        harmonize: bool,
    },
    /// Render trajectories into a JSONL dataset.
    Render {
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Split a dataset into train, validation and test indices.
    Split {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Fit the TF-IDF vocabulary on the training part and write feature matrices.
    Vectorize {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        split: PathBuf,
    },
    /// Train the logistic-regression classifier on a feature directory.
    Train {
        #[arg(long)]
        features: PathBuf,
    },
    /// Evaluate a model on a feature part, or score a `score,label` CSV.
    Evaluate {
        #[arg(long, requires = "features", conflicts_with = "scores")]
        model: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        part: String,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// PCA + t-SNE projection of a feature part.
    Project {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "test")]
        part: String,
        #[arg(long)]
        sample_size: Option<usize>,
    },
    /// Run the whole pipeline and write a summary.
    Experiment,
}

#[derive(Debug, Subcommand)]
enum CodebookAction {
    /// Check dictionaries and crosswalks for coverage gaps.
    Validate {
        #[arg(value_name = "DIR", conflicts_with = "codebook_dir")]
        dir: Option<PathBuf>,
        #[arg(long)]
        codebook_dir: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    /// Invalid input or configuration (exit 1).
    Validation(String),
    /// Anything else (exit 2).
    Runtime(anyhow::Error),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli.global, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
