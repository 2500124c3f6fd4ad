//! Natural-language rendering of trajectories and the JSONL dataset format.

mod template;

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{EventKind, LabeledTrajectory, MobilityLabel, Trajectory};

pub use template::{lower_first, TemplateSet, BASELINE_FIELDS, EVENT_FIELDS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template {template:?}: {message}")]
    Syntax { template: String, message: String },
    #[error("unknown field {field:?} in template {template:?}")]
    UnknownField { field: String, template: String },
    #[error("unknown filter {filter:?} in template {template:?}")]
    UnknownFilter { filter: String, template: String },
    #[error("variant table {table:?} has no entry for {value:?} and no _default")]
    NoVariant { table: String, value: String },
    #[error("baseline group {0:?} has no template")]
    MissingGroup(String),
    #[error("no template for event kind {}", .0.key())]
    MissingEvent(EventKind),
    #[error("unknown event kind {0:?}")]
    UnknownEventKind(String),
    #[error("variant expansion too deep in {0:?}")]
    TooDeep(String),
    #[error("template file: {0}")]
    Toml(String),
    #[error("reading {path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedTrajectory {
    pub person_id: String,
    pub text: String,
    pub label: MobilityLabel,
    /// Filled in by token statistics, not by rendering.
    pub token_count: Option<usize>,
}

/// Baseline sentences in group order, then one sentence per event.
pub fn render_text(trajectory: &Trajectory, templates: &TemplateSet) -> Result<String, TemplateError> {
    let mut sentences = templates.render_baseline(&trajectory.baseline)?;
    for event in &trajectory.events {
        if let Some(s) = templates.render_event(event)? {
            sentences.push(s);
        }
    }
    Ok(sentences.join(templates.separator()))
}

pub fn render(item: &LabeledTrajectory, templates: &TemplateSet) -> Result<RenderedTrajectory, TemplateError> {
    Ok(RenderedTrajectory {
        person_id: item.trajectory.person_id.clone(),
        text: render_text(&item.trajectory, templates)?,
        label: item.label.clone(),
        token_count: None,
    })
}

/// One line of the exported dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub id: String,
    pub text: String,
    pub label: u8,
}

impl From<&RenderedTrajectory> for DatasetRow {
    fn from(r: &RenderedTrajectory) -> DatasetRow {
        DatasetRow { id: r.person_id.clone(), text: r.text.clone(), label: u8::from(r.label.moved) }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

/// Writes `{"id","text","label"}` lines in input order. The file is written
/// under a temporary name and renamed at the end; on failure nothing is left
/// at `path`.
pub fn render_dataset<'a, I>(rows: I, path: &Path) -> Result<(), DatasetError>
where
    I: IntoIterator<Item = &'a RenderedTrajectory>,
{
    write_rows(rows.into_iter().map(DatasetRow::from), path)
}

pub fn write_rows<I>(rows: I, path: &Path) -> Result<(), DatasetError>
where
    I: IntoIterator<Item = DatasetRow>,
{
    let io_err = |source| DatasetError::Io { path: path.to_path_buf(), source };
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| -> io::Result<()> {
        let mut w = BufWriter::new(File::create(&tmp)?);
        for row in rows {
            serde_json::to_writer(&mut w, &row)?;
            w.write_all(b"\n")?;
        }
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRow>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: DatasetRow = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if row.label > 1 {
            return Err(DatasetError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("label {} is not 0 or 1", row.label),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}
