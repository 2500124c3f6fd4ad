use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::{AnnualRecord, PersonHistory, ValidationReport, ValidationRules, RECORD_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    Csv,
    Jsonl,
}

impl RecordFormat {
    /// Guesses the format from the file extension (`.csv`, `.jsonl`/`.json`).
    pub fn from_path(path: &Path) -> Option<RecordFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(RecordFormat::Csv),
            "jsonl" | "json" | "ndjson" => Some(RecordFormat::Jsonl),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}{}{}: {message}", .column.map(|c| format!(", column {c}")).unwrap_or_default(), .field.as_ref().map(|f| format!(" ({f})")).unwrap_or_default())]
    Parse { line: usize, column: Option<usize>, field: Option<String>, message: String },
    #[error("{0}")]
    Validation(ValidationReport),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions<'a> {
    pub rules: ValidationRules<'a>,
    /// Stop at the first invalid history instead of collecting every issue.
    pub fail_fast: bool,
}

/// Reads a record file and groups it into per-person histories, in order of
/// first appearance.
pub fn load_records(path: &Path, format: RecordFormat, opts: &LoadOptions<'_>) -> Result<Vec<PersonHistory>, LoadError> {
    let file = File::open(path).map_err(|e| LoadError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    read_records(BufReader::new(file), format, opts)
}

pub fn read_records<R: Read>(reader: R, format: RecordFormat, opts: &LoadOptions<'_>) -> Result<Vec<PersonHistory>, LoadError> {
    let rows = match format {
        RecordFormat::Csv => parse_csv(reader)?,
        RecordFormat::Jsonl => parse_jsonl(reader)?,
    };
    let histories = group(rows);
    let mut report = ValidationReport::default();
    for h in &histories {
        let issues = h.validate(&opts.rules);
        if !issues.is_empty() {
            report.issues.extend(issues);
            if opts.fail_fast {
                break;
            }
        }
    }
    if report.issues.is_empty() {
        Ok(histories)
    } else {
        Err(LoadError::Validation(report))
    }
}

fn group(rows: Vec<AnnualRecord>) -> Vec<PersonHistory> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut buckets: Vec<(String, Vec<AnnualRecord>)> = Vec::new();
    for row in rows {
        let slot = *index.entry(row.person_id.clone()).or_insert_with(|| {
            buckets.push((row.person_id.clone(), Vec::new()));
            buckets.len() - 1
        });
        buckets[slot].1.push(row);
    }
    buckets.into_iter().map(|(id, recs)| PersonHistory::new(id, recs)).collect()
}

struct FieldSource<'a> {
    line: usize,
    get: &'a dyn Fn(&str) -> Option<(String, Option<usize>)>,
}

impl FieldSource<'_> {
    fn err(&self, field: &str, column: Option<usize>, message: String) -> LoadError {
        LoadError::Parse { line: self.line, column, field: Some(field.to_string()), message }
    }

    fn text(&self, field: &str) -> Result<(String, Option<usize>), LoadError> {
        (self.get)(field).ok_or_else(|| self.err(field, None, "missing field".into()))
    }

    fn code(&self, field: &str) -> Result<String, LoadError> {
        let (v, col) = self.text(field)?;
        let v = v.trim().to_string();
        if v.is_empty() {
            return Err(self.err(field, col, "empty value".into()));
        }
        Ok(v)
    }

    fn number<T: std::str::FromStr>(&self, field: &str) -> Result<T, LoadError> {
        let (v, col) = self.text(field)?;
        v.trim().parse().map_err(|_| self.err(field, col, format!("invalid number {v:?}")))
    }

    fn flag(&self, field: &str) -> Result<bool, LoadError> {
        let (v, col) = self.text(field)?;
        match v.trim().to_ascii_lowercase().as_str() {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            _ => Err(self.err(field, col, format!("invalid boolean {v:?}"))),
        }
    }

    fn record(&self) -> Result<AnnualRecord, LoadError> {
        Ok(AnnualRecord {
            person_id: self.code("person_id")?,
            year: self.number("year")?,
            sex: self.code("sex")?,
            age: self.number("age")?,
            residence_municipality: self.code("res_mun")?,
            family_relation: self.code("family_rel")?,
            child_status: self.code("child_status")?,
            education_level: self.code("edu_level")?,
            education_field: self.code("edu_field")?,
            employment_status: self.code("employment")?,
            occupation: self.code("occupation")?,
            occupation_scheme: self.code("occupation_scheme")?,
            industry: self.code("industry")?,
            industry_scheme: self.code("industry_scheme")?,
            workplace_municipality: self.code("work_mun")?,
            labor_market_region: self.code("lma_region")?,
            income_percentile: self.number("income_pct")?,
            main_income_source: self.code("income_source")?,
            government_support: self.flag("gov_support")?,
        })
    }
}

fn parse_csv<R: Read>(reader: R) -> Result<Vec<AnnualRecord>, LoadError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let csv_err = |e: csv::Error| {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        LoadError::Parse { line, column: None, field: None, message: e.to_string() }
    };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Ok(Vec::new());
    }
    let columns: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    if let Some(missing) = RECORD_COLUMNS.iter().find(|c| !columns.contains_key(*c)) {
        return Err(LoadError::Parse {
            line: 1,
            column: None,
            field: Some(missing.to_string()),
            message: "missing column in header".into(),
        });
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |f: &str| columns.get(f).and_then(|&i| row.get(i).map(|v| (v.to_string(), Some(i + 1))));
        out.push(FieldSource { line, get: &get }.record()?);
    }
    Ok(out)
}

fn parse_jsonl<R: Read>(reader: R) -> Result<Vec<AnnualRecord>, LoadError> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| LoadError::Parse { line: line_no, column: None, field: None, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let obj: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&line).map_err(|e| LoadError::Parse {
            line: line_no,
            column: Some(e.column()),
            field: None,
            message: e.to_string(),
        })?;
        let get = |f: &str| {
            obj.get(f).and_then(|v| match v {
                serde_json::Value::String(s) => Some((s.clone(), None)),
                serde_json::Value::Number(n) => Some((n.to_string(), None)),
                serde_json::Value::Bool(b) => Some((b.to_string(), None)),
                _ => None,
            })
        };
        out.push(FieldSource { line: line_no, get: &get }.record()?);
    }
    Ok(out)
}

/// Writes histories in the record schema, one row per person-year.
pub fn write_records<W: Write>(writer: W, histories: &[PersonHistory], format: RecordFormat) -> std::io::Result<()> {
    match format {
        RecordFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
            w.write_record(RECORD_COLUMNS)?;
            for rec in histories.iter().flat_map(|h| &h.records) {
                w.write_record(rec.to_row())?;
            }
            w.flush()
        }
        RecordFormat::Jsonl => {
            let mut w = BufWriter::new(writer);
            for rec in histories.iter().flat_map(|h| &h.records) {
                serde_json::to_writer(&mut w, rec)?;
                w.write_all(b"\n")?;
            }
            w.flush()
        }
    }
}
