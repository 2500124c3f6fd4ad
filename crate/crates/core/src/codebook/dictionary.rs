use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CodebookError;

/// Inclusive calendar-year range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub from: i32,
    pub to: i32,
}

impl YearRange {
    pub fn new(from: i32, to: i32) -> YearRange {
        YearRange { from, to }
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.from..=self.to).contains(&year)
    }

    pub fn overlaps(&self, other: &YearRange) -> bool {
        self.from <= other.to && other.from <= self.to
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeDictionary {
    scheme: String,
    valid_years: YearRange,
    entries: BTreeMap<String, String>,
}

impl CodeDictionary {
    pub fn new<I, C, D>(scheme: &str, valid_years: YearRange, entries: I) -> Result<CodeDictionary, CodebookError>
    where
        I: IntoIterator<Item = (C, D)>,
        C: Into<String>,
        D: Into<String>,
    {
        if valid_years.from > valid_years.to {
            return Err(CodebookError::Invalid(format!("{scheme}: empty validity range")));
        }
        let mut dict = CodeDictionary { scheme: scheme.to_string(), valid_years, entries: BTreeMap::new() };
        for (code, desc) in entries {
            dict.insert(code.into(), desc.into())?;
        }
        Ok(dict)
    }

    fn insert(&mut self, code: String, desc: String) -> Result<(), CodebookError> {
        if desc.trim().is_empty() {
            return Err(CodebookError::Invalid(format!("{}: empty description for code {code:?}", self.scheme)));
        }
        if self.entries.contains_key(&code) {
            return Err(CodebookError::Invalid(format!("{}: duplicate code {code:?}", self.scheme)));
        }
        self.entries.insert(code, desc);
        Ok(())
    }

    pub(super) fn merge(&mut self, other: CodeDictionary) -> Result<(), CodebookError> {
        if other.valid_years != self.valid_years {
            return Err(CodebookError::Invalid(format!(
                "{}: conflicting validity ranges {:?} and {:?}",
                self.scheme, self.valid_years, other.valid_years
            )));
        }
        for (code, desc) in other.entries {
            self.insert(code, desc)?;
        }
        Ok(())
    }

    pub fn scheme(&self) -> &str {
        &self.scheme
    }

    pub fn valid_years(&self) -> YearRange {
        self.valid_years
    }

    pub fn get(&self, code: &str) -> Option<&str> {
        self.entries.get(code).map(String::as_str)
    }

    pub fn contains(&self, code: &str) -> bool {
        self.entries.contains_key(code)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(code, description)` pairs in ascending code order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(c, d)| (c.as_str(), d.as_str()))
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Parses a dictionary TSV; one file may carry several schemes.
pub(super) fn parse_tsv(file: &str, text: &str) -> Result<Vec<CodeDictionary>, CodebookError> {
    let mut out: Vec<CodeDictionary> = Vec::new();
    for (idx, raw) in text.lines().enumerate().skip(1) {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| CodebookError::Parse { file: file.to_string(), line: idx + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        let [scheme, from, to, code, desc] = cols[..] else {
            return Err(err(format!("expected 5 columns, found {}", cols.len())));
        };
        let from: i32 = from.trim().parse().map_err(|_| err(format!("bad valid_from {from:?}")))?;
        let to: i32 = to.trim().parse().map_err(|_| err(format!("bad valid_to {to:?}")))?;
        let range = YearRange::new(from, to);
        let single = CodeDictionary::new(scheme.trim(), range, [(code.trim(), desc.trim())]).map_err(|e| err(e.to_string()))?;
        match out.iter_mut().find(|d| d.scheme == single.scheme) {
            Some(d) => d.merge(single).map_err(|e| err(e.to_string()))?,
            None => out.push(single),
        }
    }
    Ok(out)
}
