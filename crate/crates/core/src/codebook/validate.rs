use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{Codebook, Variable, YearRange};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemeSummary {
    pub scheme: String,
    pub valid_years: YearRange,
    pub codes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrosswalkCoverage {
    pub from_scheme: String,
    pub to_scheme: String,
    pub pairs: usize,
    /// Source-dictionary codes the crosswalk does not map.
    pub missing_sources: Vec<String>,
    /// Mapped source codes absent from the source dictionary.
    pub unknown_sources: Vec<String>,
    /// Target codes absent from the target dictionary.
    pub unknown_targets: Vec<String>,
    /// Schemes referenced by the crosswalk but not loaded.
    pub missing_dictionaries: Vec<String>,
}

impl CrosswalkCoverage {
    pub fn is_ok(&self) -> bool {
        self.missing_sources.is_empty()
            && self.unknown_sources.is_empty()
            && self.unknown_targets.is_empty()
            && self.missing_dictionaries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub schemes: Vec<SchemeSummary>,
    pub crosswalks: Vec<CrosswalkCoverage>,
    /// Variables with more than one scheme active in the same year.
    pub overlaps: Vec<String>,
}

impl CoverageReport {
    pub fn is_ok(&self) -> bool {
        self.overlaps.is_empty() && self.crosswalks.iter().all(CrosswalkCoverage::is_ok)
    }
}

pub(super) fn coverage_report(book: &Codebook) -> CoverageReport {
    let schemes = book
        .dictionaries()
        .map(|d| SchemeSummary { scheme: d.scheme().to_string(), valid_years: d.valid_years(), codes: d.len() })
        .collect();

    let crosswalks = book
        .crosswalks()
        .iter()
        .map(|cw| {
            let from = book.dictionary(cw.from_scheme());
            let to = book.dictionary(cw.to_scheme());
            let mut missing_dictionaries = Vec::new();
            if from.is_none() {
                missing_dictionaries.push(cw.from_scheme().to_string());
            }
            if to.is_none() && cw.to_scheme() != cw.from_scheme() {
                missing_dictionaries.push(cw.to_scheme().to_string());
            }
            let mapped: BTreeSet<&str> = cw.source_codes().collect();
            let (missing_sources, unknown_sources) = match from {
                Some(d) => {
                    let known: BTreeSet<&str> = d.codes().collect();
                    (
                        known.difference(&mapped).map(|c| c.to_string()).collect(),
                        mapped.difference(&known).map(|c| c.to_string()).collect(),
                    )
                }
                None => (Vec::new(), Vec::new()),
            };
            let unknown_targets = match to {
                Some(d) => {
                    let targets: BTreeSet<&str> = cw.pairs().map(|(_, b)| b).collect();
                    targets.into_iter().filter(|t| !d.contains(t)).map(str::to_string).collect()
                }
                None => Vec::new(),
            };
            CrosswalkCoverage {
                from_scheme: cw.from_scheme().to_string(),
                to_scheme: cw.to_scheme().to_string(),
                pairs: cw.pairs().count(),
                missing_sources,
                unknown_sources,
                unknown_targets,
                missing_dictionaries,
            }
        })
        .collect();

    let mut overlaps = Vec::new();
    for var in Variable::ALL {
        let dicts: Vec<_> = var.schemes().iter().filter_map(|s| book.dictionary(s)).collect();
        for (i, a) in dicts.iter().enumerate() {
            for b in &dicts[i + 1..] {
                if a.valid_years().overlaps(&b.valid_years()) {
                    overlaps.push(format!("{var}: {} and {} overlap", a.scheme(), b.scheme()));
                }
            }
        }
    }

    CoverageReport { schemes, crosswalks, overlaps }
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dictionaries:")?;
        for s in &self.schemes {
            writeln!(f, "  {:<14} {}-{}  {} codes", s.scheme, s.valid_years.from, s.valid_years.to, s.codes)?;
        }
        writeln!(f, "crosswalks:")?;
        for c in &self.crosswalks {
            let status = if c.is_ok() { "ok" } else { "FAIL" };
            writeln!(f, "  {} -> {}  {} pairs  {status}", c.from_scheme, c.to_scheme, c.pairs)?;
            if !c.missing_dictionaries.is_empty() {
                writeln!(f, "    missing dictionaries: {}", c.missing_dictionaries.join(", "))?;
            }
            if !c.missing_sources.is_empty() {
                writeln!(f, "    unmapped source codes: {}", c.missing_sources.join(", "))?;
            }
            if !c.unknown_sources.is_empty() {
                writeln!(f, "    source codes not in {}: {}", c.from_scheme, c.unknown_sources.join(", "))?;
            }
            if !c.unknown_targets.is_empty() {
                writeln!(f, "    target codes not in {}: {}", c.to_scheme, c.unknown_targets.join(", "))?;
            }
        }
        for o in &self.overlaps {
            writeln!(f, "overlap: {o}")?;
        }
        write!(f, "{}", if self.is_ok() { "coverage: ok" } else { "coverage: FAILED" })
    }
}
