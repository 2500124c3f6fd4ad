//! Year-scoped code dictionaries and crosswalks between classification
//! revisions.
//!
//! A [`Codebook`] holds one [`CodeDictionary`] per scheme (e.g. `SNI2002`,
//! `MUNICIPALITY`) and any number of [`Crosswalk`]s. Each register
//! [`Variable`] is served by one or more schemes whose validity ranges must
//! not overlap, so that for every year exactly one scheme is active.

mod crosswalk;
mod dictionary;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crosswalk::Crosswalk;
pub use dictionary::{CodeDictionary, YearRange};
pub use validate::{CoverageReport, CrosswalkCoverage, SchemeSummary};

pub const DICTIONARY_HEADER: [&str; 5] = ["scheme_id", "valid_from", "valid_to", "code", "description"];
pub const CROSSWALK_HEADER: [&str; 4] = ["from_scheme", "to_scheme", "from_code", "to_code"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodebookError {
    #[error("scheme {scheme} is not loaded or not active in {year}")]
    SchemeNotActive { scheme: String, year: i32 },
    #[error("no scheme for {variable} is active in {year}")]
    NoActiveScheme { variable: Variable, year: i32 },
    #[error("several schemes for {variable} are active in {year}: {schemes:?}")]
    AmbiguousScheme { variable: Variable, year: i32, schemes: Vec<String> },
    #[error("unknown code {code:?} in scheme {scheme} ({year})")]
    UnknownCode { scheme: String, year: i32, code: String },
    #[error("code {code:?} has no mapping from {from_scheme} to {to_scheme}")]
    UnmappedCode { from_scheme: String, to_scheme: String, code: String },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("invalid codebook: {0}")]
    Invalid(String),
    #[error("reading {path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Register variables that carry a categorical code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Sex,
    Municipality,
    FamilyRelation,
    ChildStatus,
    EducationLevel,
    EducationField,
    Employment,
    Occupation,
    Industry,
    LaborMarketRegion,
    IncomeSource,
    GovernmentSupport,
}

impl Variable {
    pub const ALL: [Variable; 12] = [
        Variable::Sex,
        Variable::Municipality,
        Variable::FamilyRelation,
        Variable::ChildStatus,
        Variable::EducationLevel,
        Variable::EducationField,
        Variable::Employment,
        Variable::Occupation,
        Variable::Industry,
        Variable::LaborMarketRegion,
        Variable::IncomeSource,
        Variable::GovernmentSupport,
    ];

    /// Schemes that may encode this variable, oldest revision first.
    pub fn schemes(self) -> &'static [&'static str] {
        match self {
            Variable::Sex => &["SEX"],
            Variable::Municipality => &["MUNICIPALITY"],
            Variable::FamilyRelation => &["FAMILY_REL"],
            Variable::ChildStatus => &["CHILD_STATUS"],
            Variable::EducationLevel => &["EDU_LEVEL"],
            Variable::EducationField => &["EDU_FIELD"],
            Variable::Employment => &["EMPLOYMENT"],
            Variable::Occupation => &["SSYK2001", "SSYK2014"],
            Variable::Industry => &["SNI2002", "SNI2007"],
            Variable::LaborMarketRegion => &["LMA"],
            Variable::IncomeSource => &["INCOME_SOURCE"],
            Variable::GovernmentSupport => &["GOV_SUPPORT"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::Sex => "sex",
            Variable::Municipality => "municipality",
            Variable::FamilyRelation => "family relation",
            Variable::ChildStatus => "child status",
            Variable::EducationLevel => "education level",
            Variable::EducationField => "education field",
            Variable::Employment => "employment",
            Variable::Occupation => "occupation",
            Variable::Industry => "industry",
            Variable::LaborMarketRegion => "labor market region",
            Variable::IncomeSource => "income source",
            Variable::GovernmentSupport => "government support",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How descriptions are produced from codes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupMode {
    /// Render unknown codes as `unknown <variable>` instead of failing.
    pub lenient: bool,
    /// Re-label pre-revision codes with their post-revision description when
    /// the crosswalk maps them onto a single description.
    pub harmonize: bool,
}

/// Immutable collection of dictionaries and crosswalks.
#[derive(Debug, Clone, Default)]
pub struct Codebook {
    dictionaries: BTreeMap<String, CodeDictionary>,
    crosswalks: Vec<Crosswalk>,
}

const BUNDLED: &[(&str, &str)] = &[
    ("child_status.tsv", include_str!("../../data/codebook/child_status.tsv")),
    ("edu_field.tsv", include_str!("../../data/codebook/edu_field.tsv")),
    ("edu_level.tsv", include_str!("../../data/codebook/edu_level.tsv")),
    ("employment.tsv", include_str!("../../data/codebook/employment.tsv")),
    ("family_rel.tsv", include_str!("../../data/codebook/family_rel.tsv")),
    ("gov_support.tsv", include_str!("../../data/codebook/gov_support.tsv")),
    ("income_source.tsv", include_str!("../../data/codebook/income_source.tsv")),
    ("lma.tsv", include_str!("../../data/codebook/lma.tsv")),
    ("municipality.tsv", include_str!("../../data/codebook/municipality.tsv")),
    ("sex.tsv", include_str!("../../data/codebook/sex.tsv")),
    ("sni2002.tsv", include_str!("../../data/codebook/sni2002.tsv")),
    ("sni2002_sni2007.tsv", include_str!("../../data/codebook/sni2002_sni2007.tsv")),
    ("sni2007.tsv", include_str!("../../data/codebook/sni2007.tsv")),
    ("ssyk2001.tsv", include_str!("../../data/codebook/ssyk2001.tsv")),
    ("ssyk2001_ssyk2014.tsv", include_str!("../../data/codebook/ssyk2001_ssyk2014.tsv")),
    ("ssyk2014.tsv", include_str!("../../data/codebook/ssyk2014.tsv")),
];

impl Codebook {
    /// The toy dictionaries shipped with the crate.
    pub fn bundled() -> Codebook {
        Self::from_sources(BUNDLED.iter().map(|(n, s)| (n.to_string(), s.to_string())))
            .expect("bundled codebook is valid")
    }

    /// Raw bundled TSV files as `(file name, contents)`.
    pub fn bundled_sources() -> impl Iterator<Item = (&'static str, &'static str)> {
        BUNDLED.iter().copied()
    }

    /// Loads every `*.tsv` file in `dir`; the header row tells dictionaries
    /// and crosswalks apart. Structural errors fail the load, coverage
    /// problems are left to [`Codebook::coverage_report`].
    pub fn load_dir(dir: &Path) -> Result<Codebook, CodebookError> {
        let io_err = |e: std::io::Error| CodebookError::Io { path: dir.to_path_buf(), message: e.to_string() };
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
            .collect();
        files.sort();
        let mut sources = Vec::with_capacity(files.len());
        for path in files {
            let text = fs::read_to_string(&path)
                .map_err(|e| CodebookError::Io { path: path.clone(), message: e.to_string() })?;
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            sources.push((name, text));
        }
        Self::from_sources(sources)
    }

    pub fn from_sources<I>(sources: I) -> Result<Codebook, CodebookError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut book = Codebook::default();
        for (name, text) in sources {
            let header: Vec<&str> = text.lines().next().unwrap_or("").trim_end_matches('\r').split('\t').collect();
            if header == DICTIONARY_HEADER {
                for dict in dictionary::parse_tsv(&name, &text)? {
                    book.add_dictionary(dict)?;
                }
            } else if header == CROSSWALK_HEADER {
                for cw in crosswalk::parse_tsv(&name, &text)? {
                    book.add_crosswalk(cw);
                }
            } else {
                return Err(CodebookError::Parse {
                    file: name,
                    line: 1,
                    message: format!("unrecognised header {header:?}"),
                });
            }
        }
        Ok(book)
    }

    pub fn add_dictionary(&mut self, dict: CodeDictionary) -> Result<(), CodebookError> {
        match self.dictionaries.get_mut(dict.scheme()) {
            None => {
                self.dictionaries.insert(dict.scheme().to_string(), dict);
                Ok(())
            }
            Some(existing) => existing.merge(dict),
        }
    }

    /// Adds a crosswalk, merging with an existing one for the same scheme pair.
    pub fn add_crosswalk(&mut self, cw: Crosswalk) {
        match self
            .crosswalks
            .iter_mut()
            .find(|c| c.from_scheme() == cw.from_scheme() && c.to_scheme() == cw.to_scheme())
        {
            Some(existing) => existing.merge(cw),
            None => self.crosswalks.push(cw),
        }
    }

    pub fn dictionary(&self, scheme: &str) -> Option<&CodeDictionary> {
        self.dictionaries.get(scheme)
    }

    pub fn dictionaries(&self) -> impl Iterator<Item = &CodeDictionary> {
        self.dictionaries.values()
    }

    pub fn crosswalks(&self) -> &[Crosswalk] {
        &self.crosswalks
    }

    pub fn crosswalk(&self, from_scheme: &str, to_scheme: &str) -> Option<&Crosswalk> {
        self.crosswalks.iter().find(|c| c.from_scheme() == from_scheme && c.to_scheme() == to_scheme)
    }

    /// Crosswalk leading out of `scheme`, if any.
    pub fn successor(&self, scheme: &str) -> Option<&Crosswalk> {
        self.crosswalks.iter().find(|c| c.from_scheme() == scheme)
    }

    /// Description of `code` in `scheme`, verbatim from the dictionary.
    pub fn lookup(&self, scheme: &str, year: i32, code: &str) -> Result<&str, CodebookError> {
        let dict = self
            .dictionaries
            .get(scheme)
            .filter(|d| d.valid_years().contains(year))
            .ok_or_else(|| CodebookError::SchemeNotActive { scheme: scheme.to_string(), year })?;
        dict.get(code).ok_or_else(|| CodebookError::UnknownCode {
            scheme: scheme.to_string(),
            year,
            code: code.to_string(),
        })
    }

    /// The unique scheme encoding `variable` in `year`.
    pub fn resolve_scheme(&self, variable: Variable, year: i32) -> Result<&str, CodebookError> {
        let active: Vec<&str> = variable
            .schemes()
            .iter()
            .filter_map(|s| self.dictionaries.get(*s))
            .filter(|d| d.valid_years().contains(year))
            .map(|d| d.scheme())
            .collect();
        match active.as_slice() {
            [one] => Ok(one),
            [] => Err(CodebookError::NoActiveScheme { variable, year }),
            many => Err(CodebookError::AmbiguousScheme {
                variable,
                year,
                schemes: many.iter().map(|s| s.to_string()).collect(),
            }),
        }
    }

    /// Looks up `code` for `variable`. `scheme` overrides the year-active
    /// scheme when the record carries an explicit scheme tag.
    pub fn describe(
        &self,
        variable: Variable,
        scheme: Option<&str>,
        year: i32,
        code: &str,
        mode: LookupMode,
    ) -> Result<String, CodebookError> {
        let scheme = match scheme {
            Some(s) => s,
            None => self.resolve_scheme(variable, year)?,
        };
        let own = match self.lookup(scheme, year, code) {
            Ok(d) => d,
            Err(CodebookError::UnknownCode { .. }) if mode.lenient => {
                return Ok(format!("unknown {}", variable.name()));
            }
            Err(e) => return Err(e),
        };
        if mode.harmonize {
            if let Some(label) = self.harmonized_label(scheme, code) {
                return Ok(label.to_string());
            }
        }
        Ok(own.to_string())
    }

    /// Post-revision description for a pre-revision code when every target
    /// of the crosswalk shares one description.
    pub fn harmonized_label(&self, scheme: &str, code: &str) -> Option<&str> {
        let cw = self.successor(scheme)?;
        let target_dict = self.dictionaries.get(cw.to_scheme())?;
        let targets = cw.targets(code).ok()?;
        let mut labels = targets.iter().filter_map(|t| target_dict.get(t));
        let first = labels.next()?;
        labels.all(|l| l == first).then_some(first)
    }

    /// Coverage and consistency checks, as printed by `validate-codebook`.
    pub fn coverage_report(&self) -> CoverageReport {
        validate::coverage_report(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_table3_and_table1_labels() {
        let book = Codebook::bundled();
        assert_eq!(book.lookup("MUNICIPALITY", 2001, "138").unwrap(), "Halmstad");
        assert_eq!(book.lookup("MUNICIPALITY", 2006, "148").unwrap(), "Göteborg");
        assert_eq!(book.lookup("SNI2007", 2008, "61100").unwrap(), "Wired telecommunications activities");
        assert_eq!(book.lookup("SSYK2001", 2001, "4120").unwrap(), "Financial assistant");
        assert_eq!(book.lookup("SNI2002", 2001, "6910").unwrap(), "Accounting and bookkeeping");
    }

    #[test]
    fn unknown_code_is_an_error_carrying_context() {
        let book = Codebook::bundled();
        let err = book.lookup("MUNICIPALITY", 2001, "999").unwrap_err();
        assert_eq!(
            err,
            CodebookError::UnknownCode { scheme: "MUNICIPALITY".into(), year: 2001, code: "999".into() }
        );
    }

    #[test]
    fn lookup_outside_validity_fails_resolution() {
        let book = Codebook::bundled();
        assert!(matches!(book.lookup("SNI2007", 2005, "61100"), Err(CodebookError::SchemeNotActive { .. })));
        assert!(matches!(book.lookup("NOPE", 2005, "1"), Err(CodebookError::SchemeNotActive { .. })));
    }

    #[test]
    fn resolve_scheme_follows_revisions() {
        let book = Codebook::bundled();
        assert_eq!(book.resolve_scheme(Variable::Industry, 2005).unwrap(), "SNI2002");
        assert_eq!(book.resolve_scheme(Variable::Industry, 2007).unwrap(), "SNI2002");
        assert_eq!(book.resolve_scheme(Variable::Industry, 2008).unwrap(), "SNI2007");
        assert_eq!(book.resolve_scheme(Variable::Industry, 2010).unwrap(), "SNI2007");
        assert_eq!(book.resolve_scheme(Variable::Occupation, 2013).unwrap(), "SSYK2001");
        assert_eq!(book.resolve_scheme(Variable::Occupation, 2014).unwrap(), "SSYK2014");
        assert!(matches!(
            book.resolve_scheme(Variable::Industry, 1900),
            Err(CodebookError::NoActiveScheme { .. })
        ));
    }

    #[test]
    fn overlapping_schemes_are_ambiguous() {
        let mut book = Codebook::bundled();
        let extra = CodeDictionary::new("SNI2007", YearRange::new(2000, 2030), [("61100", "x")]).unwrap();
        book.dictionaries.insert("SNI2007".into(), extra);
        assert!(matches!(
            book.resolve_scheme(Variable::Industry, 2005),
            Err(CodebookError::AmbiguousScheme { .. })
        ));
    }

    #[test]
    fn lenient_mode_renders_placeholder() {
        let book = Codebook::bundled();
        let strict = LookupMode::default();
        let lenient = LookupMode { lenient: true, ..strict };
        assert!(book.describe(Variable::Municipality, None, 2001, "999", strict).is_err());
        assert_eq!(
            book.describe(Variable::Municipality, None, 2001, "999", lenient).unwrap(),
            "unknown municipality"
        );
    }

    #[test]
    fn harmonize_relabels_single_description_targets_only() {
        let book = Codebook::bundled();
        let mode = LookupMode { harmonize: true, ..Default::default() };
        assert_eq!(
            book.describe(Variable::Industry, None, 2005, "64202", mode).unwrap(),
            "Wired telecommunications activities"
        );
        // one-to-many with distinct target descriptions keeps its own label
        assert_eq!(
            book.describe(Variable::Industry, None, 2005, "37100", mode).unwrap(),
            "Recycling of metal waste and scrap"
        );
        assert_eq!(
            book.describe(Variable::Industry, None, 2010, "61100", mode).unwrap(),
            "Wired telecommunications activities"
        );
    }

    #[test]
    fn bundled_load_matches_directory_load() {
        let dir = tempfile::tempdir().unwrap();
        for (name, text) in Codebook::bundled_sources() {
            fs::write(dir.path().join(name), text).unwrap();
        }
        let from_dir = Codebook::load_dir(dir.path()).unwrap();
        let bundled = Codebook::bundled();
        assert_eq!(from_dir.dictionaries().count(), bundled.dictionaries().count());
        assert_eq!(from_dir.crosswalks(), bundled.crosswalks());
        assert!(from_dir.coverage_report().is_ok());
    }
}
