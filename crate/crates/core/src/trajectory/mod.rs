//! Structured life trajectories: a baseline profile, the change events
//! between consecutive observed records, and the residential-mobility label.
//!
//! Everything that feeds model inputs is computed from
//! [`PersonHistory::up_to`]`(split_year)`; only [`compute_label`] reads the
//! years after the split.

mod events;
mod label;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::{Codebook, CodebookError, LookupMode, Variable};
use crate::registerdata::{AnnualRecord, PersonHistory};

pub use events::{detect_events, EventKind, LifeEvent};
pub use label::{compute_label, MobilityLabel, LABEL_WINDOW_YEARS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrajectoryError {
    #[error("person {person_id} has no record in or before {split_year}")]
    EmptyWindow { person_id: String, split_year: i32 },
    #[error("label undefined for person {person_id}: {reason}")]
    LabelUndefined { person_id: String, reason: String },
    #[error("person {person_id}, {year}, field {field}: {source}")]
    Codebook {
        person_id: String,
        year: i32,
        field: &'static str,
        #[source]
        source: CodebookError,
    },
}

/// A code together with its resolved description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolved {
    pub code: String,
    pub description: String,
}

/// Options shared by event detection and baseline resolution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub lookup: LookupMode,
    /// Fire occupation/industry events on any code change, even when the
    /// descriptions agree (pure recoding across a scheme revision).
    pub strict_codes: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineProfile {
    pub year: i32,
    pub sex: Resolved,
    pub age: u32,
    pub residence: Resolved,
    pub family_relation: Resolved,
    pub child_status: Resolved,
    pub education_level: Resolved,
    pub education_field: Resolved,
    pub employment: Resolved,
    pub occupation: Resolved,
    pub industry: Resolved,
    pub workplace_municipality: Resolved,
    pub labor_market_region: Resolved,
    pub income_percentile: u8,
    pub main_income_source: Resolved,
    pub government_support: Resolved,
}

impl BaselineProfile {
    pub fn income_decile(&self) -> u8 {
        (self.income_percentile / 10).min(9) + 1
    }

    /// Resolved descriptions in field order.
    pub fn descriptions(&self) -> [&str; 13] {
        [
            &self.sex.description,
            &self.residence.description,
            &self.family_relation.description,
            &self.child_status.description,
            &self.education_level.description,
            &self.education_field.description,
            &self.employment.description,
            &self.occupation.description,
            &self.industry.description,
            &self.workplace_municipality.description,
            &self.labor_market_region.description,
            &self.main_income_source.description,
            &self.government_support.description,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub person_id: String,
    pub baseline: BaselineProfile,
    /// Ordered by (year, kind).
    pub events: Vec<LifeEvent>,
    /// Inclusive year window the inputs were drawn from.
    pub window: (i32, i32),
}

/// A trajectory with its outcome, as exchanged between pipeline stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTrajectory {
    pub trajectory: Trajectory,
    pub label: MobilityLabel,
}

pub(crate) fn resolve(
    book: &Codebook,
    person_id: &str,
    rec: &AnnualRecord,
    field: &'static str,
    variable: Variable,
    scheme: Option<&str>,
    code: &str,
    mode: LookupMode,
) -> Result<Resolved, TrajectoryError> {
    let description = book.describe(variable, scheme, rec.year, code, mode).map_err(|source| TrajectoryError::Codebook {
        person_id: person_id.to_string(),
        year: rec.year,
        field,
        source,
    })?;
    Ok(Resolved { code: code.to_string(), description })
}

/// Snapshot of the earliest record at or before `split_year`.
pub fn build_baseline(
    history: &PersonHistory,
    book: &Codebook,
    split_year: i32,
    opts: BuildOptions,
) -> Result<BaselineProfile, TrajectoryError> {
    let rec = history.up_to(split_year).first().ok_or_else(|| TrajectoryError::EmptyWindow {
        person_id: history.person_id.clone(),
        split_year,
    })?;
    let id = history.person_id.as_str();
    let mode = opts.lookup;
    let r = |field, var, scheme: Option<&str>, code: &str| resolve(book, id, rec, field, var, scheme, code, mode);
    Ok(BaselineProfile {
        year: rec.year,
        sex: r("sex", Variable::Sex, None, &rec.sex)?,
        age: rec.age,
        residence: r("res_mun", Variable::Municipality, None, &rec.residence_municipality)?,
        family_relation: r("family_rel", Variable::FamilyRelation, None, &rec.family_relation)?,
        child_status: r("child_status", Variable::ChildStatus, None, &rec.child_status)?,
        education_level: r("edu_level", Variable::EducationLevel, None, &rec.education_level)?,
        education_field: r("edu_field", Variable::EducationField, None, &rec.education_field)?,
        employment: r("employment", Variable::Employment, None, &rec.employment_status)?,
        occupation: r("occupation", Variable::Occupation, Some(&rec.occupation_scheme), &rec.occupation)?,
        industry: r("industry", Variable::Industry, Some(&rec.industry_scheme), &rec.industry)?,
        workplace_municipality: r("work_mun", Variable::Municipality, None, &rec.workplace_municipality)?,
        labor_market_region: r("lma_region", Variable::LaborMarketRegion, None, &rec.labor_market_region)?,
        income_percentile: rec.income_percentile,
        main_income_source: r("income_source", Variable::IncomeSource, None, &rec.main_income_source)?,
        government_support: r("gov_support", Variable::GovernmentSupport, None, rec.gov_support_code())?,
    })
}

/// Baseline plus every change event up to and including `split_year`.
pub fn build_trajectory(
    history: &PersonHistory,
    book: &Codebook,
    split_year: i32,
    opts: BuildOptions,
) -> Result<Trajectory, TrajectoryError> {
    let baseline = build_baseline(history, book, split_year, opts)?;
    let events = detect_events(history, book, split_year, opts)?;
    Ok(Trajectory { person_id: history.person_id.clone(), window: (baseline.year, split_year), baseline, events })
}

/// Baseline-only trajectory (no events).
pub fn build_static_only(
    history: &PersonHistory,
    book: &Codebook,
    split_year: i32,
    opts: BuildOptions,
) -> Result<Trajectory, TrajectoryError> {
    let baseline = build_baseline(history, book, split_year, opts)?;
    Ok(Trajectory { person_id: history.person_id.clone(), window: (baseline.year, split_year), baseline, events: Vec::new() })
}

/// Full or static-only trajectory together with its label.
pub fn build_labeled(
    history: &PersonHistory,
    book: &Codebook,
    split_year: i32,
    opts: BuildOptions,
    static_only: bool,
) -> Result<LabeledTrajectory, TrajectoryError> {
    let trajectory = if static_only {
        build_static_only(history, book, split_year, opts)?
    } else {
        build_trajectory(history, book, split_year, opts)?
    };
    let label = compute_label(history, split_year)?;
    Ok(LabeledTrajectory { trajectory, label })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registerdata::fixtures::table3_history;

    #[test]
    fn table3_baseline() {
        let book = Codebook::bundled();
        let b = build_baseline(&table3_history(), &book, 2013, BuildOptions::default()).unwrap();
        assert_eq!(b.year, 2001);
        assert_eq!(b.sex.description, "Male");
        assert_eq!(b.age, 34);
        assert_eq!(b.residence.description, "Halmstad");
        assert_eq!(b.family_relation.description, "Married");
        assert_eq!(b.child_status.description, "No children");
        assert_eq!(b.education_level.description, "University degree");
        assert_eq!(b.education_field.description, "Economics");
        assert_eq!(b.occupation.description, "Financial assistant");
        assert_eq!(b.industry.description, "Accounting and bookkeeping");
        assert_eq!(b.residence.code, "138");
    }

    #[test]
    fn single_record_baseline_equals_record() {
        let book = Codebook::bundled();
        let mut h = table3_history();
        h.records.truncate(1);
        let b = build_baseline(&h, &book, 2013, BuildOptions::default()).unwrap();
        let rec = &h.records[0];
        assert_eq!((b.year, b.age, b.income_percentile), (rec.year, rec.age, rec.income_percentile));
        assert_eq!(b.occupation.code, rec.occupation);
    }

    #[test]
    fn history_after_split_is_empty_window() {
        let book = Codebook::bundled();
        let err = build_baseline(&table3_history(), &book, 2000, BuildOptions::default()).unwrap_err();
        assert!(matches!(err, TrajectoryError::EmptyWindow { split_year: 2000, .. }));
    }

    #[test]
    fn static_only_has_no_events() {
        let book = Codebook::bundled();
        let h = table3_history();
        let full = build_trajectory(&h, &book, 2013, BuildOptions::default()).unwrap();
        let stat = build_static_only(&h, &book, 2013, BuildOptions::default()).unwrap();
        assert_eq!(full.events.len(), 2);
        assert!(stat.events.is_empty());
        assert_eq!(full.baseline, stat.baseline);

        let mut constant = h.clone();
        constant.records[1].child_status = "0".into();
        constant.records[2].child_status = "0".into();
        constant.records[2].residence_municipality = "138".into();
        assert_eq!(
            build_trajectory(&constant, &book, 2013, BuildOptions::default()).unwrap(),
            build_static_only(&constant, &book, 2013, BuildOptions::default()).unwrap()
        );
    }

    #[test]
    fn unknown_code_propagates_unless_lenient() {
        let book = Codebook::bundled();
        let mut h = table3_history();
        h.records[0].family_relation = "9".into();
        let err = build_trajectory(&h, &book, 2013, BuildOptions::default()).unwrap_err();
        assert!(matches!(err, TrajectoryError::Codebook { field: "family_rel", year: 2001, .. }));
        let lenient = BuildOptions { lookup: LookupMode { lenient: true, harmonize: false }, strict_codes: false };
        let t = build_trajectory(&h, &book, 2013, lenient).unwrap();
        assert_eq!(t.baseline.family_relation.description, "unknown family relation");
    }
}
