use serde::{Deserialize, Serialize};

use super::{resolve, BuildOptions, TrajectoryError};
use crate::codebook::{Codebook, Variable};
use crate::registerdata::{AnnualRecord, PersonHistory};

/// Change-event kinds. Declaration order is the tie order for events in the
/// same year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ResidentialMove,
    FamilyChange,
    ChildrenStatusChange,
    EducationChange,
    EmploymentChange,
    OccupationChange,
    IndustryChange,
    WorkplaceMove,
    LaborMarketMove,
    IncomeChange,
    GovernmentSupportChange,
}

impl EventKind {
    pub const ALL: [EventKind; 11] = [
        EventKind::ResidentialMove,
        EventKind::FamilyChange,
        EventKind::ChildrenStatusChange,
        EventKind::EducationChange,
        EventKind::EmploymentChange,
        EventKind::OccupationChange,
        EventKind::IndustryChange,
        EventKind::WorkplaceMove,
        EventKind::LaborMarketMove,
        EventKind::IncomeChange,
        EventKind::GovernmentSupportChange,
    ];

    /// Identifier used by template files.
    pub fn key(self) -> &'static str {
        match self {
            EventKind::ResidentialMove => "residential_move",
            EventKind::FamilyChange => "family_change",
            EventKind::ChildrenStatusChange => "children_status_change",
            EventKind::EducationChange => "education_change",
            EventKind::EmploymentChange => "employment_change",
            EventKind::OccupationChange => "occupation_change",
            EventKind::IndustryChange => "industry_change",
            EventKind::WorkplaceMove => "workplace_move",
            EventKind::LaborMarketMove => "labor_market_move",
            EventKind::IncomeChange => "income_change",
            EventKind::GovernmentSupportChange => "government_support_change",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifeEvent {
    /// Later of the two compared observed years.
    pub year: i32,
    pub kind: EventKind,
    pub from_value: String,
    pub to_value: String,
}

/// Comparison key and display text of one event variable in one record.
struct Observed {
    key: String,
    text: String,
}

fn observe(
    book: &Codebook,
    person_id: &str,
    rec: &AnnualRecord,
    kind: EventKind,
    opts: BuildOptions,
) -> Result<Observed, TrajectoryError> {
    let mode = opts.lookup;
    let r = |field, var, scheme: Option<&str>, code: &str| resolve(book, person_id, rec, field, var, scheme, code, mode);
    let by_description = |res: super::Resolved| Observed { key: res.description.clone(), text: res.description };
    Ok(match kind {
        EventKind::ResidentialMove => by_description(r("res_mun", Variable::Municipality, None, &rec.residence_municipality)?),
        EventKind::FamilyChange => by_description(r("family_rel", Variable::FamilyRelation, None, &rec.family_relation)?),
        EventKind::ChildrenStatusChange => by_description(r("child_status", Variable::ChildStatus, None, &rec.child_status)?),
        EventKind::EducationChange => {
            let level = r("edu_level", Variable::EducationLevel, None, &rec.education_level)?;
            let field = r("edu_field", Variable::EducationField, None, &rec.education_field)?;
            let text = format!("{} in {}", level.description, field.description);
            Observed { key: text.clone(), text }
        }
        EventKind::EmploymentChange => by_description(r("employment", Variable::Employment, None, &rec.employment_status)?),
        EventKind::OccupationChange => {
            let res = r("occupation", Variable::Occupation, Some(&rec.occupation_scheme), &rec.occupation)?;
            if opts.strict_codes {
                Observed { key: format!("{}:{}", rec.occupation_scheme, rec.occupation), text: res.description }
            } else {
                by_description(res)
            }
        }
        EventKind::IndustryChange => {
            let res = r("industry", Variable::Industry, Some(&rec.industry_scheme), &rec.industry)?;
            if opts.strict_codes {
                Observed { key: format!("{}:{}", rec.industry_scheme, rec.industry), text: res.description }
            } else {
                by_description(res)
            }
        }
        EventKind::WorkplaceMove => by_description(r("work_mun", Variable::Municipality, None, &rec.workplace_municipality)?),
        EventKind::LaborMarketMove => by_description(r("lma_region", Variable::LaborMarketRegion, None, &rec.labor_market_region)?),
        EventKind::IncomeChange => {
            let source = r("income_source", Variable::IncomeSource, None, &rec.main_income_source)?;
            let text = format!("{} in income decile {}", source.description, rec.income_decile());
            Observed { key: text.clone(), text }
        }
        EventKind::GovernmentSupportChange => {
            by_description(r("gov_support", Variable::GovernmentSupport, None, rec.gov_support_code())?)
        }
    })
}

/// Change events between consecutive observed records up to `split_year`,
/// ordered by (year, kind).
pub fn detect_events(
    history: &PersonHistory,
    book: &Codebook,
    split_year: i32,
    opts: BuildOptions,
) -> Result<Vec<LifeEvent>, TrajectoryError> {
    let records = history.up_to(split_year);
    let mut events = Vec::new();
    for pair in records.windows(2) {
        let (before, after) = (&pair[0], &pair[1]);
        for kind in EventKind::ALL {
            let a = observe(book, &history.person_id, before, kind, opts)?;
            let b = observe(book, &history.person_id, after, kind, opts)?;
            if a.key != b.key {
                events.push(LifeEvent { year: after.year, kind, from_value: a.text, to_value: b.text });
            }
        }
    }
    events.sort_by_key(|e| (e.year, e.kind));
    Ok(events)
}
