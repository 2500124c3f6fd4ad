use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codebook::{Codebook, Variable, YearRange};

/// One person's coded register row for one calendar year.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnualRecord {
    pub person_id: String,
    pub year: i32,
    pub sex: String,
    pub age: u32,
    #[serde(rename = "res_mun")]
    pub residence_municipality: String,
    #[serde(rename = "family_rel")]
    pub family_relation: String,
    pub child_status: String,
    #[serde(rename = "edu_level")]
    pub education_level: String,
    #[serde(rename = "edu_field")]
    pub education_field: String,
    #[serde(rename = "employment")]
    pub employment_status: String,
    pub occupation: String,
    pub occupation_scheme: String,
    pub industry: String,
    pub industry_scheme: String,
    #[serde(rename = "work_mun")]
    pub workplace_municipality: String,
    #[serde(rename = "lma_region")]
    pub labor_market_region: String,
    #[serde(rename = "income_pct")]
    pub income_percentile: u8,
    #[serde(rename = "income_source")]
    pub main_income_source: String,
    #[serde(rename = "gov_support")]
    pub government_support: bool,
}

/// Column order of the CSV/JSONL record schema.
pub const RECORD_COLUMNS: [&str; 19] = [
    "person_id",
    "year",
    "sex",
    "age",
    "res_mun",
    "family_rel",
    "child_status",
    "edu_level",
    "edu_field",
    "employment",
    "occupation",
    "occupation_scheme",
    "industry",
    "industry_scheme",
    "work_mun",
    "lma_region",
    "income_pct",
    "income_source",
    "gov_support",
];

impl AnnualRecord {
    /// Coded fields with the variable each one encodes and its explicit
    /// scheme tag, if the record carries one.
    pub fn coded_fields(&self) -> [(&'static str, Variable, Option<&str>, &str); 13] {
        [
            ("sex", Variable::Sex, None, &self.sex),
            ("res_mun", Variable::Municipality, None, &self.residence_municipality),
            ("family_rel", Variable::FamilyRelation, None, &self.family_relation),
            ("child_status", Variable::ChildStatus, None, &self.child_status),
            ("edu_level", Variable::EducationLevel, None, &self.education_level),
            ("edu_field", Variable::EducationField, None, &self.education_field),
            ("employment", Variable::Employment, None, &self.employment_status),
            ("occupation", Variable::Occupation, Some(&self.occupation_scheme), &self.occupation),
            ("industry", Variable::Industry, Some(&self.industry_scheme), &self.industry),
            ("work_mun", Variable::Municipality, None, &self.workplace_municipality),
            ("lma_region", Variable::LaborMarketRegion, None, &self.labor_market_region),
            ("income_source", Variable::IncomeSource, None, &self.main_income_source),
            ("gov_support", Variable::GovernmentSupport, None, self.gov_support_code()),
        ]
    }

    pub fn gov_support_code(&self) -> &'static str {
        if self.government_support {
            "1"
        } else {
            "0"
        }
    }

    /// Income decile 1..=10 derived from the percentile.
    pub fn income_decile(&self) -> u8 {
        (self.income_percentile / 10).min(9) + 1
    }

    /// Field values as strings in [`RECORD_COLUMNS`] order.
    pub fn to_row(&self) -> [String; 19] {
        [
            self.person_id.clone(),
            self.year.to_string(),
            self.sex.clone(),
            self.age.to_string(),
            self.residence_municipality.clone(),
            self.family_relation.clone(),
            self.child_status.clone(),
            self.education_level.clone(),
            self.education_field.clone(),
            self.employment_status.clone(),
            self.occupation.clone(),
            self.occupation_scheme.clone(),
            self.industry.clone(),
            self.industry_scheme.clone(),
            self.workplace_municipality.clone(),
            self.labor_market_region.clone(),
            self.income_percentile.to_string(),
            self.main_income_source.clone(),
            self.gov_support_code().to_string(),
        ]
    }
}

/// A person's records, ordered by year.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonHistory {
    pub person_id: String,
    pub records: Vec<AnnualRecord>,
}

impl PersonHistory {
    /// Builds a history, sorting the records by year.
    pub fn new(person_id: impl Into<String>, mut records: Vec<AnnualRecord>) -> PersonHistory {
        records.sort_by_key(|r| r.year);
        PersonHistory { person_id: person_id.into(), records }
    }

    pub fn first_year(&self) -> Option<i32> {
        self.records.first().map(|r| r.year)
    }

    pub fn last_year(&self) -> Option<i32> {
        self.records.last().map(|r| r.year)
    }

    /// Records observed in or before `year`.
    pub fn up_to(&self, year: i32) -> &[AnnualRecord] {
        let end = self.records.partition_point(|r| r.year <= year);
        &self.records[..end]
    }

    /// Structural and (optionally) codebook checks, in record order.
    pub fn validate(&self, rules: &ValidationRules<'_>) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        let issue = |year: i32, field: &str, message: String| ValidationIssue {
            person_id: self.person_id.clone(),
            year,
            field: field.to_string(),
            message,
        };
        for (i, rec) in self.records.iter().enumerate() {
            if rec.person_id != self.person_id {
                issues.push(issue(rec.year, "person_id", format!("record belongs to {}", rec.person_id)));
            }
            if let Some(span) = rules.span {
                if !span.contains(rec.year) {
                    issues.push(issue(
                        rec.year,
                        "year",
                        format!("outside observation span {}-{}", span.from, span.to),
                    ));
                }
            }
            if rec.income_percentile > 100 {
                issues.push(issue(rec.year, "income_pct", format!("{} not in [0, 100]", rec.income_percentile)));
            }
            if i > 0 {
                let prev = &self.records[i - 1];
                if rec.year <= prev.year {
                    issues.push(issue(rec.year, "year", format!("not strictly after {}", prev.year)));
                } else {
                    let expected = prev.age as i64 + (rec.year - prev.year) as i64;
                    if rec.age as i64 != expected {
                        issues.push(issue(
                            rec.year,
                            "age",
                            format!(
                                "age progression violated: {} in {} implies {expected}, found {}",
                                prev.age, prev.year, rec.age
                            ),
                        ));
                    }
                }
                if rec.sex != prev.sex {
                    issues.push(issue(rec.year, "sex", format!("changed from {} to {}", prev.sex, rec.sex)));
                }
            }
            if let Some(book) = rules.codebook {
                for (field, var, tag, code) in rec.coded_fields() {
                    let scheme = match book.resolve_scheme(var, rec.year) {
                        Ok(s) => s,
                        Err(e) => {
                            issues.push(issue(rec.year, field, e.to_string()));
                            continue;
                        }
                    };
                    if let Some(tag) = tag {
                        if tag != scheme {
                            issues.push(issue(
                                rec.year,
                                field,
                                format!("scheme tag {tag} but {scheme} is active in {}", rec.year),
                            ));
                            continue;
                        }
                    }
                    if let Err(e) = book.lookup(scheme, rec.year, code) {
                        issues.push(issue(rec.year, field, e.to_string()));
                    }
                }
            }
        }
        issues
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidationRules<'a> {
    /// Permitted calendar years.
    pub span: Option<YearRange>,
    /// When set, every coded field must resolve in its year-active scheme.
    pub codebook: Option<&'a Codebook>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationIssue {
    pub person_id: String,
    pub year: i32,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "person {} year {} field {}: {}", self.person_id, self.year, self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation issue(s)", self.issues.len())?;
        for issue in &self.issues {
            write!(f, "\n  {issue}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Coded excerpt rows for one person: 2001 baseline, children in 2004,
    /// a move from Halmstad to Göteborg in 2006.
    pub fn table3_history() -> PersonHistory {
        let base = AnnualRecord {
            person_id: "P1".into(),
            year: 2001,
            sex: "1".into(),
            age: 34,
            residence_municipality: "138".into(),
            family_relation: "1".into(),
            child_status: "0".into(),
            education_level: "6".into(),
            education_field: "343".into(),
            employment_status: "1".into(),
            occupation: "4120".into(),
            occupation_scheme: "SSYK2001".into(),
            industry: "6910".into(),
            industry_scheme: "SNI2002".into(),
            workplace_municipality: "138".into(),
            labor_market_region: "4".into(),
            income_percentile: 62,
            main_income_source: "1".into(),
            government_support: false,
        };
        let y2004 = AnnualRecord { year: 2004, age: 37, child_status: "1".into(), ..base.clone() };
        let y2006 = AnnualRecord { year: 2006, age: 39, residence_municipality: "148".into(), ..y2004.clone() };
        PersonHistory::new("P1", vec![base, y2004, y2006])
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::table3_history;
    use super::*;

    #[test]
    fn table3_fixture_is_valid() {
        let book = Codebook::bundled();
        let rules = ValidationRules { span: Some(YearRange::new(2001, 2017)), codebook: Some(&book) };
        assert!(table3_history().validate(&rules).is_empty());
    }

    #[test]
    fn age_regression_is_reported() {
        let mut h = table3_history();
        h.records[1].age = 30;
        let issues = h.validate(&ValidationRules::default());
        assert_eq!(issues.len(), 2, "{issues:?}");
        assert_eq!(issues[0].field, "age");
        assert!(issues[0].message.contains("age progression"));
        assert_eq!(issues[0].year, 2004);
    }

    #[test]
    fn duplicate_year_and_sex_change() {
        let mut h = table3_history();
        h.records[2].year = 2004;
        h.records[2].sex = "2".into();
        let fields: Vec<String> = h.validate(&ValidationRules::default()).into_iter().map(|i| i.field).collect();
        assert_eq!(fields, ["year", "sex"]);
    }

    #[test]
    fn codes_checked_against_active_scheme() {
        let book = Codebook::bundled();
        let rules = ValidationRules { span: None, codebook: Some(&book) };
        let mut h = table3_history();
        h.records[0].residence_municipality = "999".into();
        h.records[1].industry_scheme = "SNI2007".into();
        let issues = h.validate(&rules);
        assert_eq!(issues.len(), 2);
        assert_eq!((issues[0].year, issues[0].field.as_str()), (2001, "res_mun"));
        assert_eq!((issues[1].year, issues[1].field.as_str()), (2004, "industry"));
    }

    #[test]
    fn span_and_income_bounds() {
        let mut h = table3_history();
        h.records[0].income_percentile = 101;
        let rules = ValidationRules { span: Some(YearRange::new(2002, 2017)), codebook: None };
        let fields: Vec<String> = h.validate(&rules).into_iter().map(|i| i.field).collect();
        assert_eq!(fields, ["year", "income_pct"]);
    }

    #[test]
    fn up_to_slices_by_year() {
        let h = table3_history();
        assert_eq!(h.up_to(2000).len(), 0);
        assert_eq!(h.up_to(2004).len(), 2);
        assert_eq!(h.up_to(2030).len(), 3);
    }
}
