//! Coded annual register records: schema, validation, file I/O, synthetic
//! populations and cohort selection.

mod cohort;
mod io;
mod record;
mod synth;

pub use cohort::{cohort_filter, in_cohort};
pub use io::{load_records, read_records, write_records, LoadError, LoadOptions, RecordFormat};
pub use record::{AnnualRecord, PersonHistory, ValidationIssue, ValidationReport, ValidationRules, RECORD_COLUMNS};
pub use synth::{generate_population, ConfigError, SynthConfig, SynthPopulation};

#[cfg(test)]
pub(crate) use record::fixtures;
