use super::record::PersonHistory;

/// Keeps persons observed early enough to build a trajectory and long
/// enough to compute the label: first observed year < split_year - 3 and
/// last observed year >= split_year + 2.
pub fn cohort_filter(histories: &[PersonHistory], split_year: i32) -> Vec<PersonHistory> {
    histories.iter().filter(|h| in_cohort(h, split_year)).cloned().collect()
}

pub fn in_cohort(history: &PersonHistory, split_year: i32) -> bool {
    match (history.first_year(), history.last_year()) {
        (Some(first), Some(last)) => first < split_year - 3 && last >= split_year + 2,
        _ => false,
    }
}
