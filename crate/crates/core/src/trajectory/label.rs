use serde::{Deserialize, Serialize};

use super::TrajectoryError;
use crate::registerdata::PersonHistory;

/// Length of the outcome window after the split year.
pub const LABEL_WINDOW_YEARS: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MobilityLabel {
    pub person_id: String,
    pub moved: bool,
    /// Half-open window (split_year, split_year + 4].
    pub window: (i32, i32),
}

/// `moved` is true iff the residence municipality differs between two
/// consecutive observed records whose later year lies in the window. The
/// transition from the last pre-split record into the window counts.
pub fn compute_label(history: &PersonHistory, split_year: i32) -> Result<MobilityLabel, TrajectoryError> {
    let window = (split_year, split_year + LABEL_WINDOW_YEARS);
    let in_window = |y: i32| y > window.0 && y <= window.1;
    let undefined = |reason: &str| TrajectoryError::LabelUndefined {
        person_id: history.person_id.clone(),
        reason: reason.to_string(),
    };
    if history.up_to(split_year).is_empty() {
        return Err(undefined("no record at or before the split year"));
    }
    if !history.records.iter().any(|r| in_window(r.year)) {
        return Err(undefined("no record inside the outcome window"));
    }
    let moved = history
        .records
        .windows(2)
        .any(|w| in_window(w[1].year) && w[0].residence_municipality != w[1].residence_municipality);
    Ok(MobilityLabel { person_id: history.person_id.clone(), moved, window })
}
