//! Pure history transformations used while preparing a dataset.
//!
//! File parsing lives in the `tcp-lab` crate; [`ProjectHistory::filter_for_evaluation`]
//! covers the suite-size filter.

use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::model::ProjectHistory;

/// Sets the build time of every cycle whose job id appears in `build_times`.
///
/// Unmatched cycles end up with no build time and are counted; executions are
/// never touched.
pub fn join_build_times(
    history: &ProjectHistory,
    build_times: &BTreeMap<String, f64>,
) -> (ProjectHistory, usize) {
    let mut joined = history.clone();
    let mut mismatches = 0;
    for cycle in joined.cycles_mut() {
        let bt = build_times.get(cycle.job_id()).copied();
        if bt.is_none() {
            mismatches += 1;
        }
        cycle.set_build_time(bt);
    }
    (joined, mismatches)
}
