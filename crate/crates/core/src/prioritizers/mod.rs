//! Base (non-combinator) approaches.

pub(crate) mod code;
mod history;
mod simple;

use alloc::vec::Vec;

pub use code::{tokenize, vector_distance, CodeDistOrder, CodeVector, DistanceError, DistanceMetric, StartPolicy};
pub use history::{ExeTimeOrder, FailDensityOrder, FoldFailsOrder, Folder, RecentnessOrder, ZERO_DURATION_GUARD};
pub use simple::{BaseOrder, RandomOrder};

use crate::model::{RankedSuite, TestCaseId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Ascending,
    Descending,
}

/// Sorts `cases` by score (stable w.r.t. the given order) and groups runs of
/// scores within `tolerance` of the run's first score.
pub(crate) fn group_by_score(
    cases: &[TestCaseId],
    scores: &[f64],
    direction: Direction,
    tolerance: f64,
) -> RankedSuite {
    debug_assert_eq!(cases.len(), scores.len());
    let mut idx: Vec<usize> = (0..cases.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = scores[a].total_cmp(&scores[b]);
        match direction {
            Direction::Ascending => ord,
            Direction::Descending => ord.reverse(),
        }
    });
    let mut groups: Vec<Vec<TestCaseId>> = Vec::new();
    let mut head = f64::NAN;
    for i in idx {
        let s = scores[i];
        let same = match groups.last() {
            Some(_) => (s - head).abs() <= tolerance * head.abs().max(1.0) || s == head,
            None => false,
        };
        if same {
            groups.last_mut().unwrap().push(cases[i].clone());
        } else {
            head = s;
            groups.push(alloc::vec![cases[i].clone()]);
        }
    }
    RankedSuite::from_groups(groups)
}
