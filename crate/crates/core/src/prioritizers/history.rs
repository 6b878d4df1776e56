//! History-based approaches: recentness counters, folded failures, smoothed
//! execution times and failure density.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{group_by_score, Direction};
use crate::approach::{Approach, ApproachError, CycleContext};
use crate::model::{RankedSuite, TestCaseId, TestExecution};
use crate::smoothing::{Alpha, SmoothedSeries};

/// Smoothed durations below this many seconds count as this value when
/// dividing in [`FailDensityOrder`].
pub const ZERO_DURATION_GUARD: f64 = 1e-9;

/// Cases seen in fewer previous cycles run first.
#[derive(Debug, Clone, Default)]
pub struct RecentnessOrder {
    seen: BTreeMap<TestCaseId, u64>,
}

impl RecentnessOrder {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Approach for RecentnessOrder {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        let scores: Vec<f64> = ctx
            .cases()
            .iter()
            .map(|c| self.seen.get(c).copied().unwrap_or(0) as f64)
            .collect();
        Ok(group_by_score(ctx.cases(), &scores, Direction::Ascending, 0.0))
    }

    fn observe(&mut self, results: &[TestExecution]) {
        for e in results {
            *self.seen.entry(e.case().clone()).or_insert(0) += 1;
        }
    }

    fn reset(&mut self) {
        self.seen.clear();
    }
}

/// How per-cycle failure indicators are folded into a score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Folder {
    /// Total number of failed cycles.
    Sum,
    /// Exponentially smoothed indicator (DFE).
    ExpSmooth(Alpha),
}

/// Cases with the highest folded failure score run first.
#[derive(Debug, Clone)]
pub struct FoldFailsOrder {
    folder: Folder,
    totals: BTreeMap<TestCaseId, f64>,
    smoothed: SmoothedSeries,
}

impl FoldFailsOrder {
    pub fn new(folder: Folder) -> Self {
        let alpha = match folder {
            Folder::ExpSmooth(a) => a,
            Folder::Sum => Alpha::default(),
        };
        FoldFailsOrder {
            folder,
            totals: BTreeMap::new(),
            smoothed: SmoothedSeries::new(alpha),
        }
    }

    pub fn score(&self, case: &TestCaseId) -> f64 {
        match self.folder {
            Folder::Sum => self.totals.get(case).copied().unwrap_or(0.0),
            Folder::ExpSmooth(_) => self.smoothed.get(case),
        }
    }
}

impl Approach for FoldFailsOrder {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        let scores: Vec<f64> = ctx.cases().iter().map(|c| self.score(c)).collect();
        Ok(group_by_score(ctx.cases(), &scores, Direction::Descending, 0.0))
    }

    fn observe(&mut self, results: &[TestExecution]) {
        for e in results {
            let failed = if e.verdict().is_fail() { 1.0 } else { 0.0 };
            match self.folder {
                Folder::Sum => *self.totals.entry(e.case().clone()).or_insert(0.0) += failed,
                Folder::ExpSmooth(_) => self.smoothed.update(e.case(), failed),
            }
        }
    }

    fn reset(&mut self) {
        self.totals.clear();
        self.smoothed.clear();
    }
}

/// Cheapest smoothed execution time first; unseen cases score 0 and lead.
#[derive(Debug, Clone)]
pub struct ExeTimeOrder {
    durations: SmoothedSeries,
}

impl ExeTimeOrder {
    pub fn new(alpha: Alpha) -> Self {
        ExeTimeOrder {
            durations: SmoothedSeries::new(alpha),
        }
    }

    pub fn score(&self, case: &TestCaseId) -> f64 {
        self.durations.get(case)
    }
}

impl Approach for ExeTimeOrder {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        let scores: Vec<f64> = ctx.cases().iter().map(|c| self.score(c)).collect();
        Ok(group_by_score(ctx.cases(), &scores, Direction::Ascending, 0.0))
    }

    fn observe(&mut self, results: &[TestExecution]) {
        for e in results {
            self.durations.update(e.case(), e.duration());
        }
    }

    fn reset(&mut self) {
        self.durations.clear();
    }
}

/// Highest smoothed-failures over smoothed-duration quotient first.
#[derive(Debug, Clone)]
pub struct FailDensityOrder {
    failures: SmoothedSeries,
    durations: SmoothedSeries,
}

impl FailDensityOrder {
    pub fn new(alpha_fail: Alpha, alpha_time: Alpha) -> Self {
        FailDensityOrder {
            failures: SmoothedSeries::new(alpha_fail),
            durations: SmoothedSeries::new(alpha_time),
        }
    }

    pub fn score(&self, case: &TestCaseId) -> f64 {
        self.failures.get(case) / self.durations.get(case).max(ZERO_DURATION_GUARD)
    }
}

impl Approach for FailDensityOrder {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        let scores: Vec<f64> = ctx.cases().iter().map(|c| self.score(c)).collect();
        Ok(group_by_score(ctx.cases(), &scores, Direction::Descending, 0.0))
    }

    fn observe(&mut self, results: &[TestExecution]) {
        for e in results {
            let failed = if e.verdict().is_fail() { 1.0 } else { 0.0 };
            self.failures.update(e.case(), failed);
            self.durations.update(e.case(), e.duration());
        }
    }

    fn reset(&mut self) {
        self.failures.clear();
        self.durations.clear();
    }
}
