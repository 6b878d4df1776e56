//! The contract shared by every prioritization approach.

use alloc::collections::BTreeMap;
use alloc::string::String;

use thiserror::Error;

use crate::model::{RankedSuite, RankingViolation, TestCaseId, TestExecution};

/// What an approach may see of a cycle before it runs: the suite in original
/// order and the (static) test sources. Durations and verdicts of the cycle
/// being ranked are not reachable from here.
#[derive(Debug, Clone, Copy)]
pub struct CycleContext<'a> {
    cases: &'a [TestCaseId],
    sources: Option<&'a BTreeMap<TestCaseId, String>>,
}

impl<'a> CycleContext<'a> {
    pub fn new(cases: &'a [TestCaseId]) -> Self {
        CycleContext {
            cases,
            sources: None,
        }
    }

    pub fn with_sources(mut self, sources: &'a BTreeMap<TestCaseId, String>) -> Self {
        self.sources = Some(sources);
        self
    }

    pub fn cases(&self) -> &'a [TestCaseId] {
        self.cases
    }

    pub fn source(&self, case: &TestCaseId) -> Option<&'a str> {
        self.sources.and_then(|s| s.get(case)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }
}

/// A stateful prioritizer.
///
/// Per cycle the driver calls [`rank`](Approach::rank) once, executes the
/// suite, then calls [`observe`](Approach::observe) once with the results.
/// [`reset`](Approach::reset) restores the freshly built state. Test cases
/// that leave the suite keep their accumulated state if they come back.
pub trait Approach {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError>;

    fn observe(&mut self, results: &[TestExecution]);

    fn reset(&mut self);
}

impl<A: Approach + ?Sized> Approach for alloc::boxed::Box<A> {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        (**self).rank(ctx)
    }

    fn observe(&mut self, results: &[TestExecution]) {
        (**self).observe(results)
    }

    fn reset(&mut self) {
        (**self).reset()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApproachError {
    #[error("sub-approach returned an invalid ranking: {0}")]
    QueueMismatch(#[from] RankingViolation),
    #[error("suite of {size} cases exceeds the configured cap of {cap}")]
    SuiteTooLarge { size: usize, cap: usize },
    #[error("{queues} queues but {weights} weights")]
    WeightMismatch { queues: usize, weights: usize },
}
