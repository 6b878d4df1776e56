//! Shared data model: test cases, executions, CI cycles, project histories
//! and the tie-aware [`RankedSuite`] every prioritizer returns.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Name of a test case (a test class in RTPTorrent-style data).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TestCaseId(String);

impl TestCaseId {
    pub fn new(name: impl Into<String>) -> Result<Self, ModelError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ModelError::EmptyTestName);
        }
        Ok(TestCaseId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TestCaseId {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        TestCaseId::new(value)
    }
}

impl From<TestCaseId> for String {
    fn from(id: TestCaseId) -> String {
        id.0
    }
}

impl fmt::Display for TestCaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn is_fail(self) -> bool {
        self == Verdict::Fail
    }
}

/// One executed test case of a cycle. Durations are decimal seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TestExecution {
    case: TestCaseId,
    duration: f64,
    verdict: Verdict,
}

impl TestExecution {
    pub fn new(case: TestCaseId, duration: f64, verdict: Verdict) -> Result<Self, ModelError> {
        if !duration.is_finite() || duration < 0.0 {
            return Err(ModelError::InvalidDuration { case, duration });
        }
        Ok(TestExecution {
            case,
            duration,
            verdict,
        })
    }

    pub fn case(&self) -> &TestCaseId {
        &self.case
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }
}

/// One CI build.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    index: u64,
    job_id: String,
    commit_id: String,
    build_time: Option<f64>,
    executions: Vec<TestExecution>,
}

impl CycleRecord {
    /// Executions must be non-empty, in the project's original order and free
    /// of duplicate test cases.
    pub fn new(
        index: u64,
        job_id: impl Into<String>,
        commit_id: impl Into<String>,
        build_time: Option<f64>,
        executions: Vec<TestExecution>,
    ) -> Result<Self, ModelError> {
        if executions.is_empty() {
            return Err(ModelError::EmptyCycle { index });
        }
        if let Some(bt) = build_time {
            if !bt.is_finite() || bt < 0.0 {
                return Err(ModelError::InvalidBuildTime { index, value: bt });
            }
        }
        let mut seen = BTreeSet::new();
        for e in &executions {
            if !seen.insert(&e.case) {
                return Err(ModelError::DuplicateInCycle {
                    index,
                    case: e.case.clone(),
                });
            }
        }
        Ok(CycleRecord {
            index,
            job_id: job_id.into(),
            commit_id: commit_id.into(),
            build_time,
            executions,
        })
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn job_id(&self) -> &str {
        &self.job_id
    }

    pub fn commit_id(&self) -> &str {
        &self.commit_id
    }

    pub fn build_time(&self) -> Option<f64> {
        self.build_time
    }

    pub fn executions(&self) -> &[TestExecution] {
        &self.executions
    }

    pub fn len(&self) -> usize {
        self.executions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.executions.is_empty()
    }

    /// A cycle fails when at least one execution fails.
    pub fn is_failed(&self) -> bool {
        self.executions.iter().any(|e| e.verdict.is_fail())
    }

    pub fn failure_count(&self) -> usize {
        self.executions.iter().filter(|e| e.verdict.is_fail()).count()
    }

    pub fn total_duration(&self) -> f64 {
        self.executions.iter().map(|e| e.duration).sum()
    }

    /// Test case ids in original order.
    pub fn suite(&self) -> Vec<TestCaseId> {
        self.executions.iter().map(|e| e.case.clone()).collect()
    }

    pub(crate) fn set_build_time(&mut self, build_time: Option<f64>) {
        self.build_time = build_time;
    }
}

/// Chronologically ordered cycles of one subject program.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProjectHistory {
    project: String,
    cycles: Vec<CycleRecord>,
    sources: BTreeMap<TestCaseId, String>,
}

impl ProjectHistory {
    pub fn new(project: impl Into<String>, cycles: Vec<CycleRecord>) -> Result<Self, ModelError> {
        for pair in cycles.windows(2) {
            if pair[1].index <= pair[0].index {
                return Err(ModelError::NonIncreasingIndex {
                    previous: pair[0].index,
                    next: pair[1].index,
                });
            }
        }
        Ok(ProjectHistory {
            project: project.into(),
            cycles,
            sources: BTreeMap::new(),
        })
    }

    pub fn project(&self) -> &str {
        &self.project
    }

    pub fn cycles(&self) -> &[CycleRecord] {
        &self.cycles
    }

    pub(crate) fn cycles_mut(&mut self) -> &mut [CycleRecord] {
        &mut self.cycles
    }

    pub fn sources(&self) -> &BTreeMap<TestCaseId, String> {
        &self.sources
    }

    pub fn with_sources(mut self, sources: BTreeMap<TestCaseId, String>) -> Self {
        self.sources = sources;
        self
    }

    pub fn cycle(&self, index: u64) -> Option<&CycleRecord> {
        self.cycles
            .binary_search_by_key(&index, |c| c.index)
            .ok()
            .map(|i| &self.cycles[i])
    }

    pub fn failed_cycle_count(&self) -> usize {
        self.cycles.iter().filter(|c| c.is_failed()).count()
    }

    /// Keep only cycles with at least `min_suite_size` executions. Indices are
    /// preserved, not renumbered.
    pub fn filter_for_evaluation(&self, min_suite_size: usize) -> ProjectHistory {
        ProjectHistory {
            project: self.project.clone(),
            cycles: self
                .cycles
                .iter()
                .filter(|c| c.len() >= min_suite_size)
                .cloned()
                .collect(),
            sources: self.sources.clone(),
        }
    }
}

/// An ordered partition of a suite into tie groups.
///
/// Groups are sets: the order of ids inside a group carries no meaning and is
/// ignored by equality. [`flatten`] decides the final within-group order.
#[derive(Debug, Clone, Default)]
pub struct RankedSuite {
    groups: Vec<Vec<TestCaseId>>,
}

impl RankedSuite {
    pub fn from_groups(groups: Vec<Vec<TestCaseId>>) -> Self {
        RankedSuite { groups }
    }

    /// A total order: one singleton group per id.
    pub fn singletons<I: IntoIterator<Item = TestCaseId>>(order: I) -> Self {
        RankedSuite {
            groups: order.into_iter().map(|id| alloc::vec![id]).collect(),
        }
    }

    /// Everything tied.
    pub fn single_group(cases: Vec<TestCaseId>) -> Self {
        if cases.is_empty() {
            return RankedSuite::default();
        }
        RankedSuite {
            groups: alloc::vec![cases],
        }
    }

    pub fn groups(&self) -> &[Vec<TestCaseId>] {
        &self.groups
    }

    pub fn into_groups(self) -> Vec<Vec<TestCaseId>> {
        self.groups
    }

    pub fn case_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// True when no ties remain.
    pub fn is_total(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }

    /// Group position of every case.
    pub fn group_index(&self) -> BTreeMap<&TestCaseId, usize> {
        let mut map = BTreeMap::new();
        for (i, g) in self.groups.iter().enumerate() {
            for id in g {
                map.insert(id, i);
            }
        }
        map
    }
}

impl PartialEq for RankedSuite {
    fn eq(&self, other: &Self) -> bool {
        self.groups.len() == other.groups.len()
            && self.groups.iter().zip(&other.groups).all(|(a, b)| {
                a.len() == b.len() && {
                    let a: BTreeSet<_> = a.iter().collect();
                    b.iter().all(|id| a.contains(id))
                }
            })
    }
}

impl Eq for RankedSuite {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RankingViolation {
    #[error("test case `{0}` is prioritized twice")]
    DuplicateCase(TestCaseId),
    #[error("test case `{0}` is missing from the ranking")]
    MissingCase(TestCaseId),
    #[error("test case `{0}` is not part of the suite")]
    ForeignCase(TestCaseId),
    #[error("ranking group {0} is empty")]
    EmptyGroup(usize),
}

/// Checks that `ranking` partitions `suite` exactly.
pub fn validate_ranking(suite: &[TestCaseId], ranking: &RankedSuite) -> Result<(), RankingViolation> {
    let members: BTreeSet<&TestCaseId> = suite.iter().collect();
    let mut seen = BTreeSet::new();
    for (i, group) in ranking.groups.iter().enumerate() {
        if group.is_empty() {
            return Err(RankingViolation::EmptyGroup(i));
        }
        for id in group {
            if !seen.insert(id) {
                return Err(RankingViolation::DuplicateCase(id.clone()));
            }
            if !members.contains(id) {
                return Err(RankingViolation::ForeignCase(id.clone()));
            }
        }
    }
    if let Some(missing) = suite.iter().find(|id| !seen.contains(id)) {
        return Err(RankingViolation::MissingCase(missing.clone()));
    }
    Ok(())
}

/// How ties are resolved when a ranking is turned into an executable order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Keep the cycle's original order inside each group.
    #[default]
    Stable,
    /// Shuffle every group with a generator seeded from `seed`.
    Random { seed: u64 },
}

/// Total order respecting the group order of a valid `ranking`.
///
/// `original` is the suite in its original cycle order; it defines the stable
/// order inside groups (and the starting point of random shuffles).
pub fn flatten(ranking: &RankedSuite, original: &[TestCaseId], policy: TieBreak) -> Vec<TestCaseId> {
    let position: BTreeMap<&TestCaseId, usize> =
        original.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let mut rng = match policy {
        TieBreak::Stable => None,
        TieBreak::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut out = Vec::with_capacity(ranking.case_count());
    for group in &ranking.groups {
        let mut group: Vec<&TestCaseId> = group.iter().collect();
        group.sort_by_key(|id| position.get(id).copied().unwrap_or(usize::MAX));
        if let Some(rng) = rng.as_mut() {
            group.shuffle(rng);
        }
        out.extend(group.into_iter().cloned());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("test case name must not be empty")]
    EmptyTestName,
    #[error("test case `{case}` has invalid duration {duration}")]
    InvalidDuration { case: TestCaseId, duration: f64 },
    #[error("cycle {index} has invalid build time {value}")]
    InvalidBuildTime { index: u64, value: f64 },
    #[error("cycle {index} has no executions")]
    EmptyCycle { index: u64 },
    #[error("test case `{case}` appears twice in cycle {index}")]
    DuplicateInCycle { index: u64, case: TestCaseId },
    #[error("cycle index {next} does not follow {previous}")]
    NonIncreasingIndex { previous: u64, next: u64 },
}
