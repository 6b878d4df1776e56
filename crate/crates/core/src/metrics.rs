//! Effectiveness and applicability metrics.
//!
//! Every failing execution counts as one distinct fault, revealed by exactly
//! that execution. Orders are full permutations of a cycle's suite.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::model::{CycleRecord, TestCaseId};

/// Bounds closer than this are treated as equal.
pub const DEGENERATE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("cycle has no failing test")]
    NoFaults,
    #[error("cycle has zero total duration")]
    ZeroTotalTime,
    #[error("metric bounds coincide, rectification undefined")]
    DegenerateBounds,
    #[error("order is not a permutation of the cycle's suite")]
    OrderMismatch,
    #[error("no failing cycles")]
    NoFailingCycles,
    #[error("baseline testing time is zero")]
    ZeroBaselineTime,
    #[error("no data to aggregate")]
    NoData,
    #[error("executed prefix {prefix} exceeds suite size {n}")]
    PrefixOutOfRange { prefix: usize, n: usize },
    #[error("{left} values against {right} values")]
    LengthMismatch { left: usize, right: usize },
}

/// One position of an evaluated order.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Slot {
    duration: f64,
    fails: bool,
}

fn arrange(order: &[TestCaseId], cycle: &CycleRecord) -> Result<Vec<Slot>, MetricError> {
    let by_case: BTreeMap<&TestCaseId, Slot> = cycle
        .executions()
        .iter()
        .map(|e| {
            (
                e.case(),
                Slot {
                    duration: e.duration(),
                    fails: e.verdict().is_fail(),
                },
            )
        })
        .collect();
    if order.len() != by_case.len() {
        return Err(MetricError::OrderMismatch);
    }
    let mut seen = alloc::collections::BTreeSet::new();
    order
        .iter()
        .map(|id| {
            if !seen.insert(id) {
                return Err(MetricError::OrderMismatch);
            }
            by_case.get(id).copied().ok_or(MetricError::OrderMismatch)
        })
        .collect()
}

fn fault_ranks(slots: &[Slot]) -> impl Iterator<Item = usize> + '_ {
    slots.iter().enumerate().filter(|(_, s)| s.fails).map(|(i, _)| i + 1)
}

fn apfd_from_ranks(n: usize, m: usize, rank_sum: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.0 - rank_sum / (n * m) + 1.0 / (2.0 * n)
}

/// Average percentage of faults detected.
pub fn apfd(order: &[TestCaseId], cycle: &CycleRecord) -> Result<f64, MetricError> {
    let slots = arrange(order, cycle)?;
    let m = cycle.failure_count();
    if m == 0 {
        return Err(MetricError::NoFaults);
    }
    let sum: usize = fault_ranks(&slots).sum();
    Ok(apfd_from_ranks(slots.len(), m, sum as f64))
}

fn apfd_c_of(slots: &[Slot]) -> Result<f64, MetricError> {
    let m = slots.iter().filter(|s| s.fails).count();
    if m == 0 {
        return Err(MetricError::NoFaults);
    }
    let total: f64 = slots.iter().map(|s| s.duration).sum();
    if total <= 0.0 {
        return Err(MetricError::ZeroTotalTime);
    }
    let mut suffix = 0.0;
    let mut acc = 0.0;
    for s in slots.iter().rev() {
        suffix += s.duration;
        if s.fails {
            acc += suffix - s.duration / 2.0;
        }
    }
    Ok(acc / (total * m as f64))
}

/// Cost-cognizant APFD with equal fault severities.
pub fn apfd_c(order: &[TestCaseId], cycle: &CycleRecord) -> Result<f64, MetricError> {
    apfd_c_of(&arrange(order, cycle)?)
}

/// Normalized APFD when only the first `executed_prefix` tests run. Faults
/// outside the prefix count as undetected; `n` stays the full suite size.
pub fn napfd(order: &[TestCaseId], cycle: &CycleRecord, executed_prefix: usize) -> Result<f64, MetricError> {
    let slots = arrange(order, cycle)?;
    let n = slots.len();
    if executed_prefix > n {
        return Err(MetricError::PrefixOutOfRange {
            prefix: executed_prefix,
            n,
        });
    }
    let m = cycle.failure_count();
    if m == 0 {
        return Err(MetricError::NoFaults);
    }
    let detected: Vec<usize> = fault_ranks(&slots).filter(|&r| r <= executed_prefix).collect();
    let p = detected.len() as f64 / m as f64;
    let sum: usize = detected.iter().sum();
    let (nf, mf) = (n as f64, m as f64);
    Ok(p - sum as f64 / (nf * mf) + p / (2.0 * nf))
}

/// `(min, max)` of APFD over all orders of the cycle.
pub fn apfd_bounds(cycle: &CycleRecord) -> Result<(f64, f64), MetricError> {
    let n = cycle.len();
    let m = cycle.failure_count();
    if m == 0 {
        return Err(MetricError::NoFaults);
    }
    let best = m * (m + 1) / 2;
    let worst = (n - m + 1..=n).sum::<usize>();
    Ok((apfd_from_ranks(n, m, worst as f64), apfd_from_ranks(n, m, best as f64)))
}

/// `(min, max)` of APFD_C over all orders of the cycle.
///
/// The maximum puts failing tests first, shortest first; the minimum puts
/// them last, longest first. Passing tests' relative order is irrelevant.
pub fn apfd_c_bounds(cycle: &CycleRecord) -> Result<(f64, f64), MetricError> {
    let slots: Vec<Slot> = cycle
        .executions()
        .iter()
        .map(|e| Slot {
            duration: e.duration(),
            fails: e.verdict().is_fail(),
        })
        .collect();
    let (mut failing, passing): (Vec<Slot>, Vec<Slot>) = slots.into_iter().partition(|s| s.fails);
    failing.sort_by(|a, b| a.duration.total_cmp(&b.duration));
    let best: Vec<Slot> = failing.iter().chain(&passing).copied().collect();
    let worst: Vec<Slot> = passing.iter().chain(failing.iter().rev()).copied().collect();
    Ok((apfd_c_of(&worst)?, apfd_c_of(&best)?))
}

/// Min-max rectification of `value` into `[0, 1]`.
pub fn rectify(value: f64, (min, max): (f64, f64)) -> Result<f64, MetricError> {
    if max - min <= DEGENERATE_TOLERANCE {
        return Err(MetricError::DegenerateBounds);
    }
    Ok(((value - min) / (max - min)).clamp(0.0, 1.0))
}

/// Rectified APFD.
pub fn rapfd(order: &[TestCaseId], cycle: &CycleRecord) -> Result<f64, MetricError> {
    rectify(apfd(order, cycle)?, apfd_bounds(cycle)?)
}

/// Rectified APFD_C.
pub fn rapfd_c(order: &[TestCaseId], cycle: &CycleRecord) -> Result<f64, MetricError> {
    rectify(apfd_c(order, cycle)?, apfd_c_bounds(cycle)?)
}

/// Normalized time reduction over failing cycles, given
/// `(full_time, time_to_first_fault)` per cycle.
pub fn ntr(cycles: &[(f64, f64)]) -> Result<f64, MetricError> {
    if cycles.is_empty() {
        return Err(MetricError::NoFailingCycles);
    }
    let full: f64 = cycles.iter().map(|c| c.0).sum();
    if full <= 0.0 {
        return Err(MetricError::ZeroTotalTime);
    }
    let saved: f64 = cycles.iter().map(|(full, first)| full - first).sum();
    Ok(saved / full)
}

/// Time from the start of the run to the end of the first failing test.
pub fn time_to_first_fault(order: &[TestCaseId], cycle: &CycleRecord) -> Result<Option<f64>, MetricError> {
    let mut elapsed = 0.0;
    for s in arrange(order, cycle)? {
        elapsed += s.duration;
        if s.fails {
            return Ok(Some(elapsed));
        }
    }
    Ok(None)
}

/// Timing inputs of one cycle, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleTiming {
    pub prioritization_time: f64,
    pub build_time: f64,
    pub time_to_first_fault: Option<f64>,
    pub full_execution_time: f64,
}

impl CycleTiming {
    /// Timing of `order` on `cycle`; an absent build time counts as zero.
    pub fn of(order: &[TestCaseId], cycle: &CycleRecord, prioritization_time: f64) -> Result<Self, MetricError> {
        Ok(CycleTiming {
            prioritization_time,
            build_time: cycle.build_time().unwrap_or(0.0),
            time_to_first_fault: time_to_first_fault(order, cycle)?,
            full_execution_time: cycle.total_duration(),
        })
    }
}

/// Prioritization overhead not hidden by the build, plus time until the
/// first failure (or the whole run when nothing fails).
pub fn testing_time(t: &CycleTiming) -> f64 {
    let overhead = (t.prioritization_time - t.build_time).max(0.0);
    overhead + t.time_to_first_fault.unwrap_or(t.full_execution_time)
}

/// Actual time reduction relative to the baseline, cycle by cycle.
pub fn atr(approach: &[f64], baseline: &[f64]) -> Result<f64, MetricError> {
    if approach.len() != baseline.len() {
        return Err(MetricError::LengthMismatch {
            left: approach.len(),
            right: baseline.len(),
        });
    }
    let base: f64 = baseline.iter().sum();
    if base <= 0.0 {
        return Err(MetricError::ZeroBaselineTime);
    }
    Ok(1.0 - approach.iter().sum::<f64>() / base)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub count: usize,
}

/// Mean and median; never imputes a value for an empty population.
pub fn aggregate(values: &[f64]) -> Result<Summary, MetricError> {
    if values.is_empty() {
        return Err(MetricError::NoData);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(Summary {
        mean: values.iter().sum::<f64>() / n as f64,
        median,
        count: n,
    })
}
