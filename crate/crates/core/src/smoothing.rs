//! Exponential smoothing of per-case observations:
//! `P(0) = 0`, `P(k) = alpha * f(k) + (1 - alpha) * P(k - 1)`.

use alloc::collections::BTreeMap;

use thiserror::Error;

use crate::model::TestCaseId;

/// Recommended smoothing factor when none is configured.
pub const DEFAULT_ALPHA: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("smoothing factor {0} is outside (0, 1]")]
pub struct AlphaOutOfRange(pub f64);

/// Smoothing factor in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self, AlphaOutOfRange> {
        if value > 0.0 && value <= 1.0 {
            Ok(Alpha(value))
        } else {
            Err(AlphaOutOfRange(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Alpha {
    fn default() -> Self {
        Alpha(DEFAULT_ALPHA)
    }
}

pub fn exp_smooth_step(prev: f64, alpha: f64, observation: f64) -> Result<f64, AlphaOutOfRange> {
    let alpha = Alpha::new(alpha)?;
    Ok(smooth(prev, alpha, observation))
}

#[inline]
fn smooth(prev: f64, alpha: Alpha, observation: f64) -> f64 {
    alpha.0 * observation + (1.0 - alpha.0) * prev
}

/// One smoothed series per test case, lazily starting at 0.
#[derive(Debug, Clone, Default)]
pub struct SmoothedSeries {
    alpha: Alpha,
    current: BTreeMap<TestCaseId, f64>,
}

impl SmoothedSeries {
    pub fn new(alpha: Alpha) -> Self {
        SmoothedSeries {
            alpha,
            current: BTreeMap::new(),
        }
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn update(&mut self, case: &TestCaseId, observation: f64) {
        let alpha = self.alpha;
        let slot = match self.current.get_mut(case) {
            Some(slot) => slot,
            None => self.current.entry(case.clone()).or_insert(0.0),
        };
        *slot = smooth(*slot, alpha, observation);
    }

    pub fn get(&self, case: &TestCaseId) -> f64 {
        self.current.get(case).copied().unwrap_or(0.0)
    }

    pub fn clear(&mut self) {
        self.current.clear();
    }
}
