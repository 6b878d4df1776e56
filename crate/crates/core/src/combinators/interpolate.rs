use alloc::boxed::Box;

use super::mixers::borda_over;
use crate::approach::{Approach, ApproachError, CycleContext};
use crate::model::{RankedSuite, TestExecution};

/// Which cycles advance an interpolator's progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountMode {
    /// Only cycles with at least one failing test.
    #[default]
    FailedCycles,
    AllCycles,
}

/// Progress towards a cycle-count goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cutoff {
    target: u64,
    progress: u64,
}

impl Cutoff {
    /// `None` for a zero target.
    pub fn new(target: u64) -> Option<Self> {
        (target >= 1).then_some(Cutoff { target, progress: 0 })
    }

    pub fn with_progress(mut self, progress: u64) -> Self {
        self.progress = progress;
        self
    }

    pub fn target(&self) -> u64 {
        self.target
    }

    pub fn progress(&self) -> u64 {
        self.progress
    }

    pub fn advance(&mut self) {
        self.progress = self.progress.saturating_add(1);
    }

    /// `min(progress / target, 1)`.
    pub fn fraction(&self) -> f64 {
        if self.progress >= self.target {
            1.0
        } else {
            self.progress as f64 / self.target as f64
        }
    }
}

/// `(1 - f, f)` for the interpolation fraction `f`.
pub fn interpolate_weights(cutoff: Cutoff) -> (f64, f64) {
    let f = cutoff.fraction();
    (1.0 - f, f)
}

/// Shifts weight from `before` to `after` as cycles pass, mixing the two with
/// a Borda count. Both children observe every cycle.
pub struct InterpolatedOrder {
    before: Box<dyn Approach + Send>,
    after: Box<dyn Approach + Send>,
    cutoff: Cutoff,
    count_mode: CountMode,
}

impl InterpolatedOrder {
    pub fn new(
        before: Box<dyn Approach + Send>,
        after: Box<dyn Approach + Send>,
        cutoff: Cutoff,
        count_mode: CountMode,
    ) -> Self {
        InterpolatedOrder {
            before,
            after,
            cutoff: Cutoff::new(cutoff.target).expect("target >= 1"),
            count_mode,
        }
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn before_mut(&mut self) -> &mut (dyn Approach + Send) {
        &mut *self.before
    }

    pub fn after_mut(&mut self) -> &mut (dyn Approach + Send) {
        &mut *self.after
    }
}

impl Approach for InterpolatedOrder {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        let (wb, wa) = interpolate_weights(self.cutoff);
        if wa == 0.0 {
            return self.before.rank(ctx);
        }
        if wb == 0.0 {
            return self.after.rank(ctx);
        }
        let rb = self.before.rank(ctx)?;
        let ra = self.after.rank(ctx)?;
        crate::model::validate_ranking(ctx.cases(), &rb)?;
        crate::model::validate_ranking(ctx.cases(), &ra)?;
        Ok(borda_over(ctx.cases(), &[rb, ra], &[wb, wa]))
    }

    fn observe(&mut self, results: &[TestExecution]) {
        self.before.observe(results);
        self.after.observe(results);
        let counts = match self.count_mode {
            CountMode::AllCycles => true,
            CountMode::FailedCycles => results.iter().any(|e| e.verdict().is_fail()),
        };
        if counts {
            self.cutoff.advance();
        }
    }

    fn reset(&mut self) {
        self.before.reset();
        self.after.reset();
        self.cutoff.progress = 0;
    }
}
