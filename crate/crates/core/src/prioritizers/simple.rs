use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::approach::{Approach, ApproachError, CycleContext};
use crate::model::{RankedSuite, TestExecution};

/// The suite in its original arrangement. Stateless.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaseOrder;

impl Approach for BaseOrder {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        Ok(RankedSuite::singletons(ctx.cases().iter().cloned()))
    }

    fn observe(&mut self, _results: &[TestExecution]) {}

    fn reset(&mut self) {}
}

/// Uniform random permutation per cycle.
///
/// The instance seed drives a stream of per-cycle sub-seeds; a new sub-seed is
/// drawn after every observed cycle, so ranking twice without feedback gives
/// the same permutation.
#[derive(Debug, Clone)]
pub struct RandomOrder {
    seed: u64,
    stream: ChaCha8Rng,
    current: u64,
}

impl RandomOrder {
    pub fn new(seed: u64) -> Self {
        let mut stream = ChaCha8Rng::seed_from_u64(seed);
        let current = stream.next_u64();
        RandomOrder {
            seed,
            stream,
            current,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Approach for RandomOrder {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        let mut order = ctx.cases().to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.current));
        Ok(RankedSuite::singletons(order))
    }

    fn observe(&mut self, _results: &[TestExecution]) {
        self.current = self.stream.next_u64();
    }

    fn reset(&mut self) {
        *self = RandomOrder::new(self.seed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{flatten, TieBreak};
    use alloc::vec::Vec;

    #[test]
    fn base_order_is_identity() {
        let suite = ids(&["b", "a", "c"]);
        let mut base = BaseOrder;
        let ctx = CycleContext::new(&suite);
        assert_eq!(base.rank(&ctx).unwrap(), ranking(&[&["b"], &["a"], &["c"]]));
        base.observe(&[exec("a", 1.0, true)]);
        base.reset();
        assert_eq!(base.rank(&ctx).unwrap(), ranking(&[&["b"], &["a"], &["c"]]));
    }

    fn replay(seed: u64) -> Vec<Vec<crate::model::TestCaseId>> {
        let suite = ids(&["a", "b", "c", "d", "e"]);
        let mut r = RandomOrder::new(seed);
        (0..5)
            .map(|_| {
                let ctx = CycleContext::new(&suite);
                let order = flatten(&r.rank(&ctx).unwrap(), &suite, TieBreak::Stable);
                r.observe(&[]);
                order
            })
            .collect()
    }

    #[test]
    fn random_order_is_deterministic_per_seed() {
        assert_eq!(replay(3), replay(3));
        assert_ne!(replay(3), replay(4));
        let cycles = replay(3);
        assert!(cycles.windows(2).any(|w| w[0] != w[1]), "fresh sub-seed per cycle");
    }

    #[test]
    fn random_order_rank_is_repeatable_and_resettable() {
        let suite = ids(&["a", "b", "c", "d", "e"]);
        let ctx = CycleContext::new(&suite);
        let mut r = RandomOrder::new(11);
        let first = r.rank(&ctx).unwrap();
        assert_eq!(r.rank(&ctx).unwrap(), first);
        r.observe(&[]);
        r.reset();
        assert_eq!(r.rank(&ctx).unwrap(), first);
    }

    #[test]
    fn random_order_single_case() {
        let suite = ids(&["only"]);
        let mut r = RandomOrder::new(0);
        assert_eq!(r.rank(&CycleContext::new(&suite)).unwrap(), ranking(&[&["only"]]));
    }

    #[test]
    fn random_order_first_position_is_uniform() {
        // chi-square goodness of fit, 4 dof; 18.47 is the 0.999 quantile
        let suite = ids(&["a", "b", "c", "d", "e"]);
        let ctx = CycleContext::new(&suite);
        let trials = 10_000;
        let mut counts = [0usize; 5];
        for seed in 0..trials {
            let first = RandomOrder::new(seed).rank(&ctx).unwrap().groups()[0][0].clone();
            counts[suite.iter().position(|c| *c == first).unwrap()] += 1;
        }
        let expected = trials as f64 / 5.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 18.47, "chi2 = {chi2}, counts = {counts:?}");
    }
}
