//! Mixers: merge the rankings of several sub-approaches into one.
//!
//! The free functions implement the three merging schemes on plain rankings;
//! [`MixedOrder`] wraps them around live sub-approaches.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::approach::{Approach, ApproachError, CycleContext};
use crate::model::{flatten, validate_ranking, RankedSuite, TestCaseId, TestExecution, TieBreak};
use crate::prioritizers::{group_by_score, Direction};

/// Default cap on the suite size accepted by the Schulze mixer.
pub const DEFAULT_SCHULZE_CAP: usize = 1000;

/// Borda scores closer than this (relative) are treated as tied.
pub const BORDA_TIE_TOLERANCE: f64 = 1e-9;

fn check_weights(queues: usize, weights: &[f64]) -> Result<(), ApproachError> {
    if queues != weights.len() {
        return Err(ApproachError::WeightMismatch {
            queues,
            weights: weights.len(),
        });
    }
    Ok(())
}

/// Repeatedly draws queue `i` with probability `weights[i] / sum(weights)` and
/// emits its first case not emitted yet.
///
/// Every queue must be a permutation of the first one.
pub fn random_mix(queues: &[Vec<TestCaseId>], weights: &[f64], seed: u64) -> Result<RankedSuite, ApproachError> {
    check_weights(queues.len(), weights)?;
    let Some(first) = queues.first() else {
        return Ok(RankedSuite::default());
    };
    for q in queues {
        validate_ranking(first, &RankedSuite::singletons(q.iter().cloned()))?;
    }
    let n = first.len();
    let position: alloc::collections::BTreeMap<&TestCaseId, usize> =
        first.iter().enumerate().map(|(i, id)| (id, i)).collect();
    // queues as indices into `first`
    let queues: Vec<Vec<usize>> = queues.iter().map(|q| q.iter().map(|id| position[id]).collect()).collect();
    let total: f64 = weights.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heads = alloc::vec![0usize; queues.len()];
    let mut emitted = alloc::vec![false; n];
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let draw = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        // last queue with positive weight catches rounding at the top end
        let mut pick = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            if draw < acc {
                pick = i;
                break;
            }
        }
        let queue = &queues[pick];
        while emitted[queue[heads[pick]]] {
            heads[pick] += 1;
        }
        let case = queue[heads[pick]];
        emitted[case] = true;
        out.push(first[case].clone());
    }
    Ok(RankedSuite::singletons(out))
}

/// Weighted Borda points per case of `suite`.
///
/// In every ranking the case at 0-based position `p` earns `n - 1 - p` points;
/// tied cases share the average of the positions their group spans.
pub(crate) fn borda_scores(suite: &[TestCaseId], rankings: &[RankedSuite], weights: &[f64]) -> Vec<f64> {
    let n = suite.len();
    let position: alloc::collections::BTreeMap<&TestCaseId, usize> =
        suite.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let mut scores = alloc::vec![0.0; n];
    for (ranking, &w) in rankings.iter().zip(weights) {
        let mut start = 0usize;
        for group in ranking.groups() {
            let g = group.len();
            let points = (n - 1 - start) as f64 - (g - 1) as f64 / 2.0;
            for id in group {
                scores[position[id]] += w * points;
            }
            start += g;
        }
    }
    scores
}

fn common_suite(rankings: &[RankedSuite]) -> Result<Vec<TestCaseId>, ApproachError> {
    let Some(first) = rankings.first() else {
        return Ok(Vec::new());
    };
    let suite: Vec<TestCaseId> = first.groups().iter().flatten().cloned().collect();
    for r in rankings {
        validate_ranking(&suite, r)?;
    }
    Ok(suite)
}

/// Borda count over weighted rankings; equal totals tie.
pub fn borda_mix(rankings: &[RankedSuite], weights: &[f64]) -> Result<RankedSuite, ApproachError> {
    check_weights(rankings.len(), weights)?;
    let suite = common_suite(rankings)?;
    Ok(borda_over(&suite, rankings, weights))
}

pub(crate) fn borda_over(suite: &[TestCaseId], rankings: &[RankedSuite], weights: &[f64]) -> RankedSuite {
    let scores = borda_scores(suite, rankings, weights);
    group_by_score(suite, &scores, Direction::Descending, BORDA_TIE_TOLERANCE)
}

/// Weighted pairwise preferences: `d[x][y]` sums the weights of rankings that
/// place `x` strictly before `y`.
pub(crate) fn pairwise_preferences(suite: &[TestCaseId], rankings: &[RankedSuite], weights: &[f64]) -> Vec<Vec<f64>> {
    let n = suite.len();
    let mut d = alloc::vec![alloc::vec![0.0; n]; n];
    for (ranking, &w) in rankings.iter().zip(weights) {
        let group = ranking.group_index();
        let g: Vec<usize> = suite.iter().map(|id| group[id]).collect();
        for x in 0..n {
            for y in 0..n {
                if g[x] < g[y] {
                    d[x][y] += w;
                }
            }
        }
    }
    d
}

/// Strongest-path strengths (winning-votes links, widest-path closure).
pub(crate) fn strongest_paths(d: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = d.len();
    let mut p = alloc::vec![alloc::vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && d[i][j] > d[j][i] {
                p[i][j] = d[i][j];
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for k in 0..n {
                if i != k && j != k {
                    let via = p[j][i].min(p[i][k]);
                    if via > p[j][k] {
                        p[j][k] = via;
                    }
                }
            }
        }
    }
    p
}

/// `beats[x][y]` holds when the strongest path from `x` to `y` is stronger
/// than the one back.
pub fn schulze_beats(suite: &[TestCaseId], rankings: &[RankedSuite], weights: &[f64]) -> Vec<Vec<bool>> {
    let d = pairwise_preferences(suite, rankings, weights);
    let p = strongest_paths(&d);
    let n = suite.len();
    (0..n).map(|x| (0..n).map(|y| p[x][y] > p[y][x]).collect()).collect()
}

/// Schulze method; cases are ordered by how many opponents they beat.
pub fn schulze_mix(rankings: &[RankedSuite], weights: &[f64], cap: usize) -> Result<RankedSuite, ApproachError> {
    check_weights(rankings.len(), weights)?;
    let suite = common_suite(rankings)?;
    schulze_over(&suite, rankings, weights, cap)
}

pub(crate) fn schulze_over(
    suite: &[TestCaseId],
    rankings: &[RankedSuite],
    weights: &[f64],
    cap: usize,
) -> Result<RankedSuite, ApproachError> {
    if suite.len() > cap {
        return Err(ApproachError::SuiteTooLarge { size: suite.len(), cap });
    }
    let beats = schulze_beats(suite, rankings, weights);
    let wins: Vec<f64> = beats.iter().map(|row| row.iter().filter(|&&b| b).count() as f64).collect();
    Ok(group_by_score(suite, &wins, Direction::Descending, 0.0))
}

/// Per-cycle sub-seeds drawn from one seeded stream; advanced on feedback.
#[derive(Debug, Clone)]
pub(crate) struct SeedStream {
    seed: u64,
    stream: ChaCha8Rng,
    current: u64,
}

impl SeedStream {
    pub(crate) fn new(seed: u64) -> Self {
        let mut stream = ChaCha8Rng::seed_from_u64(seed);
        let current = stream.next_u64();
        SeedStream { seed, stream, current }
    }

    pub(crate) fn current(&self) -> u64 {
        self.current
    }

    pub(crate) fn advance(&mut self) {
        self.current = self.stream.next_u64();
    }

    pub(crate) fn reset(&mut self) {
        *self = SeedStream::new(self.seed);
    }
}

#[derive(Debug, Clone)]
pub enum MixScheme {
    Random { seed: u64 },
    Borda,
    Schulze { cap: usize },
}

/// A mixer over live sub-approaches. Children with zero weight are never asked
/// to rank; feedback and resets reach every child.
pub struct MixedOrder {
    children: Vec<(Box<dyn Approach + Send>, f64)>,
    scheme: MixScheme,
    stream: SeedStream,
}

impl MixedOrder {
    pub fn new(children: Vec<(Box<dyn Approach + Send>, f64)>, scheme: MixScheme) -> Self {
        let seed = match scheme {
            MixScheme::Random { seed } => seed,
            _ => 0,
        };
        MixedOrder {
            children,
            scheme,
            stream: SeedStream::new(seed),
        }
    }
}

impl Approach for MixedOrder {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        if let MixScheme::Schulze { cap } = self.scheme {
            if ctx.len() > cap {
                return Err(ApproachError::SuiteTooLarge { size: ctx.len(), cap });
            }
        }
        let mut rankings = Vec::new();
        let mut weights = Vec::new();
        for (child, w) in &mut self.children {
            if *w > 0.0 {
                let r = child.rank(ctx)?;
                validate_ranking(ctx.cases(), &r)?;
                rankings.push(r);
                weights.push(*w);
            }
        }
        match self.scheme {
            MixScheme::Random { .. } => {
                let queues: Vec<Vec<TestCaseId>> =
                    rankings.iter().map(|r| flatten(r, ctx.cases(), TieBreak::Stable)).collect();
                random_mix(&queues, &weights, self.stream.current())
            }
            MixScheme::Borda => Ok(borda_over(ctx.cases(), &rankings, &weights)),
            MixScheme::Schulze { cap } => schulze_over(ctx.cases(), &rankings, &weights, cap),
        }
    }

    fn observe(&mut self, results: &[TestExecution]) {
        for (child, _) in &mut self.children {
            child.observe(results);
        }
        self.stream.advance();
    }

    fn reset(&mut self) {
        for (child, _) in &mut self.children {
            child.reset();
        }
        self.stream.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use alloc::vec;

    #[test]
    fn random_mix_degenerate_weights() {
        let q1 = ids(&["a", "b", "c", "d"]);
        let q2 = ids(&["d", "c", "b", "a"]);
        for seed in 0..50 {
            let r = random_mix(&[q1.clone(), q2.clone()], &[1.0, 0.0], seed).unwrap();
            assert_eq!(r, RankedSuite::singletons(q1.clone()));
            let r = random_mix(&[q1.clone(), q1.clone()], &[0.3, 0.7], seed).unwrap();
            assert_eq!(r, RankedSuite::singletons(q1.clone()));
        }
    }

    #[test]
    fn random_mix_rejects_mismatched_queues() {
        let err = random_mix(&[ids(&["a", "b"]), ids(&["a", "c"])], &[1.0, 1.0], 0).unwrap_err();
        assert!(matches!(err, ApproachError::QueueMismatch(_)));
        assert!(matches!(
            random_mix(&[ids(&["a"])], &[1.0, 1.0], 0),
            Err(ApproachError::WeightMismatch { .. })
        ));
    }

    #[test]
    fn random_mix_first_pick_frequency() {
        let q1 = ids(&["a", "b", "c"]);
        let q2 = ids(&["c", "b", "a"]);
        let trials = 10_000;
        let hits = (0..trials)
            .filter(|&s| random_mix(&[q1.clone(), q2.clone()], &[3.0, 1.0], s).unwrap().groups()[0][0] == id("a"))
            .count();
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.75).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn borda_hand_counts() {
        let a = ranking(&[&["a"], &["b"], &["c"]]);
        let b = ranking(&[&["b"], &["a"], &["c"]]);
        assert_eq!(borda_mix(&[a.clone(), b.clone()], &[1.0, 1.0]).unwrap(), ranking(&[&["a", "b"], &["c"]]));
        assert_eq!(borda_mix(&[a.clone(), b.clone()], &[2.0, 1.0]).unwrap(), ranking(&[&["a"], &["b"], &["c"]]));
        let tied = ranking(&[&["a", "b"], &["c"]]);
        let suite = ids(&["a", "b", "c"]);
        assert_eq!(borda_scores(&suite, &[tied.clone()], &[1.0]), vec![1.5, 1.5, 0.0]);
        assert_eq!(borda_mix(&[tied.clone()], &[1.0]).unwrap(), tied);
        assert_eq!(borda_scores(&suite, &[a, b], &[2.0, 1.0]), vec![5.0, 4.0, 0.0]);
    }

    #[test]
    fn borda_scale_invariance_and_copies() {
        let r1 = ranking(&[&["a"], &["b", "c"], &["d"]]);
        let r2 = ranking(&[&["d"], &["c"], &["a", "b"]]);
        let base = borda_mix(&[r1.clone(), r2.clone()], &[1.0, 0.5]).unwrap();
        assert_eq!(borda_mix(&[r1.clone(), r2.clone()], &[10.0, 5.0]).unwrap(), base);
        assert_eq!(borda_mix(&[r1.clone(), r1.clone(), r1.clone()], &[1.0, 2.0, 0.5]).unwrap(), r1);
    }

    #[test]
    fn schulze_unanimity_and_cap() {
        let r = ranking(&[&["a"], &["b"], &["c"]]);
        assert_eq!(schulze_mix(&[r.clone(), r.clone(), r.clone()], &[1.0, 1.0, 1.0], 10).unwrap(), r);
        assert_eq!(
            schulze_mix(&[r.clone()], &[1.0], 2),
            Err(ApproachError::SuiteTooLarge { size: 3, cap: 2 })
        );
    }

    #[test]
    fn schulze_condorcet_cycle_is_a_tie() {
        // a > b > c > a with equal weights: all strongest paths equal
        let r1 = ranking(&[&["a"], &["b"], &["c"]]);
        let r2 = ranking(&[&["b"], &["c"], &["a"]]);
        let r3 = ranking(&[&["c"], &["a"], &["b"]]);
        assert_eq!(schulze_mix(&[r1, r2, r3], &[1.0, 1.0, 1.0], 10).unwrap(), ranking(&[&["a", "b", "c"]]));
    }

    #[test]
    fn mixed_order_skips_zero_weight_children() {
        struct Exploding;
        impl Approach for Exploding {
            fn rank(&mut self, _: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
                panic!("zero-weight child asked to rank")
            }
            fn observe(&mut self, _: &[TestExecution]) {}
            fn reset(&mut self) {}
        }
        let suite = ids(&["a", "b"]);
        for scheme in [MixScheme::Random { seed: 1 }, MixScheme::Borda, MixScheme::Schulze { cap: 10 }] {
            let mut m = MixedOrder::new(
                vec![(Box::new(Exploding), 0.0), (Box::new(crate::prioritizers::BaseOrder), 1.0)],
                scheme,
            );
            assert_eq!(m.rank(&CycleContext::new(&suite)).unwrap(), ranking(&[&["a"], &["b"]]));
        }
    }
}
