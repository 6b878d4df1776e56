//! Tiebreakers refine the tie groups of a primary ranking.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::approach::{Approach, ApproachError, CycleContext};
use crate::model::{validate_ranking, RankedSuite, TestCaseId, TestExecution};
use crate::prioritizers::code::{distance_matrix, farthest_pair_start, VectorCache};
use crate::prioritizers::{CodeVector, DistanceMetric};

/// Splits every primary group by the secondary ranking's group order. Ties
/// the secondary leaves stay ties.
pub fn break_ties(primary: &RankedSuite, secondary: &RankedSuite) -> Result<RankedSuite, ApproachError> {
    let suite: Vec<TestCaseId> = primary.groups().iter().flatten().cloned().collect();
    validate_ranking(&suite, primary)?;
    validate_ranking(&suite, secondary)?;
    let rank = secondary.group_index();
    let mut out = Vec::with_capacity(suite.len());
    for group in primary.groups() {
        let mut by_secondary: BTreeMap<usize, Vec<TestCaseId>> = BTreeMap::new();
        for id in group {
            by_secondary.entry(rank[id]).or_default().push(id.clone());
        }
        out.extend(by_secondary.into_values());
    }
    Ok(RankedSuite::from_groups(out))
}

/// Orders each primary group by the farthest-point rule over the whole suite:
/// the next case is the one whose minimum distance to everything already
/// prioritized (in any group) is largest. The very first case is picked by the
/// farthest-pair rule inside the first group. Ties go to the lower original
/// position; the result has no ties.
///
/// `vectors[i]` belongs to `suite[i]`; `suite` is in original order.
pub fn break_ties_codedist(
    primary: &RankedSuite,
    suite: &[TestCaseId],
    vectors: &[CodeVector],
    metric: DistanceMetric,
) -> Result<RankedSuite, ApproachError> {
    validate_ranking(suite, primary)?;
    let position: BTreeMap<&TestCaseId, usize> = suite.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let dist = distance_matrix(vectors, metric);
    let mut min_dist = alloc::vec![f64::INFINITY; suite.len()];
    let mut out = Vec::with_capacity(suite.len());
    for group in primary.groups() {
        let mut members: Vec<usize> = group.iter().map(|id| position[id]).collect();
        members.sort_unstable();
        if out.is_empty() {
            let first = farthest_pair_start(&dist, &members);
            take(first, &mut members, &mut out, &mut min_dist, &dist);
        }
        while !members.is_empty() {
            let mut best = members[0];
            for &m in &members[1..] {
                if min_dist[m] > min_dist[best] {
                    best = m;
                }
            }
            take(best, &mut members, &mut out, &mut min_dist, &dist);
        }
    }
    Ok(RankedSuite::singletons(out.into_iter().map(|i| suite[i].clone())))
}

fn take(pick: usize, members: &mut Vec<usize>, out: &mut Vec<usize>, min_dist: &mut [f64], dist: &[Vec<f64>]) {
    members.retain(|&m| m != pick);
    out.push(pick);
    for (j, d) in min_dist.iter_mut().enumerate() {
        *d = d.min(dist[pick][j]);
    }
}

/// Runs `primary`, then resolves its ties with `secondary`.
pub struct GenericBrokenOrder {
    primary: Box<dyn Approach + Send>,
    secondary: Box<dyn Approach + Send>,
}

impl GenericBrokenOrder {
    pub fn new(primary: Box<dyn Approach + Send>, secondary: Box<dyn Approach + Send>) -> Self {
        GenericBrokenOrder { primary, secondary }
    }
}

impl Approach for GenericBrokenOrder {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        let primary = self.primary.rank(ctx)?;
        validate_ranking(ctx.cases(), &primary)?;
        if primary.is_total() {
            return Ok(primary);
        }
        let secondary = self.secondary.rank(ctx)?;
        break_ties(&primary, &secondary)
    }

    fn observe(&mut self, results: &[TestExecution]) {
        self.primary.observe(results);
        self.secondary.observe(results);
    }

    fn reset(&mut self) {
        self.primary.reset();
        self.secondary.reset();
    }
}

/// Runs `primary`, then resolves its ties by code distance.
pub struct CodeDistBrokenOrder {
    primary: Box<dyn Approach + Send>,
    metric: DistanceMetric,
    cache: VectorCache,
}

impl CodeDistBrokenOrder {
    pub fn new(primary: Box<dyn Approach + Send>, metric: DistanceMetric) -> Self {
        CodeDistBrokenOrder {
            primary,
            metric,
            cache: VectorCache::default(),
        }
    }
}

impl Approach for CodeDistBrokenOrder {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        let primary = self.primary.rank(ctx)?;
        validate_ranking(ctx.cases(), &primary)?;
        let vectors = self.cache.vectors(ctx);
        break_ties_codedist(&primary, ctx.cases(), &vectors, self.metric)
    }

    fn observe(&mut self, results: &[TestExecution]) {
        self.primary.observe(results);
    }

    fn reset(&mut self) {
        self.primary.reset();
        self.cache.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::prioritizers::{CodeDistOrder, StartPolicy};
    use alloc::vec;

    #[test]
    fn secondary_splits_groups() {
        let primary = ranking(&[&["a", "b"], &["c"]]);
        let secondary = ranking(&[&["b"], &["a"], &["c"]]);
        assert_eq!(break_ties(&primary, &secondary).unwrap(), ranking(&[&["b"], &["a"], &["c"]]));
    }

    #[test]
    fn total_primary_is_unchanged() {
        let primary = ranking(&[&["c"], &["a"], &["b"]]);
        let secondary = ranking(&[&["a"], &["b"], &["c"]]);
        assert_eq!(break_ties(&primary, &secondary).unwrap(), primary);
    }

    #[test]
    fn single_group_delegates() {
        let primary = ranking(&[&["a", "b", "c", "d"]]);
        let secondary = ranking(&[&["d"], &["a", "c"], &["b"]]);
        assert_eq!(break_ties(&primary, &secondary).unwrap(), secondary);
    }

    #[test]
    fn self_tiebreak_is_identity() {
        let r = ranking(&[&["a", "c"], &["b"], &["d", "e", "f"]]);
        assert_eq!(break_ties(&r, &r).unwrap(), r);
    }

    #[test]
    fn residual_secondary_ties_persist() {
        let primary = ranking(&[&["a", "b", "c"], &["d"]]);
        let secondary = ranking(&[&["d"], &["c", "a"], &["b"]]);
        assert_eq!(break_ties(&primary, &secondary).unwrap(), ranking(&[&["a", "c"], &["b"], &["d"]]));
    }

    #[test]
    fn mismatched_secondary_is_rejected() {
        let err = break_ties(&ranking(&[&["a", "b"]]), &ranking(&[&["a"]])).unwrap_err();
        assert!(matches!(err, ApproachError::QueueMismatch(_)));
    }

    fn cv(n: u32) -> CodeVector {
        CodeVector::from_counts([("x", n)])
    }

    #[test]
    fn codedist_identical_vectors_keep_original_order() {
        let suite = ids(&["a", "b", "c", "d"]);
        let vectors = vec![cv(2); 4];
        let primary = ranking(&[&["c", "a"], &["d", "b"]]);
        assert_eq!(
            break_ties_codedist(&primary, &suite, &vectors, DistanceMetric::Euclidean).unwrap(),
            ranking(&[&["a"], &["c"], &["b"], &["d"]])
        );
    }

    #[test]
    fn codedist_single_group_matches_chain() {
        let suite = ids(&["p0", "p1", "p10"]);
        let vectors = vec![cv(0), cv(1), cv(10)];
        let chain = CodeDistOrder::order(&vectors, DistanceMetric::Euclidean, StartPolicy::FarthestPair);
        let expected = RankedSuite::singletons(chain.into_iter().map(|i| suite[i].clone()));
        let got = break_ties_codedist(&ranking(&[&["p0", "p1", "p10"]]), &suite, &vectors, DistanceMetric::Euclidean)
            .unwrap();
        assert_eq!(got, expected);
        assert_eq!(got, ranking(&[&["p0"], &["p10"], &["p1"]]));
    }

    #[test]
    fn codedist_respects_group_boundaries() {
        let suite = ids(&["a", "b", "c"]);
        // c is far from everything, but sits in the second group
        let vectors = vec![cv(1), cv(2), cv(100)];
        let got = break_ties_codedist(&ranking(&[&["a", "b"], &["c"]]), &suite, &vectors, DistanceMetric::Manhattan)
            .unwrap();
        assert_eq!(got, ranking(&[&["a"], &["b"], &["c"]]));
    }

    #[test]
    fn codedist_uses_global_prioritized_set() {
        // second group picks the case farthest from *all* earlier picks
        let suite = ids(&["a", "b", "c", "d"]);
        let vectors = vec![cv(0), cv(10), cv(9), cv(5)];
        let got = break_ties_codedist(&ranking(&[&["a", "b"], &["c", "d"]]), &suite, &vectors, DistanceMetric::Manhattan)
            .unwrap();
        // after {a=0, b=10}: min-dist c=1, d=5 -> d first
        assert_eq!(got, ranking(&[&["a"], &["b"], &["d"], &["c"]]));
    }
}
