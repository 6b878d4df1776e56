//! Bag-of-tokens code vectors and the greedy longest-path ordering over them.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::approach::{Approach, ApproachError, CycleContext};
use crate::model::{RankedSuite, TestCaseId, TestExecution};

/// Sparse token counts of a source text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CodeVector(BTreeMap<String, u32>);

impl CodeVector {
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        CodeVector(
            counts
                .into_iter()
                .filter(|(_, c)| *c > 0)
                .map(|(t, c)| (t.into(), c))
                .collect(),
        )
    }

    pub fn get(&self, token: &str) -> u32 {
        self.0.get(token).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(t, c)| (t.as_str(), *c))
    }

    fn norm(&self) -> f64 {
        libm::sqrt(self.0.values().map(|&c| (c as f64) * (c as f64)).sum())
    }
}

/// Splits on non-alphanumeric characters and camelCase humps, lowercases and
/// counts. `HTTPServer` yields `http` and `server`.
pub fn tokenize(source: &str) -> CodeVector {
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    let mut push = |token: &mut String| {
        if !token.is_empty() {
            *counts.entry(core::mem::take(token)).or_insert(0) += 1;
        }
    };
    for word in source.split(|c: char| !c.is_alphanumeric()) {
        let chars: Vec<char> = word.chars().collect();
        let mut token = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if c.is_uppercase() && i > 0 {
                let prev = chars[i - 1];
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                if prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower) {
                    push(&mut token);
                }
            }
            token.extend(c.to_lowercase());
        }
        push(&mut token);
    }
    CodeVector(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceMetric {
    Manhattan,
    Euclidean,
    /// `1 - cosine similarity`.
    CosineDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DistanceError {
    #[error("cosine distance is undefined for two empty vectors")]
    ZeroVector,
}

pub fn vector_distance(u: &CodeVector, v: &CodeVector, metric: DistanceMetric) -> Result<f64, DistanceError> {
    // merge-walk the two sorted maps
    let mut diffs = Vec::new();
    let mut dot = 0.0;
    let (mut a, mut b) = (u.0.iter().peekable(), v.0.iter().peekable());
    loop {
        match (a.peek(), b.peek()) {
            (Some((ka, &ca)), Some((kb, &cb))) => match ka.cmp(kb) {
                core::cmp::Ordering::Less => {
                    diffs.push(ca as f64);
                    a.next();
                }
                core::cmp::Ordering::Greater => {
                    diffs.push(cb as f64);
                    b.next();
                }
                core::cmp::Ordering::Equal => {
                    diffs.push((ca as f64 - cb as f64).abs());
                    dot += ca as f64 * cb as f64;
                    a.next();
                    b.next();
                }
            },
            (Some((_, &ca)), None) => {
                diffs.push(ca as f64);
                a.next();
            }
            (None, Some((_, &cb))) => {
                diffs.push(cb as f64);
                b.next();
            }
            (None, None) => break,
        }
    }
    Ok(match metric {
        DistanceMetric::Manhattan => diffs.iter().sum(),
        DistanceMetric::Euclidean => libm::sqrt(diffs.iter().map(|d| d * d).sum()),
        DistanceMetric::CosineDistance => {
            if u.is_empty() && v.is_empty() {
                return Err(DistanceError::ZeroVector);
            }
            if u.is_empty() || v.is_empty() {
                1.0
            } else {
                (1.0 - dot / (u.norm() * v.norm())).max(0.0)
            }
        }
    })
}

/// Where the greedy chain starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartPolicy {
    /// The member of the most distant pair with the lower original position.
    #[default]
    FarthestPair,
    /// The first case of the suite.
    FirstCase,
}

/// Symmetric pairwise distances; two empty vectors under cosine count as 0.
pub(crate) fn distance_matrix(vectors: &[CodeVector], metric: DistanceMetric) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut d = alloc::vec![alloc::vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let dist = vector_distance(&vectors[i], &vectors[j], metric).unwrap_or(0.0);
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }
    d
}

/// Lower-position member of the first most distant pair among `members`
/// (which must be listed in original order).
pub(crate) fn farthest_pair_start(dist: &[Vec<f64>], members: &[usize]) -> usize {
    let mut best = (members[0], f64::NEG_INFINITY);
    for (k, &i) in members.iter().enumerate() {
        for &j in &members[k + 1..] {
            if dist[i][j] > best.1 {
                best = (i, dist[i][j]);
            }
        }
    }
    best.0
}

/// Greedy chain: from `start`, repeatedly append the unvisited index farthest
/// from the last appended one. Ties go to the lower index.
pub(crate) fn greedy_chain(dist: &[Vec<f64>], start: usize) -> Vec<usize> {
    let n = dist.len();
    let mut visited = alloc::vec![false; n];
    let mut chain = Vec::with_capacity(n);
    let mut last = start;
    visited[start] = true;
    chain.push(start);
    while chain.len() < n {
        let mut next = None;
        let mut far = f64::NEG_INFINITY;
        for j in 0..n {
            if !visited[j] && dist[last][j] > far {
                far = dist[last][j];
                next = Some(j);
            }
        }
        let j = next.expect("unvisited index remains");
        visited[j] = true;
        chain.push(j);
        last = j;
    }
    chain
}

/// Token vectors for every case of the suite, missing sources as empty vectors.
#[derive(Debug, Clone, Default)]
pub(crate) struct VectorCache {
    vectors: BTreeMap<TestCaseId, CodeVector>,
}

impl VectorCache {
    pub(crate) fn vectors(&mut self, ctx: &CycleContext<'_>) -> Vec<CodeVector> {
        ctx.cases()
            .iter()
            .map(|case| {
                self.vectors
                    .entry(case.clone())
                    .or_insert_with(|| ctx.source(case).map(tokenize).unwrap_or_default())
                    .clone()
            })
            .collect()
    }

    pub(crate) fn clear(&mut self) {
        self.vectors.clear();
    }
}

/// Greedy longest path through the suite in code-vector space.
#[derive(Debug, Clone)]
pub struct CodeDistOrder {
    metric: DistanceMetric,
    start: StartPolicy,
    cache: VectorCache,
}

impl CodeDistOrder {
    pub fn new(metric: DistanceMetric, start: StartPolicy) -> Self {
        CodeDistOrder {
            metric,
            start,
            cache: VectorCache::default(),
        }
    }

    /// Chain over explicit vectors, as indices into `vectors`.
    pub fn order(vectors: &[CodeVector], metric: DistanceMetric, start: StartPolicy) -> Vec<usize> {
        if vectors.is_empty() {
            return Vec::new();
        }
        let dist = distance_matrix(vectors, metric);
        let first = match start {
            StartPolicy::FirstCase => 0,
            StartPolicy::FarthestPair => {
                let all: Vec<usize> = (0..vectors.len()).collect();
                farthest_pair_start(&dist, &all)
            }
        };
        greedy_chain(&dist, first)
    }
}

impl Approach for CodeDistOrder {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        let vectors = self.cache.vectors(ctx);
        let chain = Self::order(&vectors, self.metric, self.start);
        Ok(RankedSuite::singletons(chain.into_iter().map(|i| ctx.cases()[i].clone())))
    }

    fn observe(&mut self, _results: &[TestExecution]) {}

    fn reset(&mut self) {
        self.cache.clear();
    }
}
