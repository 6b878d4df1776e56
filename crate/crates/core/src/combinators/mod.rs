//! Approach combinators and the declarative [`ApproachSpec`] tree.
//!
//! A spec is a finite tree: leaves name base approaches, inner nodes are
//! mixers, interpolators or tiebreakers over child specs. [`build`] turns a
//! spec into a live [`Approach`]; [`presets`] lists the P1–P3 sample models.

mod interpolate;
mod mixers;
mod tiebreak;

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub use interpolate::{interpolate_weights, CountMode, Cutoff, InterpolatedOrder};
pub use mixers::{
    borda_mix, random_mix, schulze_beats, schulze_mix, MixScheme, MixedOrder, BORDA_TIE_TOLERANCE,
    DEFAULT_SCHULZE_CAP,
};
pub use tiebreak::{break_ties, break_ties_codedist, CodeDistBrokenOrder, GenericBrokenOrder};

use crate::approach::Approach;
use crate::prioritizers::{
    BaseOrder, CodeDistOrder, DistanceMetric, ExeTimeOrder, FailDensityOrder, FoldFailsOrder, Folder,
    RandomOrder, RecentnessOrder, StartPolicy,
};
use crate::seed;
use crate::smoothing::{Alpha, DEFAULT_ALPHA};

/// Folder selection for [`ApproachSpec::FoldFails`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FolderKind {
    /// Total number of failures ("total strategy").
    Sum,
    /// Exponential smoothing (DFE).
    ExpSmooth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedChild {
    pub weight: f64,
    pub spec: ApproachSpec,
}

impl WeightedChild {
    pub fn new(weight: f64, spec: ApproachSpec) -> Self {
        WeightedChild { weight, spec }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ApproachSpec {
    BaseOrder,
    RandomOrder { seed: u64 },
    Recentness,
    /// `alpha` is only used by [`FolderKind::ExpSmooth`].
    FoldFails { folder: FolderKind, alpha: f64 },
    ExeTime { alpha: f64 },
    FailDensity { alpha_fail: f64, alpha_time: f64 },
    CodeDist { metric: DistanceMetric, start: StartPolicy },
    RandomMix { children: Vec<WeightedChild>, seed: u64 },
    BordaMix { children: Vec<WeightedChild> },
    SchulzeMix { children: Vec<WeightedChild>, cap: usize },
    Interpolate {
        before: Box<ApproachSpec>,
        after: Box<ApproachSpec>,
        cutoff: u64,
        count_mode: CountMode,
    },
    BreakTies { primary: Box<ApproachSpec>, secondary: Box<ApproachSpec> },
    BreakTiesCodeDist { primary: Box<ApproachSpec>, metric: DistanceMetric },
    /// Reference to a named spec (see [`named`]).
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("unknown approach or preset `{0}`")]
    UnknownName(String),
    #[error("smoothing factor {0} is outside (0, 1]")]
    AlphaOutOfRange(f64),
    #[error("mixer has no children")]
    EmptyMixer,
    #[error("mixer weight {0} is not a finite non-negative number")]
    InvalidWeight(f64),
    #[error("every mixer weight is zero")]
    AllWeightsZero,
    #[error("interpolation cutoff must be at least 1")]
    ZeroCutoff,
    #[error("schulze suite cap must be at least 1")]
    ZeroCap,
    #[error("named specs reference each other in a cycle through `{0}`")]
    NameCycle(String),
}

impl ApproachSpec {
    pub fn named(name: impl Into<String>) -> Self {
        ApproachSpec::Named(name.into())
    }

    pub fn fold_fails_sum() -> Self {
        ApproachSpec::FoldFails {
            folder: FolderKind::Sum,
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn dfe(alpha: f64) -> Self {
        ApproachSpec::FoldFails {
            folder: FolderKind::ExpSmooth,
            alpha,
        }
    }

    pub fn exe_time() -> Self {
        ApproachSpec::ExeTime { alpha: DEFAULT_ALPHA }
    }

    pub fn fail_density() -> Self {
        ApproachSpec::FailDensity {
            alpha_fail: DEFAULT_ALPHA,
            alpha_time: DEFAULT_ALPHA,
        }
    }

    /// Replaces every [`ApproachSpec::Named`] node by its definition.
    pub fn resolve(&self) -> Result<ApproachSpec, SpecError> {
        self.resolve_with(&mut Vec::new())
    }

    fn resolve_with(&self, stack: &mut Vec<String>) -> Result<ApproachSpec, SpecError> {
        let kids = |children: &[WeightedChild], stack: &mut Vec<String>| {
            children
                .iter()
                .map(|c| Ok(WeightedChild::new(c.weight, c.spec.resolve_with(stack)?)))
                .collect::<Result<Vec<_>, SpecError>>()
        };
        Ok(match self {
            ApproachSpec::Named(name) => {
                if stack.contains(name) {
                    return Err(SpecError::NameCycle(name.clone()));
                }
                let def = named(name).ok_or_else(|| SpecError::UnknownName(name.clone()))?;
                stack.push(name.clone());
                let resolved = def.resolve_with(stack)?;
                stack.pop();
                resolved
            }
            ApproachSpec::RandomMix { children, seed } => ApproachSpec::RandomMix {
                children: kids(children, stack)?,
                seed: *seed,
            },
            ApproachSpec::BordaMix { children } => ApproachSpec::BordaMix {
                children: kids(children, stack)?,
            },
            ApproachSpec::SchulzeMix { children, cap } => ApproachSpec::SchulzeMix {
                children: kids(children, stack)?,
                cap: *cap,
            },
            ApproachSpec::Interpolate {
                before,
                after,
                cutoff,
                count_mode,
            } => ApproachSpec::Interpolate {
                before: Box::new(before.resolve_with(stack)?),
                after: Box::new(after.resolve_with(stack)?),
                cutoff: *cutoff,
                count_mode: *count_mode,
            },
            ApproachSpec::BreakTies { primary, secondary } => ApproachSpec::BreakTies {
                primary: Box::new(primary.resolve_with(stack)?),
                secondary: Box::new(secondary.resolve_with(stack)?),
            },
            ApproachSpec::BreakTiesCodeDist { primary, metric } => ApproachSpec::BreakTiesCodeDist {
                primary: Box::new(primary.resolve_with(stack)?),
                metric: *metric,
            },
            leaf => leaf.clone(),
        })
    }

    fn children(&self) -> Vec<&ApproachSpec> {
        match self {
            ApproachSpec::RandomMix { children, .. }
            | ApproachSpec::BordaMix { children }
            | ApproachSpec::SchulzeMix { children, .. } => children.iter().map(|c| &c.spec).collect(),
            ApproachSpec::Interpolate { before, after, .. } => vec![&**before, &**after],
            ApproachSpec::BreakTies { primary, secondary } => vec![&**primary, &**secondary],
            ApproachSpec::BreakTiesCodeDist { primary, .. } => vec![&**primary],
            _ => Vec::new(),
        }
    }

    /// Whether any node draws random numbers (named nodes are resolved first).
    pub fn is_randomized(&self) -> Result<bool, SpecError> {
        fn walk(s: &ApproachSpec) -> bool {
            matches!(s, ApproachSpec::RandomOrder { .. } | ApproachSpec::RandomMix { .. })
                || s.children().into_iter().any(walk)
        }
        Ok(walk(&self.resolve()?))
    }

    /// A resolved copy where every seed is derived from `seed` and the node's
    /// pre-order position.
    pub fn reseeded(&self, seed: u64) -> Result<ApproachSpec, SpecError> {
        fn walk(s: &mut ApproachSpec, master: u64, counter: &mut u64) {
            *counter += 1;
            match s {
                ApproachSpec::RandomOrder { seed } | ApproachSpec::RandomMix { seed, .. } => {
                    *seed = seed::derive(master, *counter);
                }
                _ => {}
            }
            match s {
                ApproachSpec::RandomMix { children, .. }
                | ApproachSpec::BordaMix { children }
                | ApproachSpec::SchulzeMix { children, .. } => {
                    for c in children {
                        walk(&mut c.spec, master, counter);
                    }
                }
                ApproachSpec::Interpolate { before, after, .. } => {
                    walk(before, master, counter);
                    walk(after, master, counter);
                }
                ApproachSpec::BreakTies { primary, secondary } => {
                    walk(primary, master, counter);
                    walk(secondary, master, counter);
                }
                ApproachSpec::BreakTiesCodeDist { primary, .. } => walk(primary, master, counter),
                _ => {}
            }
        }
        let mut resolved = self.resolve()?;
        walk(&mut resolved, seed, &mut 0);
        Ok(resolved)
    }

    /// The spec is exactly the original-order baseline (no prioritization).
    pub fn is_base_order(&self) -> bool {
        matches!(self.resolve(), Ok(ApproachSpec::BaseOrder))
    }
}

fn alpha(value: f64) -> Result<Alpha, SpecError> {
    Alpha::new(value).map_err(|_| SpecError::AlphaOutOfRange(value))
}

fn build_children(children: &[WeightedChild]) -> Result<Vec<(Box<dyn Approach + Send>, f64)>, SpecError> {
    if children.is_empty() {
        return Err(SpecError::EmptyMixer);
    }
    if let Some(bad) = children.iter().find(|c| !c.weight.is_finite() || c.weight < 0.0) {
        return Err(SpecError::InvalidWeight(bad.weight));
    }
    if children.iter().all(|c| c.weight == 0.0) {
        return Err(SpecError::AllWeightsZero);
    }
    children.iter().map(|c| Ok((build(&c.spec)?, c.weight))).collect()
}

/// Instantiates a spec.
pub fn build(spec: &ApproachSpec) -> Result<Box<dyn Approach + Send>, SpecError> {
    Ok(match spec {
        ApproachSpec::BaseOrder => Box::new(BaseOrder),
        ApproachSpec::RandomOrder { seed } => Box::new(RandomOrder::new(*seed)),
        ApproachSpec::Recentness => Box::new(RecentnessOrder::new()),
        ApproachSpec::FoldFails { folder, alpha: a } => Box::new(FoldFailsOrder::new(match folder {
            FolderKind::Sum => Folder::Sum,
            FolderKind::ExpSmooth => Folder::ExpSmooth(alpha(*a)?),
        })),
        ApproachSpec::ExeTime { alpha: a } => Box::new(ExeTimeOrder::new(alpha(*a)?)),
        ApproachSpec::FailDensity { alpha_fail, alpha_time } => {
            Box::new(FailDensityOrder::new(alpha(*alpha_fail)?, alpha(*alpha_time)?))
        }
        ApproachSpec::CodeDist { metric, start } => Box::new(CodeDistOrder::new(*metric, *start)),
        ApproachSpec::RandomMix { children, seed } => {
            Box::new(MixedOrder::new(build_children(children)?, MixScheme::Random { seed: *seed }))
        }
        ApproachSpec::BordaMix { children } => Box::new(MixedOrder::new(build_children(children)?, MixScheme::Borda)),
        ApproachSpec::SchulzeMix { children, cap } => {
            if *cap == 0 {
                return Err(SpecError::ZeroCap);
            }
            Box::new(MixedOrder::new(build_children(children)?, MixScheme::Schulze { cap: *cap }))
        }
        ApproachSpec::Interpolate {
            before,
            after,
            cutoff,
            count_mode,
        } => {
            let cutoff = Cutoff::new(*cutoff).ok_or(SpecError::ZeroCutoff)?;
            Box::new(InterpolatedOrder::new(build(before)?, build(after)?, cutoff, *count_mode))
        }
        ApproachSpec::BreakTies { primary, secondary } => {
            Box::new(GenericBrokenOrder::new(build(primary)?, build(secondary)?))
        }
        ApproachSpec::BreakTiesCodeDist { primary, metric } => {
            Box::new(CodeDistBrokenOrder::new(build(primary)?, *metric))
        }
        ApproachSpec::Named(_) => build(&spec.resolve()?)?,
    })
}

/// Metric used by the code-distance tiebreaker of P3.2.
pub const PRESET_CODE_METRIC: DistanceMetric = DistanceMetric::CosineDistance;

fn p1(kind: &str) -> ApproachSpec {
    let children = vec![
        WeightedChild::new(1.0, ApproachSpec::fold_fails_sum()),
        WeightedChild::new(1.0, ApproachSpec::Recentness),
        WeightedChild::new(0.5, ApproachSpec::exe_time()),
    ];
    match kind {
        "random" => ApproachSpec::RandomMix { children, seed: 0 },
        "borda" => ApproachSpec::BordaMix { children },
        _ => ApproachSpec::SchulzeMix {
            children,
            cap: DEFAULT_SCHULZE_CAP,
        },
    }
}

/// The six sample combinator models.
pub fn presets() -> Vec<(&'static str, ApproachSpec)> {
    vec![
        ("P1.1", p1("random")),
        ("P1.2", p1("borda")),
        ("P1.3", p1("schulze")),
        (
            "P2",
            ApproachSpec::Interpolate {
                before: Box::new(ApproachSpec::BordaMix {
                    children: vec![
                        WeightedChild::new(1.0, ApproachSpec::exe_time()),
                        WeightedChild::new(1.0, ApproachSpec::Recentness),
                    ],
                }),
                after: Box::new(ApproachSpec::fail_density()),
                cutoff: 5,
                count_mode: CountMode::FailedCycles,
            },
        ),
        (
            "P3.1",
            ApproachSpec::BreakTies {
                primary: Box::new(ApproachSpec::fold_fails_sum()),
                secondary: Box::new(ApproachSpec::exe_time()),
            },
        ),
        (
            "P3.2",
            ApproachSpec::BreakTiesCodeDist {
                primary: Box::new(ApproachSpec::fold_fails_sum()),
                metric: PRESET_CODE_METRIC,
            },
        ),
    ]
}

/// Base approaches under their default parameters, addressable by name.
pub fn base_approaches() -> Vec<(&'static str, ApproachSpec)> {
    vec![
        ("base_order", ApproachSpec::BaseOrder),
        ("random_order", ApproachSpec::RandomOrder { seed: 0 }),
        ("recentness", ApproachSpec::Recentness),
        ("fold_fails", ApproachSpec::fold_fails_sum()),
        ("dfe", ApproachSpec::dfe(DEFAULT_ALPHA)),
        ("exe_time", ApproachSpec::exe_time()),
        ("fail_density", ApproachSpec::fail_density()),
        (
            "code_dist",
            ApproachSpec::CodeDist {
                metric: PRESET_CODE_METRIC,
                start: StartPolicy::FarthestPair,
            },
        ),
    ]
}

/// Looks a preset or base approach up by name.
pub fn named(name: &str) -> Option<ApproachSpec> {
    presets()
        .into_iter()
        .chain(base_approaches())
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s)
}

/// Every name [`named`] accepts.
pub fn known_names() -> Vec<String> {
    presets()
        .into_iter()
        .chain(base_approaches())
        .map(|(n, _)| n.to_string())
        .collect()
}
