//! Training-free test case prioritization.
//!
//! This crate holds the pure algorithmic side of the toolkit and builds
//! without `std` (it needs `alloc`):
//!
//!  - [`model`]: test cases, CI cycles, histories and tie-aware rankings.
//!  - [`approach`]: the rank/observe/reset contract every prioritizer follows.
//!  - [`prioritizers`]: history-based and code-distance base approaches.
//!  - [`combinators`]: mixers, interpolators and tiebreakers over opaque
//!    sub-approaches, the declarative [`ApproachSpec`] tree and its presets.
//!  - [`metrics`]: APFD, APFD_C, NAPFD, their rectified forms, NTR, TT, ATR.
//!  - [`stats`]: Friedman, Wilcoxon signed-rank, Holm and CD grouping.
//!
//! IO, dataset formats, the replay harness and the command line live in the
//! `tcp-lab` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod approach;
pub mod combinators;
pub mod dataset;
pub mod metrics;
pub mod model;
pub mod prioritizers;
pub mod seed;
pub mod smoothing;
pub mod stats;

pub use approach::{Approach, ApproachError, CycleContext};
pub use combinators::{build, ApproachSpec, SpecError};
pub use model::{
    flatten, validate_ranking, CycleRecord, ModelError, ProjectHistory, RankedSuite,
    RankingViolation, TestCaseId, TestExecution, TieBreak, Verdict,
};
