//! Evaluation configuration (JSON).
//!
//! ```json
//! {
//!   "projects": [{"name": "jsoup", "history": "jsoup.csv", "build_times": "jsoup-builds.csv"}],
//!   "approaches": [{"name": "P1.2", "preset": "P1.2"},
//!                  {"name": "random", "spec": {"type": "random_order"}, "repetitions": 10}],
//!   "master_seed": 42,
//!   "min_suite_size": 6
//! }
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use tcp_lab_core::{build, ApproachSpec, TieBreak};
use thiserror::Error;

use crate::dataset::{self, DatasetError, GitShow, SourceLayout, WorkingTree};
use crate::spec_json;

pub const SEED_ENV: &str = "TCP_LAB_SEED";
pub const DEFAULT_REPETITIONS: usize = 10;
pub const DEFAULT_MIN_SUITE_SIZE: usize = 6;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Malformed(String),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolverKind {
    WorkingTree,
    Git,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub name: String,
    pub history: PathBuf,
    #[serde(default)]
    pub build_times: Option<PathBuf>,
    #[serde(default)]
    pub checkout: Option<PathBuf>,
    #[serde(default)]
    pub resolver: Option<ResolverKind>,
    #[serde(default)]
    pub source_roots: Option<Vec<String>>,
    #[serde(default)]
    pub source_suffixes: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApproach {
    name: String,
    #[serde(default)]
    spec: Option<Value>,
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    repetitions: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreakMode {
    #[default]
    Stable,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Apfd,
    Rapfd,
    ApfdC,
    RapfdC,
    Ntr,
    Atr,
}

impl Metric {
    pub const ALL: [Metric; 6] = [Metric::RapfdC, Metric::Apfd, Metric::Rapfd, Metric::ApfdC, Metric::Ntr, Metric::Atr];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Apfd => "apfd",
            Metric::Rapfd => "rapfd",
            Metric::ApfdC => "apfd_c",
            Metric::RapfdC => "rapfd_c",
            Metric::Ntr => "ntr",
            Metric::Atr => "atr",
        }
    }

    pub fn from_name(name: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    projects: Vec<ProjectConfig>,
    approaches: Vec<RawApproach>,
    #[serde(default)]
    master_seed: u64,
    #[serde(default)]
    repetitions: Option<usize>,
    #[serde(default)]
    min_suite_size: Option<usize>,
    #[serde(default)]
    tie_break: TieBreakMode,
    #[serde(default)]
    metrics: Option<Vec<Metric>>,
    #[serde(default)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproachConfig {
    pub name: String,
    pub spec: ApproachSpec,
    /// 1 for deterministic specs.
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationConfig {
    pub projects: Vec<ProjectConfig>,
    pub approaches: Vec<ApproachConfig>,
    pub master_seed: u64,
    pub min_suite_size: usize,
    pub tie_break: TieBreakMode,
    pub metrics: Vec<Metric>,
    pub output: Option<PathBuf>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('_')
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "._-+".contains(c))
}

impl EvaluationConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let seed_override = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))?,
            ),
            Err(_) => None,
        };
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, seed_override)
    }

    /// Parses config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))?;
        if raw.projects.is_empty() {
            return Err(ConfigError::Invalid("at least one project is required".into()));
        }
        if raw.approaches.is_empty() {
            return Err(ConfigError::Invalid("at least one approach is required".into()));
        }
        let mut seen = BTreeSet::new();
        for name in raw.projects.iter().map(|p| &p.name) {
            if !valid_name(name) || !seen.insert(name.clone()) {
                return Err(ConfigError::Invalid(format!("project name `{name}` is invalid or repeated")));
            }
        }
        let min_suite_size = raw.min_suite_size.unwrap_or(DEFAULT_MIN_SUITE_SIZE);
        if min_suite_size == 0 {
            return Err(ConfigError::Invalid("min_suite_size must be at least 1".into()));
        }
        let default_reps = raw.repetitions.unwrap_or(DEFAULT_REPETITIONS);

        let mut seen = BTreeSet::new();
        let mut approaches = Vec::new();
        for a in raw.approaches {
            if !valid_name(&a.name) || !seen.insert(a.name.clone()) {
                return Err(ConfigError::Invalid(format!("approach name `{}` is invalid or repeated", a.name)));
            }
            let spec = match (a.spec, a.preset) {
                (Some(v), None) => spec_json::parse(&v).map_err(|e| ConfigError::Invalid(format!("{}: {e}", a.name)))?,
                (None, Some(p)) => ApproachSpec::Named(p),
                (None, None) => ApproachSpec::Named(a.name.clone()),
                (Some(_), Some(_)) => {
                    return Err(ConfigError::Invalid(format!("{}: give either `spec` or `preset`", a.name)))
                }
            };
            build(&spec).map_err(|e| ConfigError::Invalid(format!("{}: {e}", a.name)))?;
            let randomized = spec.is_randomized().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let repetitions = if randomized { a.repetitions.unwrap_or(default_reps) } else { 1 };
            if repetitions == 0 {
                return Err(ConfigError::Invalid(format!("{}: repetitions must be at least 1", a.name)));
            }
            approaches.push(ApproachConfig {
                name: a.name,
                spec,
                repetitions,
            });
        }

        let projects = raw
            .projects
            .into_iter()
            .map(|mut p| {
                p.history = base.join(&p.history);
                p.build_times = p.build_times.map(|b| base.join(b));
                p.checkout = p.checkout.map(|c| base.join(c));
                p
            })
            .collect();
        let mut metrics = raw.metrics.unwrap_or_else(|| Metric::ALL.to_vec());
        metrics.sort_by_key(|m| Metric::ALL.iter().position(|x| x == m));
        metrics.dedup();
        Ok(EvaluationConfig {
            projects,
            approaches,
            master_seed: seed_override.unwrap_or(raw.master_seed),
            min_suite_size,
            tie_break: raw.tie_break,
            metrics,
            output: raw.output.map(|o| base.join(o)),
        })
    }

    pub fn tie_break_for(&self, seed: u64) -> TieBreak {
        match self.tie_break {
            TieBreakMode::Stable => TieBreak::Stable,
            TieBreakMode::Random => TieBreak::Random { seed },
        }
    }
}

/// A project's history after build-time join, source attachment and the
/// suite-size filter.
#[derive(Debug, Clone)]
pub struct LoadedProject {
    pub history: tcp_lab_core::ProjectHistory,
    pub total_cycles: usize,
    pub build_time_mismatches: Option<usize>,
}

pub fn load_project(p: &ProjectConfig, min_suite_size: usize) -> Result<LoadedProject, DatasetError> {
    let mut history = dataset::read_canonical_file(&p.history, &p.name)?;
    let mut mismatches = None;
    if let Some(bt) = &p.build_times {
        let file = fs::File::open(bt).map_err(|source| DatasetError::Io {
            path: bt.clone(),
            source,
        })?;
        let table = dataset::read_build_times(file, &bt.display().to_string())?;
        let (joined, missing) = tcp_lab_core::dataset::join_build_times(&history, &table);
        history = joined;
        mismatches = Some(missing);
    }
    if let Some(checkout) = &p.checkout {
        let mut layout = SourceLayout::default();
        if let Some(r) = &p.source_roots {
            layout.roots = r.clone();
        }
        if let Some(s) = &p.source_suffixes {
            layout.suffixes = s.clone();
        }
        history = match p.resolver.unwrap_or(ResolverKind::WorkingTree) {
            ResolverKind::WorkingTree => dataset::attach_sources(
                history,
                checkout,
                &WorkingTree { root: checkout.clone() },
                &layout,
            )?,
            ResolverKind::Git => {
                dataset::attach_sources(history, checkout, &GitShow { root: checkout.clone() }, &layout)?
            }
        };
    }
    let total_cycles = history.cycles().len();
    Ok(LoadedProject {
        history: history.filter_for_evaluation(min_suite_size),
        total_cycles,
        build_time_mismatches: mismatches,
    })
}
