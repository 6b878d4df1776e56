//! Replay harness: runs approaches over project histories cycle by cycle and
//! persists per-cycle values, timings and aggregated summaries.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tcp_lab_core::metrics::{self, CycleTiming, MetricError};
use tcp_lab_core::{
    build, flatten, seed, validate_ranking, Approach, ApproachError, ApproachSpec, CycleContext, ProjectHistory,
    RankingViolation, TieBreak,
};
use thiserror::Error;

use crate::config::{load_project, EvaluationConfig, Metric, TieBreakMode};
use crate::spec_json;

pub const BASELINE_FILE: &str = "_baseline.csv";

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cycle {cycle}: {source}")]
    Approach {
        cycle: u64,
        #[source]
        source: ApproachError,
    },
    #[error("cycle {cycle}: invalid ranking: {source}")]
    InvalidRanking {
        cycle: u64,
        #[source]
        source: RankingViolation,
    },
    #[error("cycle {cycle}: {source}")]
    Metric {
        cycle: u64,
        #[source]
        source: MetricError,
    },
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Deterministic per-cycle values of one approach on one project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRow {
    pub cycle: u64,
    pub size: usize,
    pub failed: bool,
    pub apfd: Option<f64>,
    pub rapfd: Option<f64>,
    pub apfd_c: Option<f64>,
    pub rapfd_c: Option<f64>,
    /// Time until the end of the first failing test.
    pub ttff: Option<f64>,
    pub full_time: f64,
}

/// Wall-clock dependent values of one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub cycle: u64,
    pub pt: f64,
    pub tt: f64,
}

/// Replays `history` through `approach`: per cycle it ranks (timed), checks
/// and flattens the ranking, scores the order, then feeds the results back.
/// The approach never sees a cycle's outcomes before its ranking is final.
///
/// With `measure` false the prioritization time is taken as zero.
pub fn replay(
    approach: &mut dyn Approach,
    history: &ProjectHistory,
    tie_break: impl Fn(u64) -> TieBreak,
    measure: bool,
) -> Result<Vec<(CycleRow, TimingRow)>, ReplayError> {
    let mut out = Vec::with_capacity(history.cycles().len());
    for cycle in history.cycles() {
        let index = cycle.index();
        let suite = cycle.suite();
        let ctx = CycleContext::new(&suite).with_sources(history.sources());
        let started = Instant::now();
        let ranking = approach
            .rank(&ctx)
            .map_err(|source| ReplayError::Approach { cycle: index, source })?;
        let pt = if measure { started.elapsed().as_secs_f64() } else { 0.0 };
        validate_ranking(&suite, &ranking).map_err(|source| ReplayError::InvalidRanking { cycle: index, source })?;
        let order = flatten(&ranking, &suite, tie_break(index));

        let metric_err = |source| ReplayError::Metric { cycle: index, source };
        let optional = |r: Result<f64, MetricError>| match r {
            Ok(v) => Ok(Some(v)),
            Err(MetricError::DegenerateBounds | MetricError::ZeroTotalTime | MetricError::NoFaults) => Ok(None),
            Err(e) => Err(metric_err(e)),
        };
        let failed = cycle.is_failed();
        let (apfd, rapfd, apfd_c, rapfd_c) = if failed {
            (
                Some(metrics::apfd(&order, cycle).map_err(metric_err)?),
                optional(metrics::rapfd(&order, cycle))?,
                optional(metrics::apfd_c(&order, cycle))?,
                optional(metrics::rapfd_c(&order, cycle))?,
            )
        } else {
            (None, None, None, None)
        };
        let timing = CycleTiming::of(&order, cycle, pt).map_err(metric_err)?;
        out.push((
            CycleRow {
                cycle: index,
                size: suite.len(),
                failed,
                apfd,
                rapfd,
                apfd_c,
                rapfd_c,
                ttff: timing.time_to_first_fault,
                full_time: timing.full_execution_time,
            },
            TimingRow {
                cycle: index,
                pt,
                tt: metrics::testing_time(&timing),
            },
        ));
        approach.observe(cycle.executions());
    }
    Ok(out)
}

/// Testing time of the unprioritized order with no prioritization overhead.
pub fn baseline_times(history: &ProjectHistory) -> Vec<TimingRow> {
    history
        .cycles()
        .iter()
        .map(|c| {
            let timing = CycleTiming::of(&c.suite(), c, 0.0).expect("suite order is a permutation");
            TimingRow {
                cycle: c.index(),
                pt: 0.0,
                tt: metrics::testing_time(&timing),
            }
        })
        .collect()
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.flatten().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

/// Averages repetitions cycle by cycle.
pub fn average_repetitions(runs: &[Vec<(CycleRow, TimingRow)>]) -> Vec<(CycleRow, TimingRow)> {
    let first = &runs[0];
    let n = runs.len() as f64;
    (0..first.len())
        .map(|i| {
            let col = |f: fn(&CycleRow) -> Option<f64>| mean_opt(runs.iter().map(|r| f(&r[i].0)));
            let (row, timing) = &first[i];
            (
                CycleRow {
                    apfd: col(|r| r.apfd),
                    rapfd: col(|r| r.rapfd),
                    apfd_c: col(|r| r.apfd_c),
                    rapfd_c: col(|r| r.rapfd_c),
                    ttff: col(|r| r.ttff),
                    ..row.clone()
                },
                TimingRow {
                    cycle: timing.cycle,
                    pt: runs.iter().map(|r| r[i].1.pt).sum::<f64>() / n,
                    tt: runs.iter().map(|r| r[i].1.tt).sum::<f64>() / n,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub median: f64,
    pub count: usize,
}

impl From<metrics::Summary> for Stat {
    fn from(s: metrics::Summary) -> Self {
        Stat {
            mean: s.mean,
            median: s.median,
            count: s.count,
        }
    }
}

/// Aggregates of one approach on one project; `None` marks no data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachSummary {
    pub approach: String,
    pub apfd: Option<Stat>,
    pub rapfd: Option<Stat>,
    pub apfd_c: Option<Stat>,
    pub rapfd_c: Option<Stat>,
    pub degenerate_rapfd: usize,
    pub degenerate_rapfd_c: usize,
    pub ntr: Option<f64>,
    pub atr: Option<f64>,
    pub total_pt: f64,
    pub error: Option<String>,
}

impl ApproachSummary {
    pub fn failed(approach: &str, error: String) -> Self {
        ApproachSummary {
            approach: approach.to_string(),
            apfd: None,
            rapfd: None,
            apfd_c: None,
            rapfd_c: None,
            degenerate_rapfd: 0,
            degenerate_rapfd_c: 0,
            ntr: None,
            atr: None,
            total_pt: 0.0,
            error: Some(error),
        }
    }

    /// The per-project value a table shows for `metric`.
    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Apfd => self.apfd.map(|s| s.mean),
            Metric::Rapfd => self.rapfd.map(|s| s.mean),
            Metric::ApfdC => self.apfd_c.map(|s| s.mean),
            Metric::RapfdC => self.rapfd_c.map(|s| s.mean),
            Metric::Ntr => self.ntr,
            Metric::Atr => self.atr,
        }
    }
}

/// APFD-family values average over failed, non-degenerate cycles only; NTR
/// over failed cycles; ATR over every cycle against `baseline`.
pub fn summarize(approach: &str, rows: &[CycleRow], timings: &[TimingRow], baseline: &[TimingRow]) -> ApproachSummary {
    let failed: Vec<&CycleRow> = rows.iter().filter(|r| r.failed).collect();
    let stat = |f: fn(&CycleRow) -> Option<f64>| {
        let values: Vec<f64> = failed.iter().filter_map(|r| f(r)).collect();
        metrics::aggregate(&values).ok().map(Stat::from)
    };
    let ntr_pairs: Vec<(f64, f64)> = failed
        .iter()
        .filter_map(|r| r.ttff.map(|t| (r.full_time, t)))
        .collect();
    let tt: Vec<f64> = timings.iter().map(|t| t.tt).collect();
    let base: Vec<f64> = baseline.iter().map(|t| t.tt).collect();
    ApproachSummary {
        approach: approach.to_string(),
        apfd: stat(|r| r.apfd),
        rapfd: stat(|r| r.rapfd),
        apfd_c: stat(|r| r.apfd_c),
        rapfd_c: stat(|r| r.rapfd_c),
        degenerate_rapfd: failed.iter().filter(|r| r.rapfd.is_none()).count(),
        degenerate_rapfd_c: failed.iter().filter(|r| r.rapfd_c.is_none()).count(),
        ntr: metrics::ntr(&ntr_pairs).ok(),
        atr: metrics::atr(&tt, &base).ok(),
        total_pt: timings.iter().map(|t| t.pt).sum(),
        error: None,
    }
}

/// FNV-1a, used to give every (project, approach) its own seed stream.
pub fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn repetition_seed(master: u64, project: &str, approach: &str, repetition: usize) -> u64 {
    let stream = seed::derive(master ^ name_hash(approach), name_hash(project));
    seed::derive(stream, repetition as u64)
}

/// Runs every repetition of one approach and averages them.
pub fn evaluate_approach(
    history: &ProjectHistory,
    spec: &ApproachSpec,
    repetitions: usize,
    tie_break: TieBreakMode,
    seeds: impl Fn(usize) -> u64,
) -> Result<Vec<(CycleRow, TimingRow)>, String> {
    let measure = !spec.is_base_order();
    let randomized = spec.is_randomized().map_err(|e| e.to_string())?;
    let mut runs = Vec::with_capacity(repetitions);
    for r in 0..repetitions {
        let s = seeds(r);
        let spec = if randomized { spec.reseeded(s).map_err(|e| e.to_string())? } else { spec.clone() };
        let mut approach = build(&spec).map_err(|e| e.to_string())?;
        let tie = |cycle: u64| match tie_break {
            TieBreakMode::Stable => TieBreak::Stable,
            TieBreakMode::Random => TieBreak::Random {
                seed: seed::derive(s, cycle),
            },
        };
        runs.push(replay(&mut approach, history, tie, measure).map_err(|e| e.to_string())?);
    }
    Ok(average_repetitions(&runs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectReport {
    pub project: String,
    pub total_cycles: usize,
    pub evaluated_cycles: usize,
    pub failed_cycles: usize,
    pub build_time_mismatches: Option<usize>,
    pub approaches: Vec<ApproachSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FooterEntry {
    pub approach: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub projects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostInfo {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
}

impl HostInfo {
    pub fn current() -> Self {
        HostInfo {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestApproach {
    pub name: String,
    pub spec: serde_json::Value,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub master_seed: u64,
    pub min_suite_size: usize,
    pub metrics: Vec<String>,
    pub approaches: Vec<ManifestApproach>,
    pub projects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub host: HostInfo,
    pub projects: Vec<ProjectReport>,
    pub footer: Vec<FooterEntry>,
}

impl EvaluationReport {
    pub fn any_failed(&self) -> bool {
        self.projects
            .iter()
            .any(|p| p.error.is_some() || p.approaches.iter().any(|a| a.error.is_some()))
    }
}

/// Cross-project mean and median of the per-project values.
pub fn footer(projects: &[ProjectReport], approaches: &[String], metrics: &[Metric]) -> Vec<FooterEntry> {
    let mut out = Vec::new();
    for metric in metrics {
        for a in approaches {
            let values: Vec<f64> = projects
                .iter()
                .filter_map(|p| p.approaches.iter().find(|s| &s.approach == a))
                .filter_map(|s| s.value(*metric))
                .collect();
            let s = metrics::aggregate(&values).ok();
            out.push(FooterEntry {
                approach: a.clone(),
                metric: metric.name().to_string(),
                mean: s.map(|s| s.mean),
                median: s.map(|s| s.median),
                projects: values.len(),
            });
        }
    }
    out
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes a header-only CSV so empty results still have a well-formed file.
fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), EvalError> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        w.flush().map_err(io_err(path))?;
        Ok(())
    } else {
        write_csv(path, rows)
    }
}

const CYCLE_HEADER: [&str; 9] = ["cycle", "size", "failed", "apfd", "rapfd", "apfd_c", "rapfd_c", "ttff", "full_time"];
const TIMING_HEADER: [&str; 3] = ["cycle", "pt", "tt"];

fn evaluate_project(config: &EvaluationConfig, index: usize, out: &Path) -> Result<ProjectReport, EvalError> {
    let p = &config.projects[index];
    let mut report = ProjectReport {
        project: p.name.clone(),
        total_cycles: 0,
        evaluated_cycles: 0,
        failed_cycles: 0,
        build_time_mismatches: None,
        approaches: Vec::new(),
        error: None,
    };
    let loaded = match load_project(p, config.min_suite_size) {
        Ok(l) => l,
        Err(e) => {
            report.error = Some(e.to_string());
            return Ok(report);
        }
    };
    let history = &loaded.history;
    report.total_cycles = loaded.total_cycles;
    report.evaluated_cycles = history.cycles().len();
    report.failed_cycles = history.failed_cycle_count();
    report.build_time_mismatches = loaded.build_time_mismatches;

    let values_dir = out.join("values").join(&p.name);
    let timings_dir = out.join("timings").join(&p.name);
    fs::create_dir_all(&values_dir).map_err(io_err(&values_dir))?;
    fs::create_dir_all(&timings_dir).map_err(io_err(&timings_dir))?;
    let baseline = baseline_times(history);
    write_rows(&timings_dir.join(BASELINE_FILE), &baseline, &TIMING_HEADER)?;

    let results: Vec<(String, Result<Vec<(CycleRow, TimingRow)>, String>)> = config
        .approaches
        .par_iter()
        .map(|a| {
            let seeds = |r| repetition_seed(config.master_seed, &p.name, &a.name, r);
            (
                a.name.clone(),
                evaluate_approach(history, &a.spec, a.repetitions, config.tie_break, seeds),
            )
        })
        .collect();
    for (name, result) in results {
        match result {
            Ok(rows) => {
                let (cycles, timings): (Vec<CycleRow>, Vec<TimingRow>) = rows.into_iter().unzip();
                write_rows(&values_dir.join(format!("{name}.csv")), &cycles, &CYCLE_HEADER)?;
                write_rows(&timings_dir.join(format!("{name}.csv")), &timings, &TIMING_HEADER)?;
                report.approaches.push(summarize(&name, &cycles, &timings, &baseline));
            }
            Err(e) => report.approaches.push(ApproachSummary::failed(&name, e)),
        }
    }
    Ok(report)
}

/// Evaluates every configured project (in parallel, `jobs` workers) and
/// writes `values/`, `timings/`, `manifest.json` and `report.json` to `out`.
pub fn run_evaluation(config: &EvaluationConfig, out: &Path, jobs: Option<usize>) -> Result<EvaluationReport, EvalError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let manifest = Manifest {
        master_seed: config.master_seed,
        min_suite_size: config.min_suite_size,
        metrics: config.metrics.iter().map(|m| m.name().to_string()).collect(),
        approaches: config
            .approaches
            .iter()
            .map(|a| ManifestApproach {
                name: a.name.clone(),
                spec: spec_json::to_json(&a.spec),
                repetitions: a.repetitions,
            })
            .collect(),
        projects: config.projects.iter().map(|p| p.name.clone()).collect(),
    };
    let manifest_path = out.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(io_err(&manifest_path))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| EvalError::Pool(e.to_string()))?;
    let projects = pool.install(|| {
        (0..config.projects.len())
            .into_par_iter()
            .map(|i| evaluate_project(config, i, out))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let names: Vec<String> = config.approaches.iter().map(|a| a.name.clone()).collect();
    let report = EvaluationReport {
        host: HostInfo::current(),
        footer: footer(&projects, &names, &config.metrics),
        projects,
    };
    let report_path = out.join("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n").map_err(io_err(&report_path))?;
    Ok(report)
}
