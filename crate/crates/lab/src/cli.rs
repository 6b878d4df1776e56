//! Command-line front end. Exit codes: 0 ok, 1 partial failure, 2 usage,
//! config or input error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use tcp_lab_core::{build, flatten, ApproachSpec, CycleContext, TestCaseId, TieBreak};

use crate::config::EvaluationConfig;
use crate::dataset::{self, ColumnMapping, DatasetError};
use crate::evaluate::run_evaluation;
use crate::report::{self, Format};
use crate::spec_json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tcp-lab", version, about = "Evaluate test case prioritization approaches on CI histories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Md,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a delimiter-separated dataset into a canonical history file.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Project name; defaults to the input's file or directory name.
        #[arg(long)]
        project: Option<String>,
        /// Optional `job_id,seconds` table to join.
        #[arg(long)]
        build_times: Option<PathBuf>,
    },
    /// Replay histories under the configured approaches.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Build tables, boxplot data and CD data from an evaluation directory.
    Report {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: ReportFormat,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = report::DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Print the order an approach gives one cycle after replaying the ones before it.
    Prioritize {
        #[arg(long)]
        history: PathBuf,
        /// JSON spec file.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        spec: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        cycle: u64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum PrioritizeError {
    #[error("UNKNOWN_CYCLE: no cycle with index {0}")]
    UnknownCycle(u64),
    #[error("INVALID_SPEC: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

fn dataset_code(e: &DatasetError) -> &'static str {
    match e {
        DatasetError::MissingColumn { .. } => "MISSING_COLUMN",
        DatasetError::ParseError { .. } | DatasetError::Csv(_) | DatasetError::Model(_) => "PARSE_ERROR",
        DatasetError::EmptyHistory => "EMPTY_HISTORY",
        DatasetError::CheckoutUnreadable(_) => "CHECKOUT_UNREADABLE",
        DatasetError::InvalidMapping(_) => "INVALID_MAPPING",
        DatasetError::Io { .. } => "IO_ERROR",
    }
}

fn project_name(input: &Path) -> String {
    input
        .file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .unwrap_or_else(|| "project".into())
}

/// Replays `history` up to (not including) cycle `index`, then returns the
/// approach's flattened order for that cycle.
pub fn prioritize(history_path: &Path, spec: &ApproachSpec, index: u64) -> Result<Vec<TestCaseId>, PrioritizeError> {
    let history = dataset::read_canonical_file(history_path, &project_name(history_path))?;
    let mut approach = build(spec).map_err(|e| PrioritizeError::InvalidSpec(e.to_string()))?;
    let target = history.cycle(index).ok_or(PrioritizeError::UnknownCycle(index))?;
    let invalid = |e: tcp_lab_core::ApproachError| PrioritizeError::InvalidSpec(e.to_string());
    for cycle in history.cycles().iter().take_while(|c| c.index() < index) {
        let suite = cycle.suite();
        approach
            .rank(&CycleContext::new(&suite).with_sources(history.sources()))
            .map_err(invalid)?;
        approach.observe(cycle.executions());
    }
    let suite = target.suite();
    let ranking = approach
        .rank(&CycleContext::new(&suite).with_sources(history.sources()))
        .map_err(invalid)?;
    Ok(flatten(&ranking, &suite, TieBreak::Stable))
}

fn ingest(input: &Path, mapping: &Path, out: &Path, project: Option<String>, build_times: Option<PathBuf>) -> i32 {
    let mapping = match fs::read_to_string(mapping) {
        Ok(text) => match ColumnMapping::from_json(&text) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("error: {}: {e}", dataset_code(&e));
                return EXIT_USAGE;
            }
        },
        Err(e) => {
            eprintln!("error: IO_ERROR: {}: {e}", mapping.display());
            return EXIT_USAGE;
        }
    };
    let project = project.unwrap_or_else(|| project_name(input));
    let result = (|| -> Result<String, DatasetError> {
        let (mut history, summary) = dataset::ingest(input, &mapping, &project)?;
        let mut line = format!(
            "{project}: {} cycles, {} executions from {} file(s), {} rejected rows",
            summary.cycles, summary.executions, summary.files, summary.rejected_rows
        );
        if let Some(bt) = build_times {
            let file = fs::File::open(&bt).map_err(|source| DatasetError::Io { path: bt.clone(), source })?;
            let table = dataset::read_build_times(file, &bt.display().to_string())?;
            let (joined, missing) = tcp_lab_core::dataset::join_build_times(&history, &table);
            history = joined;
            line.push_str(&format!(", {missing} build-time mismatches"));
        }
        let file = fs::File::create(out).map_err(|source| DatasetError::Io {
            path: out.to_path_buf(),
            source,
        })?;
        dataset::write_canonical(&history, std::io::BufWriter::new(file))?;
        Ok(line)
    })();
    match result {
        Ok(line) => {
            println!("{line}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}: {e}", dataset_code(&e));
            EXIT_USAGE
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Ingest {
            input,
            mapping,
            out,
            project,
            build_times,
        } => ingest(&input, &mapping, &out, project, build_times),
        Command::Evaluate { config, out, jobs } => {
            let config = match EvaluationConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            let Some(out) = out.or_else(|| config.output.clone()) else {
                eprintln!("error: no output directory (use --out or `output` in the config)");
                return EXIT_USAGE;
            };
            match run_evaluation(&config, &out, jobs) {
                Ok(report) => {
                    for p in &report.projects {
                        if let Some(e) = &p.error {
                            eprintln!("project {} failed: {e}", p.project);
                        }
                        for a in p.approaches.iter().filter(|a| a.error.is_some()) {
                            eprintln!("project {}, approach {} failed: {}", p.project, a.approach, a.error.as_ref().unwrap());
                        }
                    }
                    println!("wrote {}", out.join("report.json").display());
                    if report.any_failed() {
                        EXIT_PARTIAL
                    } else {
                        EXIT_OK
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_USAGE
                }
            }
        }
        Command::Report { raw, format, out, alpha } => {
            let format = match format {
                ReportFormat::Csv => Format::Csv,
                ReportFormat::Md => Format::Markdown,
            };
            let result = report::load_raw(&raw).and_then(|r| report::write_report(&r, format, &out, alpha));
            match result {
                Ok(files) => {
                    println!("wrote {} files to {}", files.len(), out.display());
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_USAGE
                }
            }
        }
        Command::Prioritize {
            history,
            spec,
            preset,
            cycle,
        } => {
            let spec = match (spec, preset) {
                (Some(path), _) => match fs::read_to_string(&path) {
                    Ok(text) => match spec_json::parse_str(&text) {
                        Ok(s) => s,
                        Err(e) => {
                            eprintln!("error: INVALID_SPEC: {e}");
                            return EXIT_USAGE;
                        }
                    },
                    Err(e) => {
                        eprintln!("error: IO_ERROR: {}: {e}", path.display());
                        return EXIT_USAGE;
                    }
                },
                (None, Some(name)) => ApproachSpec::Named(name),
                (None, None) => unreachable!("clap requires --spec or --preset"),
            };
            match prioritize(&history, &spec, cycle) {
                Ok(order) => {
                    let mut text = String::new();
                    for id in order {
                        text.push_str(id.as_str());
                        text.push('\n');
                    }
                    print!("{text}");
                    EXIT_OK
                }
                Err(e) => {
                    match &e {
                        PrioritizeError::Dataset(d) => eprintln!("error: {}: {d}", dataset_code(d)),
                        other => eprintln!("error: {other}"),
                    }
                    EXIT_USAGE
                }
            }
        }
    }
}
