//! Dataset IO: column-mapped ingestion of CI histories, the canonical history
//! file, build-time tables and test source attachment.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Deserialize;
use tcp_lab_core::{CycleRecord, ModelError, ProjectHistory, TestCaseId, TestExecution, Verdict};
use thiserror::Error;

pub const CANONICAL_HEADER: [&str; 8] = [
    "cycle",
    "job_id",
    "commit_id",
    "build_time",
    "position",
    "test_name",
    "duration",
    "verdict",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}, row {row}: {reason}")]
    ParseError { file: String, row: usize, reason: String },
    #[error("no test executions found")]
    EmptyHistory,
    #[error("checkout {0} is not readable")]
    CheckoutUnreadable(PathBuf),
    #[error("invalid column mapping: {0}")]
    InvalidMapping(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Source columns carrying the verdict: either one textual column or a list
/// of count columns (failures, errors, ...) where any positive count fails.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum VerdictColumns {
    Text(String),
    Counts(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Columns {
    pub job_id: String,
    pub commit_id: String,
    pub test_name: String,
    pub duration: String,
    pub verdict: VerdictColumns,
    /// Orders cycles; numeric when every value parses as a number.
    pub cycle_order: String,
}

fn default_delimiter() -> char {
    ','
}

fn default_scale() -> f64 {
    1.0
}

/// How an external delimiter-separated layout maps onto canonical fields.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    pub columns: Columns,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Multiplier turning the duration column into seconds.
    #[serde(default = "default_scale")]
    pub duration_scale: f64,
    /// Skip and count malformed rows instead of failing.
    #[serde(default)]
    pub lenient: bool,
}

impl ColumnMapping {
    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let mapping: ColumnMapping = serde_json::from_str(text).map_err(|e| DatasetError::InvalidMapping(e.to_string()))?;
        if !mapping.delimiter.is_ascii() {
            return Err(DatasetError::InvalidMapping("delimiter must be a single ASCII character".into()));
        }
        if !(mapping.duration_scale.is_finite() && mapping.duration_scale > 0.0) {
            return Err(DatasetError::InvalidMapping("duration_scale must be positive".into()));
        }
        if let VerdictColumns::Counts(c) = &mapping.columns.verdict {
            if c.is_empty() {
                return Err(DatasetError::InvalidMapping("verdict column list is empty".into()));
            }
        }
        Ok(mapping)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestSummary {
    pub files: usize,
    pub cycles: usize,
    pub executions: usize,
    pub rejected_rows: usize,
}

fn parse_verdict_text(text: &str) -> Option<Verdict> {
    match text.trim().to_ascii_lowercase().as_str() {
        "pass" | "passed" | "success" | "ok" | "false" => Some(Verdict::Pass),
        "fail" | "failed" | "failure" | "error" | "true" => Some(Verdict::Fail),
        other => other.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0).map(|v| {
            if v > 0.0 {
                Verdict::Fail
            } else {
                Verdict::Pass
            }
        }),
    }
}

struct RawRow {
    job_id: String,
    commit_id: String,
    order_key: String,
    execution: TestExecution,
    origin: (usize, usize),
}

fn input_files(input: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let meta = fs::metadata(input).map_err(io_err(input))?;
    if meta.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(input).map_err(io_err(input))? {
        let path = entry.map_err(io_err(input))?.path();
        let hidden = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.'));
        if path.is_file() && !hidden {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Reads every (non-hidden) file in `input`, or `input` itself if it is a
/// file, and assembles one cycle per job id.
pub fn ingest(input: &Path, mapping: &ColumnMapping, project: &str) -> Result<(ProjectHistory, IngestSummary), DatasetError> {
    let files = input_files(input)?;
    let mut rows = Vec::new();
    let mut rejected = 0;
    for (file_no, file) in files.iter().enumerate() {
        let name = file.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(mapping.delimiter as u8)
            .from_path(file)?;
        let headers = reader.headers()?.clone();
        let col = |c: &str| {
            headers.iter().position(|h| h.trim() == c).ok_or_else(|| DatasetError::MissingColumn {
                file: name.clone(),
                column: c.to_string(),
            })
        };
        let c = &mapping.columns;
        let job = col(&c.job_id)?;
        let commit = col(&c.commit_id)?;
        let test = col(&c.test_name)?;
        let duration = col(&c.duration)?;
        let order = col(&c.cycle_order)?;
        let verdict: Vec<usize> = match &c.verdict {
            VerdictColumns::Text(v) => vec![col(v)?],
            VerdictColumns::Counts(vs) => vs.iter().map(|v| col(v)).collect::<Result<_, _>>()?,
        };
        let textual = matches!(c.verdict, VerdictColumns::Text(_));

        for (i, record) in reader.records().enumerate() {
            // header is row 1
            let row = i + 2;
            let record = record?;
            let field = |k: usize| record.get(k).unwrap_or("").trim();
            let parsed = (|| -> Result<RawRow, String> {
                let secs: f64 = field(duration)
                    .parse::<f64>()
                    .map_err(|_| format!("unparseable duration `{}`", field(duration)))?
                    * mapping.duration_scale;
                let v = if textual {
                    parse_verdict_text(field(verdict[0])).ok_or_else(|| format!("unparseable verdict `{}`", field(verdict[0])))?
                } else {
                    let mut fail = false;
                    for &k in &verdict {
                        let n: f64 = field(k).parse().map_err(|_| format!("unparseable count `{}`", field(k)))?;
                        fail |= n > 0.0;
                    }
                    if fail {
                        Verdict::Fail
                    } else {
                        Verdict::Pass
                    }
                };
                let case = TestCaseId::new(field(test)).map_err(|e| e.to_string())?;
                let execution = TestExecution::new(case, secs, v).map_err(|e| e.to_string())?;
                if field(job).is_empty() {
                    return Err("empty job id".into());
                }
                Ok(RawRow {
                    job_id: field(job).to_string(),
                    commit_id: field(commit).to_string(),
                    order_key: field(order).to_string(),
                    execution,
                    origin: (file_no, row),
                })
            })();
            match parsed {
                Ok(r) => rows.push(r),
                Err(_) if mapping.lenient => rejected += 1,
                Err(reason) => return Err(DatasetError::ParseError { file: name, row, reason }),
            }
        }
    }
    if rows.is_empty() {
        return Err(DatasetError::EmptyHistory);
    }

    let mut jobs: Vec<(String, String, String, Vec<TestExecution>)> = Vec::new();
    let mut slot: BTreeMap<String, usize> = BTreeMap::new();
    let mut dropped_duplicates = 0;
    for r in rows {
        let i = *slot.entry(r.job_id.clone()).or_insert_with(|| {
            jobs.push((r.job_id.clone(), r.commit_id.clone(), r.order_key.clone(), Vec::new()));
            jobs.len() - 1
        });
        let executions = &mut jobs[i].3;
        if executions.iter().any(|e| e.case() == r.execution.case()) {
            if !mapping.lenient {
                return Err(DatasetError::ParseError {
                    file: files[r.origin.0].display().to_string(),
                    row: r.origin.1,
                    reason: format!("test `{}` repeats within job {}", r.execution.case(), r.job_id),
                });
            }
            dropped_duplicates += 1;
            continue;
        }
        executions.push(r.execution);
    }
    let numeric = jobs.iter().all(|j| j.2.parse::<f64>().is_ok());
    // stable: ties in the order key keep first-seen order
    jobs.sort_by(|a, b| {
        if numeric {
            a.2.parse::<f64>().unwrap().total_cmp(&b.2.parse::<f64>().unwrap())
        } else {
            a.2.cmp(&b.2)
        }
    });
    let executions = jobs.iter().map(|j| j.3.len()).sum();
    let cycles = jobs
        .into_iter()
        .enumerate()
        .map(|(i, (job, commit, _, execs))| CycleRecord::new(i as u64, job, commit, None, execs))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = IngestSummary {
        files: files.len(),
        cycles: cycles.len(),
        executions,
        rejected_rows: rejected + dropped_duplicates,
    };
    Ok((ProjectHistory::new(project, cycles)?, summary))
}

/// Writes the canonical history file.
pub fn write_canonical<W: Write>(history: &ProjectHistory, out: W) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CANONICAL_HEADER)?;
    for c in history.cycles() {
        let build = c.build_time().map(|b| b.to_string()).unwrap_or_default();
        for (pos, e) in c.executions().iter().enumerate() {
            w.write_record([
                c.index().to_string().as_str(),
                c.job_id(),
                c.commit_id(),
                &build,
                &pos.to_string(),
                e.case().as_str(),
                &e.duration().to_string(),
                if e.verdict().is_fail() { "fail" } else { "pass" },
            ])?;
        }
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(())
}

/// Parses a canonical history file. `origin` names the input in errors.
pub fn read_canonical<R: Read>(input: R, project: &str, origin: &str) -> Result<ProjectHistory, DatasetError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    for column in CANONICAL_HEADER {
        if !headers.iter().any(|h| h == column) {
            return Err(DatasetError::MissingColumn {
                file: origin.to_string(),
                column: column.to_string(),
            });
        }
    }
    if headers.len() != CANONICAL_HEADER.len() || headers.iter().zip(CANONICAL_HEADER).any(|(h, c)| h != c) {
        return Err(DatasetError::ParseError {
            file: origin.to_string(),
            row: 1,
            reason: format!("header must be `{}`", CANONICAL_HEADER.join(",")),
        });
    }

    struct Pending {
        index: u64,
        job: String,
        commit: String,
        build: Option<f64>,
        executions: Vec<TestExecution>,
    }
    let mut cycles = Vec::new();
    let mut current: Option<Pending> = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let bad = |reason: String| DatasetError::ParseError {
            file: origin.to_string(),
            row,
            reason,
        };
        let index: u64 = record[0].parse().map_err(|_| bad(format!("bad cycle index `{}`", &record[0])))?;
        let build = match &record[3] {
            "" => None,
            b => Some(b.parse::<f64>().map_err(|_| bad(format!("bad build_time `{b}`")))?),
        };
        let position: usize = record[4].parse().map_err(|_| bad(format!("bad position `{}`", &record[4])))?;
        let duration: f64 = record[6].parse().map_err(|_| bad(format!("bad duration `{}`", &record[6])))?;
        let verdict = match &record[7] {
            "pass" => Verdict::Pass,
            "fail" => Verdict::Fail,
            v => return Err(bad(format!("verdict must be pass or fail, got `{v}`"))),
        };
        let case = TestCaseId::new(&record[5]).map_err(|e| bad(e.to_string()))?;
        let execution = TestExecution::new(case, duration, verdict).map_err(|e| bad(e.to_string()))?;

        if current.as_ref().is_some_and(|p| p.index != index) {
            let p = current.take().unwrap();
            cycles.push(CycleRecord::new(p.index, p.job, p.commit, p.build, p.executions).map_err(|e| bad(e.to_string()))?);
        }
        let p = current.get_or_insert_with(|| Pending {
            index,
            job: record[1].to_string(),
            commit: record[2].to_string(),
            build,
            executions: Vec::new(),
        });
        if p.job != record[1] || p.commit != record[2] || p.build != build {
            return Err(bad("job_id, commit_id and build_time must be constant within a cycle".into()));
        }
        if position != p.executions.len() {
            return Err(bad(format!("expected position {}, got {position}", p.executions.len())));
        }
        p.executions.push(execution);
    }
    if let Some(p) = current {
        cycles.push(CycleRecord::new(p.index, p.job, p.commit, p.build, p.executions)?);
    }
    Ok(ProjectHistory::new(project, cycles)?)
}

pub fn read_canonical_file(path: &Path, project: &str) -> Result<ProjectHistory, DatasetError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_canonical(std::io::BufReader::new(file), project, &path.display().to_string())
}

/// Reads a `job_id,seconds` table.
pub fn read_build_times<R: Read>(input: R, origin: &str) -> Result<BTreeMap<String, f64>, DatasetError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |c: &str| {
        headers.iter().position(|h| h.trim() == c).ok_or_else(|| DatasetError::MissingColumn {
            file: origin.to_string(),
            column: c.to_string(),
        })
    };
    let (job, secs) = (col("job_id")?, col("seconds")?);
    let mut table = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let value = record.get(secs).unwrap_or("").trim();
        let seconds: f64 = value
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite() && *s >= 0.0)
            .ok_or_else(|| DatasetError::ParseError {
                file: origin.to_string(),
                row: i + 2,
                reason: format!("bad seconds `{value}`"),
            })?;
        table.insert(record.get(job).unwrap_or("").trim().to_string(), seconds);
    }
    Ok(table)
}

/// Reads a file's content as of a commit.
pub trait CommitResolver {
    fn read(&self, commit: &str, relative_path: &str) -> Option<String>;
}

/// Ignores the commit and reads the checked-out files.
pub struct WorkingTree {
    pub root: PathBuf,
}

impl CommitResolver for WorkingTree {
    fn read(&self, _commit: &str, relative_path: &str) -> Option<String> {
        fs::read_to_string(self.root.join(relative_path)).ok()
    }
}

/// Reads files from git history with `git show <commit>:<path>`.
pub struct GitShow {
    pub root: PathBuf,
}

impl CommitResolver for GitShow {
    fn read(&self, commit: &str, relative_path: &str) -> Option<String> {
        let out = Command::new("git")
            .arg("-C")
            .arg(&self.root)
            .arg("show")
            .arg(format!("{commit}:{relative_path}"))
            .output()
            .ok()?;
        if out.status.success() {
            String::from_utf8(out.stdout).ok()
        } else {
            None
        }
    }
}

/// Maps test names to candidate file paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceLayout {
    pub roots: Vec<String>,
    pub suffixes: Vec<String>,
}

impl Default for SourceLayout {
    fn default() -> Self {
        SourceLayout {
            roots: vec![String::new(), "src/test/java".into()],
            suffixes: vec![".java".into()],
        }
    }
}

impl SourceLayout {
    /// `org.acme.FooTest$Inner#method` becomes `<root>/org/acme/FooTest<suffix>`.
    pub fn candidates(&self, test_name: &str) -> Vec<String> {
        let class = test_name.split(['$', '#']).next().unwrap_or(test_name);
        let rel = class.replace('.', "/");
        let mut out = Vec::new();
        for root in &self.roots {
            for suffix in &self.suffixes {
                let root = root.trim_end_matches('/');
                if root.is_empty() {
                    out.push(format!("{rel}{suffix}"));
                } else {
                    out.push(format!("{root}/{rel}{suffix}"));
                }
            }
        }
        out
    }
}

/// Looks up every test's source at the commit of the last cycle that ran it.
/// Unresolvable tests are left out.
pub fn attach_sources(
    history: ProjectHistory,
    checkout: &Path,
    resolver: &dyn CommitResolver,
    layout: &SourceLayout,
) -> Result<ProjectHistory, DatasetError> {
    if fs::read_dir(checkout).is_err() {
        return Err(DatasetError::CheckoutUnreadable(checkout.to_path_buf()));
    }
    let mut latest: BTreeMap<&TestCaseId, &str> = BTreeMap::new();
    for c in history.cycles() {
        for e in c.executions() {
            latest.insert(e.case(), c.commit_id());
        }
    }
    let mut sources = BTreeMap::new();
    let mut tried = BTreeSet::new();
    for (case, commit) in latest {
        for path in layout.candidates(case.as_str()) {
            if !tried.insert((commit, path.clone(), case)) {
                continue;
            }
            if let Some(text) = resolver.read(commit, &path) {
                sources.insert(case.clone(), text);
                break;
            }
        }
    }
    Ok(history.with_sources(sources))
}
