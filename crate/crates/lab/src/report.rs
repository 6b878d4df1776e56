//! Tables, boxplot data and critical-difference data from an evaluation's
//! raw output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tcp_lab_core::metrics;
use tcp_lab_core::stats::{cd_grouping, ScoreMatrix};
use thiserror::Error;

use crate::config::Metric;
use crate::evaluate::{
    footer, io_err, summarize, write_csv, ApproachSummary, CycleRow, EvalError, Manifest, ProjectReport, TimingRow,
    BASELINE_FILE,
};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing input: {0}")]
    MissingInput(PathBuf),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

/// Significance level of the CD grouping.
pub const DEFAULT_ALPHA: f64 = 0.05;

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, ReportError> {
    if !path.is_file() {
        return Err(ReportError::MissingInput(path.to_path_buf()));
    }
    let csv_err = |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader.deserialize().collect::<Result<Vec<T>, _>>().map_err(csv_err)
}

/// Everything the tables need, recomputed from the per-cycle files.
#[derive(Debug, Clone, PartialEq)]
pub struct RawResults {
    pub manifest: Manifest,
    pub projects: Vec<ProjectReport>,
}

impl RawResults {
    pub fn approaches(&self) -> Vec<String> {
        self.manifest.approaches.iter().map(|a| a.name.clone()).collect()
    }

    pub fn metrics(&self) -> Vec<Metric> {
        let listed: Vec<Metric> = self.manifest.metrics.iter().filter_map(|m| Metric::from_name(m)).collect();
        if listed.is_empty() {
            Metric::ALL.to_vec()
        } else {
            listed
        }
    }

    fn value(&self, project: usize, approach: &str, metric: Metric) -> Option<f64> {
        self.projects[project]
            .approaches
            .iter()
            .find(|s| s.approach == approach)
            .and_then(|s| s.value(metric))
    }
}

pub fn load_raw(raw: &Path) -> Result<RawResults, ReportError> {
    let manifest_path = raw.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|_| ReportError::MissingInput(manifest_path.clone()))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| ReportError::Json {
        path: manifest_path.clone(),
        source,
    })?;
    let values = raw.join("values");
    if !values.is_dir() {
        return Err(ReportError::MissingInput(values));
    }
    let mut projects = Vec::new();
    for name in &manifest.projects {
        let vdir = values.join(name);
        let tdir = raw.join("timings").join(name);
        let mut report = ProjectReport {
            project: name.clone(),
            total_cycles: 0,
            evaluated_cycles: 0,
            failed_cycles: 0,
            build_time_mismatches: None,
            approaches: Vec::new(),
            error: None,
        };
        if !vdir.is_dir() {
            report.error = Some("no values (project failed to load)".into());
            projects.push(report);
            continue;
        }
        let baseline: Vec<TimingRow> = read_rows(&tdir.join(BASELINE_FILE))?;
        report.evaluated_cycles = baseline.len();
        for a in &manifest.approaches {
            let vpath = vdir.join(format!("{}.csv", a.name));
            if !vpath.is_file() {
                report
                    .approaches
                    .push(ApproachSummary::failed(&a.name, "no values (approach failed)".into()));
                continue;
            }
            let rows: Vec<CycleRow> = read_rows(&vpath)?;
            let timings: Vec<TimingRow> = read_rows(&tdir.join(format!("{}.csv", a.name)))?;
            report.failed_cycles = rows.iter().filter(|r| r.failed).count();
            report.approaches.push(summarize(&a.name, &rows, &timings, &baseline));
        }
        projects.push(report);
    }
    if projects.is_empty() {
        return Err(ReportError::MissingInput(values));
    }
    Ok(RawResults { manifest, projects })
}

fn key(v: f64) -> i64 {
    (v * 1000.0).round() as i64
}

/// Indices of the best (largest, compared at 3 decimals) present values.
pub fn best_indices(values: &[Option<f64>]) -> Vec<usize> {
    let Some(best) = values.iter().flatten().map(|v| key(*v)).max() else {
        return Vec::new();
    };
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_some_and(|v| key(v) == best))
        .map(|(i, _)| i)
        .collect()
}

/// A metric table: one row per project plus mean and median footers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metric: Metric,
    pub approaches: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
    pub mean: Vec<Option<f64>>,
    pub median: Vec<Option<f64>>,
}

pub fn table(results: &RawResults, metric: Metric) -> Table {
    let approaches = results.approaches();
    let rows = results
        .projects
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let values = approaches.iter().map(|a| results.value(i, a, metric)).collect();
            (p.project.clone(), values)
        })
        .collect();
    let foot = footer(&results.projects, &approaches, &[metric]);
    Table {
        metric,
        approaches,
        rows,
        mean: foot.iter().map(|f| f.mean).collect(),
        median: foot.iter().map(|f| f.median).collect(),
    }
}

impl Table {
    fn all_rows(&self) -> Vec<(&str, &[Option<f64>])> {
        let mut out: Vec<(&str, &[Option<f64>])> = self.rows.iter().map(|(p, v)| (p.as_str(), v.as_slice())).collect();
        out.push(("Mean", &self.mean));
        out.push(("Median", &self.median));
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| Project | {} |", self.approaches.join(" | "));
        let _ = writeln!(s, "|---|{}", "---:|".repeat(self.approaches.len()));
        for (label, values) in self.all_rows() {
            let best = best_indices(values);
            let cells: Vec<String> = values
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    None => "NO_DATA".to_string(),
                    Some(v) if best.contains(&i) => format!("**{v:.3}**"),
                    Some(v) => format!("{v:.3}"),
                })
                .collect();
            let label = if label == "Mean" || label == "Median" { format!("*{label}*") } else { label.to_string() };
            let _ = writeln!(s, "| {label} | {} |", cells.join(" | "));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ReportError> {
        let csv_err = |source| ReportError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["project".to_string()];
        header.extend(self.approaches.iter().cloned());
        header.push("best".into());
        w.write_record(&header).map_err(csv_err)?;
        for (label, values) in self.all_rows() {
            let mut record = vec![label.to_ascii_lowercase()];
            if label != "Mean" && label != "Median" {
                record[0] = label.to_string();
            }
            record.extend(values.iter().map(|v| v.map(|v| v.to_string()).unwrap_or_else(|| "NO_DATA".into())));
            let best: Vec<&str> = best_indices(values).iter().map(|&i| self.approaches[i].as_str()).collect();
            record.push(best.join(";"));
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(|e| ReportError::Eval(io_err(path)(e)))?;
        Ok(())
    }
}

/// Linear interpolation between closest ranks (`(n - 1) * p`), `values`
/// sorted ascending.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub approach: String,
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Most extreme data points within 1.5 IQR of the box.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub mean: f64,
    /// `;`-separated.
    pub outliers: String,
}

pub fn box_stats(approach: &str, values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    let reach = 1.5 * (q3 - q1);
    let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= q1 - reach && *x <= q3 + reach).collect();
    let outliers: Vec<String> = v
        .iter()
        .filter(|x| **x < q1 - reach || **x > q3 + reach)
        .map(|x| x.to_string())
        .collect();
    Some(BoxStats {
        approach: approach.to_string(),
        n: v.len(),
        q1,
        median,
        q3,
        whisker_low: inside[0],
        whisker_high: inside[inside.len() - 1],
        mean: metrics::aggregate(&v).ok()?.mean,
        outliers: outliers.join(";"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct FriedmanRow {
    metric: String,
    projects: usize,
    approaches: usize,
    statistic: Option<f64>,
    p_value: Option<f64>,
    note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CdRow {
    approach: String,
    mean_rank: f64,
    /// 1-based group numbers, `;`-separated.
    groups: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PairRow {
    a: String,
    b: String,
    p_adjusted: f64,
}

/// Writes `<metric>.csv|md`, `boxplot_<metric>.csv`, `cd_<metric>.csv`,
/// `pairwise_<metric>.csv` and `friedman.csv` into `out`.
pub fn write_report(results: &RawResults, format: Format, out: &Path, alpha: f64) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(out).map_err(|e| ReportError::Eval(io_err(out)(e)))?;
    let mut written = Vec::new();
    let mut friedman_rows = Vec::new();
    for metric in results.metrics() {
        let t = table(results, metric);
        let name = metric.name();
        match format {
            Format::Csv => {
                let p = out.join(format!("{name}.csv"));
                t.write_csv(&p)?;
                written.push(p);
            }
            Format::Markdown => {
                let p = out.join(format!("{name}.md"));
                fs::write(&p, t.to_markdown()).map_err(|e| ReportError::Eval(io_err(&p)(e)))?;
                written.push(p);
            }
        }

        let boxes: Vec<BoxStats> = t
            .approaches
            .iter()
            .enumerate()
            .filter_map(|(j, a)| {
                let col: Vec<f64> = t.rows.iter().filter_map(|(_, v)| v[j]).collect();
                box_stats(a, &col)
            })
            .collect();
        let p = out.join(format!("boxplot_{name}.csv"));
        write_csv(&p, &boxes)?;
        written.push(p);

        // Friedman needs complete rows
        let complete: Vec<Vec<f64>> = t
            .rows
            .iter()
            .filter_map(|(_, v)| v.iter().copied().collect::<Option<Vec<f64>>>())
            .collect();
        let n_projects = complete.len();
        match ScoreMatrix::new(complete) {
            Ok(m) => {
                let g = cd_grouping(&m, alpha);
                friedman_rows.push(FriedmanRow {
                    metric: name.into(),
                    projects: n_projects,
                    approaches: t.approaches.len(),
                    statistic: Some(g.friedman.statistic),
                    p_value: Some(g.friedman.p_value),
                    note: if g.adjusted.is_some() {
                        format!("rejected at alpha={alpha}")
                    } else {
                        format!("not rejected at alpha={alpha}")
                    },
                });
                let cd: Vec<CdRow> = g
                    .order
                    .iter()
                    .map(|&j| CdRow {
                        approach: t.approaches[j].clone(),
                        mean_rank: g.friedman.mean_ranks[j],
                        groups: g
                            .groups
                            .iter()
                            .enumerate()
                            .filter(|(_, grp)| grp.contains(&j))
                            .map(|(i, _)| (i + 1).to_string())
                            .collect::<Vec<_>>()
                            .join(";"),
                    })
                    .collect();
                let p = out.join(format!("cd_{name}.csv"));
                write_csv(&p, &cd)?;
                written.push(p);
                if let Some(adj) = &g.adjusted {
                    let mut pairs = Vec::new();
                    for a in 0..t.approaches.len() {
                        for b in a + 1..t.approaches.len() {
                            pairs.push(PairRow {
                                a: t.approaches[a].clone(),
                                b: t.approaches[b].clone(),
                                p_adjusted: adj[a][b],
                            });
                        }
                    }
                    let p = out.join(format!("pairwise_{name}.csv"));
                    write_csv(&p, &pairs)?;
                    written.push(p);
                }
            }
            Err(_) => friedman_rows.push(FriedmanRow {
                metric: name.into(),
                projects: n_projects,
                approaches: t.approaches.len(),
                statistic: None,
                p_value: None,
                note: "needs at least 2 complete projects and 2 approaches".into(),
            }),
        }
    }
    let p = out.join("friedman.csv");
    write_csv(&p, &friedman_rows)?;
    written.push(p);
    Ok(written)
}
