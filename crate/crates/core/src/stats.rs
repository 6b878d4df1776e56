//! Rank statistics for comparing approaches across subject programs.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("score matrix needs at least 2 rows and 2 columns of finite values, all rows equally long")]
    DegenerateMatrix,
    #[error("every paired difference is zero")]
    AllZeroDifferences,
    #[error("no pairs given")]
    NoPairs,
}

/// Rows are subject programs, columns are approaches.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        let k = rows.first().map_or(0, Vec::len);
        let ok = rows.len() >= 2
            && k >= 2
            && rows.iter().all(|r| r.len() == k && r.iter().all(|v| v.is_finite()));
        if ok {
            Ok(ScoreMatrix { rows })
        } else {
            Err(StatsError::DegenerateMatrix)
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn datasets(&self) -> usize {
        self.rows.len()
    }

    pub fn approaches(&self) -> usize {
        self.rows[0].len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Ranks `values` ascending from 1; ties share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            ranks[p] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq)]
pub struct Friedman {
    pub statistic: f64,
    pub p_value: f64,
    /// Per column; rank 1 is the best (highest) score.
    pub mean_ranks: Vec<f64>,
}

/// Friedman test with the chi-square approximation (k − 1 degrees of
/// freedom), without tie correction.
pub fn friedman(matrix: &ScoreMatrix) -> Friedman {
    let n = matrix.datasets() as f64;
    let k = matrix.approaches();
    let mut mean_ranks = vec![0.0; k];
    for row in matrix.rows() {
        let negated: Vec<f64> = row.iter().map(|v| -v).collect();
        for (acc, r) in mean_ranks.iter_mut().zip(average_ranks(&negated)) {
            *acc += r;
        }
    }
    for r in &mut mean_ranks {
        *r /= n;
    }
    let kf = k as f64;
    let centre = (kf + 1.0) / 2.0;
    let spread: f64 = mean_ranks.iter().map(|r| (r - centre) * (r - centre)).sum();
    let statistic = (12.0 * n / (kf * (kf + 1.0)) * spread).max(0.0);
    Friedman {
        statistic,
        p_value: chi2_sf(statistic, kf - 1.0),
        mean_ranks,
    }
}

/// Largest count of non-zero differences that gets the exact null distribution.
pub const WILCOXON_EXACT_MAX: usize = 20;

/// Two-sided Wilcoxon signed-rank p-value for paired samples.
///
/// Zero differences are dropped and tied magnitudes share average ranks. Up
/// to [`WILCOXON_EXACT_MAX`] differences the exact null distribution of the
/// positive rank sum is enumerated; beyond that a normal approximation with
/// tie-corrected variance and continuity correction is used.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<f64, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::NoPairs);
    }
    let diffs: Vec<f64> = pairs.iter().map(|(x, y)| y - x).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let n = diffs.len();
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    if n <= WILCOXON_EXACT_MAX {
        // doubled ranks are integers even with ties
        let doubled: Vec<usize> = ranks.iter().map(|r| libm::round(r * 2.0) as usize).collect();
        let max: usize = doubled.iter().sum();
        let mut counts = vec![0.0f64; max + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=max).rev() {
                counts[s] += counts[s - r];
            }
        }
        let total = libm::pow(2.0, n as f64);
        let w = libm::round(w_plus * 2.0) as usize;
        let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
        let upper: f64 = counts[w..].iter().sum::<f64>() / total;
        return Ok((2.0 * lower.min(upper)).min(1.0));
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = magnitudes;
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((w_plus - mean).abs() - 0.5) / libm::sqrt(var);
    Ok((2.0 * normal_sf(z)).min(1.0))
}

/// Holm step-down adjustment; results are in the input order.
pub fn holm_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (j, &i) in idx.iter().enumerate() {
        let scaled = ((m - j) as f64 * p_values[i]).min(1.0);
        running = running.max(scaled);
        out[i] = running;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdGrouping {
    pub friedman: Friedman,
    /// Column indices, best mean rank first.
    pub order: Vec<usize>,
    /// Holm-adjusted pairwise p-values, indexed by column; the diagonal is 1.
    /// `None` when the omnibus test did not reject.
    pub adjusted: Option<Vec<Vec<f64>>>,
    /// Sets of columns with no significant difference inside, each listed in
    /// `order`. Every column is in at least one group.
    pub groups: Vec<Vec<usize>>,
}

/// Critical-difference grouping: when Friedman rejects at `alpha`, pairwise
/// Wilcoxon tests on the columns, Holm-adjusted, decide which approaches are
/// connected. Groups are maximal runs of the mean-rank order whose members
/// pairwise do not differ.
pub fn cd_grouping(matrix: &ScoreMatrix, alpha: f64) -> CdGrouping {
    let friedman = friedman(matrix);
    let k = matrix.approaches();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| friedman.mean_ranks[a].total_cmp(&friedman.mean_ranks[b]).then(a.cmp(&b)));
    if friedman.p_value >= alpha {
        return CdGrouping {
            friedman,
            groups: vec![order.clone()],
            order,
            adjusted: None,
        };
    }

    let mut pairs = Vec::new();
    let mut raw = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let xy: Vec<(f64, f64)> = matrix.rows().iter().map(|r| (r[a], r[b])).collect();
            raw.push(wilcoxon_signed_rank(&xy).unwrap_or(1.0));
            pairs.push((a, b));
        }
    }
    let mut adjusted = vec![vec![1.0; k]; k];
    for ((a, b), p) in pairs.into_iter().zip(holm_adjust(&raw)) {
        adjusted[a][b] = p;
        adjusted[b][a] = p;
    }

    let connected = |lo: usize, hi: usize| {
        (lo..=hi).all(|i| (i + 1..=hi).all(|j| adjusted[order[i]][order[j]] >= alpha))
    };
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last_end = None;
    for start in 0..k {
        let mut end = start;
        while end + 1 < k && connected(start, end + 1) {
            end += 1;
        }
        // only keep runs not contained in the previous one
        if last_end.map_or(true, |e| end > e) {
            groups.push(order[start..=end].to_vec());
            last_end = Some(end);
        }
    }
    CdGrouping {
        friedman,
        order,
        adjusted: Some(adjusted),
        groups,
    }
}

/// Upper tail of the standard normal distribution.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / core::f64::consts::SQRT_2)
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df / 2.0, x / 2.0)
}

/// Regularized upper incomplete gamma function Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = a * libm::log(x) - x - libm::lgamma(a);
    if x < a + 1.0 {
        // series for P(a, x)
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (1.0 - sum * libm::exp(log_prefix)).clamp(0.0, 1.0)
    } else {
        // Lentz continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (libm::exp(log_prefix) * h).clamp(0.0, 1.0)
    }
}
