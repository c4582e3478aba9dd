//! Rank statistics for comparing configurations across datasets.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Largest effective sample size handled by the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

/// 1-based ascending ranks; tied values share the mean of their rank span.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let r = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

fn check_matrix(scores: &[Vec<f64>]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::Empty("no configurations".into()));
    }
    let d = scores[0].len();
    if d == 0 {
        return Err(Error::Empty("no datasets".into()));
    }
    for (i, row) in scores.iter().enumerate() {
        if row.len() != d {
            return Err(Error::shape(format!(
                "configuration {i} has {} scores, expected {d}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "missing score for configuration {i} on dataset {j}"
            )));
        }
    }
    Ok(d)
}

/// Mean rank of each configuration (row) over datasets (columns); rank 1 is
/// the highest score on a dataset.
pub fn average_ranks(scores: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = check_matrix(scores)?;
    let m = scores.len();
    let mut total = vec![0.0; m];
    for j in 0..d {
        let col: Vec<f64> = scores.iter().map(|r| -r[j]).collect();
        for (t, r) in total.iter_mut().zip(mid_ranks(&col)) {
            *t += r;
        }
    }
    Ok(total.into_iter().map(|t| t / d as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences.
    pub statistic: f64,
    pub p_value: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub exact: bool,
    /// Every difference was zero; `p_value` is 1.
    pub degenerate: bool,
}

/// Number of sign assignments reaching each doubled rank sum.
fn signed_rank_counts(doubled: &[u64]) -> Vec<u64> {
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Two-sided signed-rank test on `x - y`. Zero differences are dropped and
/// tied magnitudes get mid-ranks. Up to [`EXACT_MAX_N`] pairs the p-value
/// comes from the exact null distribution; above that from the normal
/// approximation with tie-corrected variance and continuity correction.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} vs {} paired values", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in paired sample"));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|&v| v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            n: 0,
            exact: true,
            degenerate: true,
        });
    }
    if n < 3 {
        return Err(Error::invalid(format!(
            "signed-rank test needs at least 3 non-zero differences, got {n}"
        )));
    }
    let ranks = mid_ranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();

    if n <= EXACT_MAX_N {
        let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
        let w2 = (2.0 * w_plus).round() as usize;
        let counts = signed_rank_counts(&doubled);
        let le: u64 = counts[..=w2].iter().sum();
        let ge: u64 = counts[w2..].iter().sum();
        let p = (2.0 * le.min(ge) as f64 / 2f64.powi(n as i32)).min(1.0);
        return Ok(WilcoxonResult {
            statistic: w_plus,
            p_value: p,
            n,
            exact: true,
            degenerate: false,
        });
    }

    let mean: f64 = ranks.iter().sum::<f64>() / 2.0;
    let var: f64 = ranks.iter().map(|r| r * r).sum::<f64>() / 4.0;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(WilcoxonResult {
        statistic: w_plus,
        p_value: erfc(z / std::f64::consts::SQRT_2).min(1.0),
        n,
        exact: false,
        degenerate: false,
    })
}

/// Holm step-down: the `i`-th smallest p-value (1-based) is rejected while
/// `p ≤ α / (m − i + 1)`; the first acceptance stops the procedure. Flags come
/// back in input order.
pub fn holm_correction(pvals: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]).then(a.cmp(&b)));
    let mut reject = vec![false; m];
    for (i, &idx) in order.iter().enumerate() {
        if pvals[idx] <= alpha / (m - i) as f64 {
            reject[idx] = true;
        } else {
            break;
        }
    }
    Ok(reject)
}

/// Configurations sorted by average rank, ties by index.
pub fn rank_order(ranks: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ranks.len()).collect();
    order.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]).then(a.cmp(&b)));
    order
}

/// Maximal runs of configurations, contiguous in rank order, that contain no
/// rejected pair. Runs of length 1 are omitted. Each group lists
/// configuration indices in rank order.
pub fn cd_groups(ranks: &[f64], reject: &[Vec<bool>]) -> Result<Vec<Vec<usize>>> {
    let m = ranks.len();
    if reject.len() != m || reject.iter().any(|r| r.len() != m) {
        return Err(Error::shape(format!("reject matrix must be {m}×{m}")));
    }
    for i in 0..m {
        if reject[i][i] {
            return Err(Error::invalid("reject matrix has a true diagonal entry"));
        }
        for j in 0..i {
            if reject[i][j] != reject[j][i] {
                return Err(Error::invalid("reject matrix is not symmetric"));
            }
        }
    }
    let order = rank_order(ranks);
    let mut groups = Vec::new();
    let mut last_end = 0;
    for start in 0..m {
        let mut end = start;
        while end + 1 < m && (start..=end).all(|k| !reject[order[k]][order[end + 1]]) {
            end += 1;
        }
        if end > start && (groups.is_empty() || end > last_end) {
            groups.push(order[start..=end].to_vec());
        }
        last_end = last_end.max(end);
    }
    Ok(groups)
}

/// Average ranks, pairwise tests and Holm-corrected groups for one score
/// matrix (configurations × datasets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdAnalysis {
    pub configs: Vec<String>,
    pub average_ranks: Vec<f64>,
    pub p_values: Vec<Vec<f64>>,
    pub reject: Vec<Vec<bool>>,
    pub groups: Vec<Vec<usize>>,
    pub alpha: f64,
}

/// The Holm family is every unordered pair of configurations. A pair with
/// fewer than three non-zero differences is treated as not separable
/// (`p = 1`).
pub fn cd_analysis(configs: &[String], scores: &[Vec<f64>], alpha: f64) -> Result<CdAnalysis> {
    if configs.len() != scores.len() {
        return Err(Error::shape(format!(
            "{} names for {} score rows",
            configs.len(),
            scores.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let ranks = average_ranks(scores)?;
    let m = scores.len();
    let mut p = vec![vec![1.0; m]; m];
    let mut pairs = Vec::new();
    let mut flat = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let pv = match wilcoxon_signed_rank(&scores[i], &scores[j]) {
                Ok(r) => r.p_value,
                Err(Error::Invalid(_)) => 1.0,
                Err(e) => return Err(e),
            };
            p[i][j] = pv;
            p[j][i] = pv;
            pairs.push((i, j));
            flat.push(pv);
        }
    }
    let flags = holm_correction(&flat, alpha)?;
    let mut reject = vec![vec![false; m]; m];
    for (&(i, j), &r) in pairs.iter().zip(&flags) {
        reject[i][j] = r;
        reject[j][i] = r;
    }
    let groups = cd_groups(&ranks, &reject)?;
    Ok(CdAnalysis {
        configs: configs.to_vec(),
        average_ranks: ranks,
        p_values: p,
        reject,
        groups,
        alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub pearson: f64,
    pub spearman: f64,
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("correlation undefined for a constant vector"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Signed Pearson and Spearman coefficients between an external per-model
/// metric and per-model accuracy.
pub fn score_correlation(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    if xs.len() != ys.len() {
        return Err(Error::shape(format!("{} vs {} values", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::invalid("correlation needs at least 3 points"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in correlation input"));
    }
    Ok(Correlation {
        pearson: pearson(xs, ys)?,
        spearman: pearson(&mid_ranks(xs), &mid_ranks(ys))?,
    })
}
