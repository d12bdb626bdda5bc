use statrs::distribution::{ContinuousCDF, Normal};

use super::{check_sample, Method, TestResult};
use crate::error::StatsError;

/// Largest combined size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 16;

/// Midranks of the pooled sample, `a` first then `b`, and the tie groups'
/// sizes.
fn midranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) share rank (i+1 + j) / 2.
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// U for `a`: the number of pairs with `a > b`, ties counting one half.
pub fn u_statistic(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check_sample(a)?;
    check_sample(b)?;
    let (ranks, _) = midranks(a, b);
    let m = a.len() as f64;
    let ra: f64 = ranks[..a.len()].iter().sum();
    Ok(ra - m * (m + 1.0) / 2.0)
}

/// Number of arrangements of `m` + `n` distinct values giving each U, for
/// U in `0..=m*n`.
fn exact_counts(m: usize, n: usize) -> Vec<u64> {
    // f[i][j] = counts for sizes (i, j); recurrence on whether the largest
    // value belongs to the first sample (adds j to U) or the second.
    let mut f: Vec<Vec<Vec<u64>>> = vec![vec![Vec::new(); n + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=n {
            let mut c = vec![0u64; i * j + 1];
            if i == 0 || j == 0 {
                c[0] = 1;
            } else {
                for (u, x) in f[i - 1][j].iter().enumerate() {
                    c[u + j] += x;
                }
                for (u, x) in f[i][j - 1].iter().enumerate() {
                    c[u] += x;
                }
            }
            f[i][j] = c;
        }
    }
    std::mem::take(&mut f[m][n])
}

/// Two-sided Mann-Whitney U test of `a` against `b`.
///
/// Exact when the combined size is at most [`EXACT_MAX_N`] and there are no
/// ties; otherwise the normal approximation with tie and continuity
/// correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    check_sample(a)?;
    check_sample(b)?;
    let (ranks, ties) = midranks(a, b);
    let (m, n) = (a.len(), b.len());
    let (mf, nf) = (m as f64, n as f64);
    let u = ranks[..m].iter().sum::<f64>() - mf * (mf + 1.0) / 2.0;

    if m + n <= EXACT_MAX_N && ties.is_empty() {
        let counts = exact_counts(m, n);
        let total: u64 = counts.iter().sum();
        let k = u.round() as usize;
        let lower: u64 = counts[..=k].iter().sum();
        let upper: u64 = counts[k..].iter().sum();
        let p = (2.0 * lower.min(upper) as f64 / total as f64).min(1.0);
        return Ok(TestResult {
            statistic: u,
            p_value: p,
            method: Method::Exact,
        });
    }

    let big_n = mf + nf;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (big_n * (big_n - 1.0));
    let var = mf * nf / 12.0 * ((big_n + 1.0) - tie_term);
    let mu = mf * nf / 2.0;
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        (2.0 * normal.sf(z)).min(1.0)
    };
    Ok(TestResult {
        statistic: u,
        p_value: p,
        method: Method::NormalApprox,
    })
}
