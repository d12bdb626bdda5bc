//! Nonparametric comparison of replicated runs.

mod analysis;
mod mann_whitney;
mod shapiro;

pub use analysis::{
    instance_summary, normality, pairwise_matrices, per_app_table, timeseries_means, Matrices, Metric, PairRow,
    ResultRow, ResultSet, ANALYSIS_HEADER,
};
pub use mann_whitney::{mann_whitney_u, u_statistic, EXACT_MAX_N};
pub use shapiro::shapiro_wilk;

use std::fmt;

use crate::error::StatsError;
use crate::metrics::{AppFilter, RunMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    NormalApprox,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::NormalApprox => "normal-approximation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
}

pub(crate) fn check_sample(x: &[f64]) -> Result<(), StatsError> {
    if x.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Probability that a value drawn from `a` exceeds one drawn from `b`, ties
/// counting one half.
pub fn vargha_delaney_a12(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let u = u_statistic(a, b)?;
    Ok(u / (a.len() as f64 * b.len() as f64))
}

/// Data received over interests sent for the consumers matching `filter`.
pub fn satisfaction(m: &RunMetrics, filter: AppFilter) -> Result<f64, StatsError> {
    let what = || format!("{} {} replication {}", m.instance, filter, m.replication);
    match m.totals(filter) {
        Some(t) if t.interests_sent > 0 => Ok(t.data_received as f64 / t.interests_sent as f64),
        _ => Err(StatsError::NoInterests(what())),
    }
}
