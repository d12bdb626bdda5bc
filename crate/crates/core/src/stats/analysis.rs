use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::{mann_whitney_u, shapiro_wilk, vargha_delaney_a12};
use crate::error::StatsError;
use crate::metrics::{AppFilter, RESULTS_HEADER, TIMESERIES_HEADER};
use crate::scenario::InstanceId;
use crate::trace::App;

pub const ANALYSIS_HEADER: &str = "metric,instance_a,instance_b,u_statistic,p_value,a12";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    DataReceived,
    Satisfaction,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::DataReceived => "data_received",
            Metric::Satisfaction => "satisfaction",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "data_received" => Ok(Metric::DataReceived),
            "satisfaction" => Ok(Metric::Satisfaction),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultRow {
    pub instance: InstanceId,
    pub replication: u32,
    pub app: AppFilter,
    pub interests_sent: u64,
    pub data_received: u64,
}

impl ResultRow {
    fn value(&self, metric: Metric) -> Result<f64, StatsError> {
        match metric {
            Metric::DataReceived => Ok(self.data_received as f64),
            Metric::Satisfaction if self.interests_sent > 0 => {
                Ok(self.data_received as f64 / self.interests_sent as f64)
            }
            Metric::Satisfaction => Err(StatsError::NoInterests(format!(
                "{} {} replication {}",
                self.instance, self.app, self.replication
            ))),
        }
    }
}

/// Parsed combined results file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultSet {
    pub rows: Vec<ResultRow>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> StatsError {
    StatsError::Parse { line, msg: msg.into() }
}

impl ResultSet {
    pub fn parse(text: &str) -> Result<ResultSet, StatsError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == RESULTS_HEADER => {}
            _ => return Err(parse_err(1, format!("expected header {RESULTS_HEADER:?}"))),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(parse_err(n, format!("expected 5 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<u64>().map_err(|e| parse_err(n, format!("{s:?}: {e}")));
            rows.push(ResultRow {
                instance: f[0]
                    .parse()
                    .map_err(|e: crate::error::UnknownInstance| parse_err(n, e.to_string()))?,
                replication: num(f[1])? as u32,
                app: f[2].parse().map_err(|e: String| parse_err(n, e))?,
                interests_sent: num(f[3])?,
                data_received: num(f[4])?,
            });
        }
        Ok(ResultSet { rows })
    }

    fn rows_for(&self, instance: InstanceId, app: AppFilter) -> Vec<&ResultRow> {
        let mut rows: Vec<&ResultRow> = self
            .rows
            .iter()
            .filter(|r| r.instance == instance && r.app == app)
            .collect();
        rows.sort_by_key(|r| r.replication);
        rows
    }

    /// One value per replication, in replication order.
    pub fn sample(&self, instance: InstanceId, app: AppFilter, metric: Metric) -> Result<Vec<f64>, StatsError> {
        self.rows_for(instance, app).iter().map(|r| r.value(metric)).collect()
    }

    pub fn totals_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.app == AppFilter::All).count()
    }

    fn require_all(&self) -> Result<(), StatsError> {
        for i in InstanceId::ALL {
            match self.rows_for(i, AppFilter::All).len() {
                0 => return Err(StatsError::MissingInstance(i.to_string())),
                1 => return Err(StatsError::TooFewReplications(i.to_string())),
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub metric: Metric,
    pub a: InstanceId,
    pub b: InstanceId,
    pub u: f64,
    pub p: f64,
    pub a12: f64,
}

/// Pairwise tests over the four instances. `None` marks the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrices {
    pub metric: Metric,
    pub p: [[Option<f64>; 4]; 4],
    /// A12(row, column).
    pub a12: [[Option<f64>; 4]; 4],
    pub pairs: Vec<PairRow>,
}

pub fn pairwise_matrices(results: &ResultSet, metric: Metric) -> Result<Matrices, StatsError> {
    results.require_all()?;
    let samples = InstanceId::ALL
        .iter()
        .map(|&i| results.sample(i, AppFilter::All, metric))
        .collect::<Result<Vec<_>, _>>()?;
    let mut p = [[None; 4]; 4];
    let mut a12 = [[None; 4]; 4];
    let mut pairs = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                continue;
            }
            let t = mann_whitney_u(&samples[i], &samples[j])?;
            p[i][j] = Some(t.p_value);
            a12[i][j] = Some(vargha_delaney_a12(&samples[i], &samples[j])?);
            if i < j {
                pairs.push(PairRow {
                    metric,
                    a: InstanceId::ALL[i],
                    b: InstanceId::ALL[j],
                    u: t.statistic,
                    p: t.p_value,
                    a12: a12[i][j].expect("just set"),
                });
            }
        }
    }
    Ok(Matrices { metric, p, a12, pairs })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.4}"))
}

impl Matrices {
    pub fn get(&self, a: InstanceId, b: InstanceId) -> (Option<f64>, Option<f64>) {
        let ia = InstanceId::ALL.iter().position(|x| *x == a).expect("known instance");
        let ib = InstanceId::ALL.iter().position(|x| *x == b).expect("known instance");
        (self.p[ia][ib], self.a12[ia][ib])
    }

    /// Rows under [`ANALYSIS_HEADER`], without the header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for r in &self.pairs {
            let _ = writeln!(out, "{},{},{},{},{:.6e},{:.6}", r.metric, r.a, r.b, r.u, r.p, r.a12);
        }
        out
    }

    /// Both matrices as aligned text.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for (title, m) in [("Mann-Whitney p-value", &self.p), ("A12 (row vs column)", &self.a12)] {
            let _ = writeln!(out, "{title} [{}]", self.metric);
            let _ = write!(out, "{:<10}", "");
            for i in InstanceId::ALL {
                let _ = write!(out, " {:>10}", i.as_str());
            }
            out.push('\n');
            for (r, row) in m.iter().enumerate() {
                let _ = write!(out, "{:<10}", InstanceId::ALL[r].as_str());
                for v in row {
                    let _ = write!(out, " {:>10}", cell(*v));
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    })
}

/// `instance,replications,mean_satisfaction,min_satisfaction,max_satisfaction,mean_interests_sent,mean_data_received`
pub fn instance_summary(results: &ResultSet) -> Result<String, StatsError> {
    results.require_all()?;
    let mut out = String::from(
        "instance,replications,mean_satisfaction,min_satisfaction,max_satisfaction,mean_interests_sent,mean_data_received\n",
    );
    for i in InstanceId::ALL {
        let s = results.sample(i, AppFilter::All, Metric::Satisfaction)?;
        let rows = results.rows_for(i, AppFilter::All);
        let sent: Vec<f64> = rows.iter().map(|r| r.interests_sent as f64).collect();
        let recv: Vec<f64> = rows.iter().map(|r| r.data_received as f64).collect();
        let (lo, hi) = min_max(&s);
        let _ = writeln!(
            out,
            "{i},{},{:.6},{lo:.6},{hi:.6},{:.1},{:.1}",
            s.len(),
            mean(&s),
            mean(&sent),
            mean(&recv)
        );
    }
    Ok(out)
}

/// Mixed-application instances split by consumer type: four rows.
pub fn per_app_table(results: &ResultSet) -> Result<String, StatsError> {
    let mut out = String::from("instance,app,mean_interests_sent,mean_data_received,mean_satisfaction\n");
    for i in InstanceId::ALL.into_iter().filter(|i| i.mixed()) {
        for app in [App::Cbr, App::Modified] {
            let filter = AppFilter::Only(app);
            let rows = results.rows_for(i, filter);
            if rows.is_empty() {
                return Err(StatsError::MissingInstance(format!("{i} {app}")));
            }
            let s = results.sample(i, filter, Metric::Satisfaction)?;
            let sent: Vec<f64> = rows.iter().map(|r| r.interests_sent as f64).collect();
            let recv: Vec<f64> = rows.iter().map(|r| r.data_received as f64).collect();
            let _ = writeln!(out, "{i},{app},{:.1},{:.1},{:.6}", mean(&sent), mean(&recv), mean(&s));
        }
    }
    Ok(out)
}

/// Shapiro-Wilk per instance; informational only.
pub fn normality(results: &ResultSet, metric: Metric) -> String {
    let mut out = String::from("metric,instance,w,p_value\n");
    for i in InstanceId::ALL {
        let r = results.sample(i, AppFilter::All, metric).and_then(|s| shapiro_wilk(&s));
        match r {
            Ok(t) => {
                let _ = writeln!(out, "{metric},{i},{:.6},{:.6e}", t.statistic, t.p_value);
            }
            Err(e) => {
                let _ = writeln!(out, "{metric},{i},n/a,n/a ({e})");
            }
        }
    }
    out
}

/// Per-second means across replications from a combined time-series file:
/// `instance,second,mean_interests_sent,mean_data_received`.
pub fn timeseries_means(text: &str) -> Result<String, StatsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TIMESERIES_HEADER => {}
        _ => return Err(parse_err(1, format!("expected header {TIMESERIES_HEADER:?}"))),
    }
    let mut acc: BTreeMap<(InstanceId, u64), (f64, f64, u32)> = BTreeMap::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(parse_err(n, format!("expected 5 fields, got {}", f.len())));
        }
        let instance: InstanceId = f[0]
            .parse()
            .map_err(|e: crate::error::UnknownInstance| parse_err(n, e.to_string()))?;
        let num = |s: &str| s.parse::<u64>().map_err(|e| parse_err(n, format!("{s:?}: {e}")));
        let e = acc.entry((instance, num(f[2])?)).or_default();
        e.0 += num(f[3])? as f64;
        e.1 += num(f[4])? as f64;
        e.2 += 1;
    }
    let mut out = String::from("instance,second,mean_interests_sent,mean_data_received\n");
    for ((i, s), (sent, recv, k)) in acc {
        let k = k as f64;
        let _ = writeln!(out, "{i},{s},{:.3},{:.3}", sent / k, recv / k);
    }
    Ok(out)
}
