//! Trace generation, single-run output directories and the replicated
//! campaign over all four instances.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{hex_digest, Config};
use crate::error::SimError;
use crate::mac::{Dest, FrameRecord};
use crate::metrics::{PurityCounts, RunMetrics, RESULTS_HEADER, TIMESERIES_HEADER};
use crate::scenario::{run_instance, InstanceId, RunSpec};
use crate::trace::{generate_trace_with, load_trace, write_trace, TraceFile};

pub const TOOL_VERSION: &str = concat!("vndn ", env!("CARGO_PKG_VERSION"));
pub const RESULTS_FILE: &str = "results.csv";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const FRAMES_FILE: &str = "frames.csv";
pub const CONFIG_FILE: &str = "config.txt";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_owned(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<(), SimError> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn trace_path(dir: &Path, replication: u32) -> PathBuf {
    dir.join(format!("trace-{replication:03}.csv"))
}

/// Writes `trace-001.csv` .. `trace-<runs>.csv`; trace `k` uses seed `seed + k`.
pub fn gen_traces(dir: &Path, runs: u32, seed: u64, cfg: &Config) -> Result<Vec<PathBuf>, SimError> {
    if runs < 1 {
        return Err(SimError::Campaign("--runs must be at least 1".into()));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let params = cfg.trace_params();
    (1..=runs)
        .map(|k| {
            let path = trace_path(dir, k);
            write_trace(&path, &generate_trace_with(seed.wrapping_add(k as u64), &params))?;
            Ok(path)
        })
        .collect()
}

/// Identifies the inputs of one result directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub tool: String,
    pub instance: InstanceId,
    pub replication: u32,
    pub seed: u64,
    pub config_hash: String,
    pub trace_hash: String,
}

impl RunManifest {
    pub fn new(spec: RunSpec, cfg: &Config, trace: &TraceFile) -> Self {
        RunManifest {
            tool: TOOL_VERSION.to_owned(),
            instance: spec.instance,
            replication: spec.replication,
            seed: spec.seed,
            config_hash: cfg.hash(),
            trace_hash: hex_digest(trace.emit().as_bytes()),
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "tool={}\ninstance={}\nreplication={}\nseed={}\nconfig_hash={}\ntrace_hash={}\n",
            self.tool, self.instance, self.replication, self.seed, self.config_hash, self.trace_hash
        )
    }

    pub fn parse(text: &str) -> Option<RunManifest> {
        let get = |key: &str| {
            text.lines()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .map(str::to_owned)
        };
        Some(RunManifest {
            tool: get("tool")?,
            instance: get("instance")?.parse().ok()?,
            replication: get("replication")?.parse().ok()?,
            seed: get("seed")?.parse().ok()?,
            config_hash: get("config_hash")?,
            trace_hash: get("trace_hash")?,
        })
    }
}

/// Wireless frame counts by destination kind, taken from a frame log.
pub fn log_purity(log: &[FrameRecord]) -> PurityCounts {
    let mut p = PurityCounts::default();
    for r in log {
        match r.dest {
            Dest::Broadcast => p.wireless_broadcast += 1,
            Dest::Node(_) => p.wireless_unicast += 1,
        }
    }
    p
}

fn frames_text(log: &[FrameRecord]) -> String {
    let mut out = String::with_capacity(48 * (log.len() + 1));
    out.push_str(FrameRecord::HEADER);
    out.push('\n');
    for r in log {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

/// Files of one run's output directory.
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub results: String,
    pub timeseries: String,
}

impl RunFiles {
    fn from_metrics(m: &RunMetrics) -> Self {
        RunFiles {
            results: format!("{RESULTS_HEADER}\n{}", m.result_rows()),
            timeseries: format!("{TIMESERIES_HEADER}\n{}", m.timeseries_rows()),
        }
    }

    fn body(text: &str) -> &str {
        text.split_once('\n').map_or("", |(_, rest)| rest)
    }
}

/// What a campaign learned about one run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub spec: RunSpec,
    /// `None` when the run was reused from a previous invocation.
    pub metrics: Option<RunMetrics>,
    pub log_purity: Option<PurityCounts>,
    pub files: RunFiles,
}

/// Frame logging for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameLog {
    #[default]
    Off,
    /// Record the log and count wireless frames from it.
    Count,
    /// Count and also write `frames.csv`.
    Write,
}

/// Runs one instance and writes results, time series, configuration,
/// manifest and optionally the frame log into `dir`.
pub fn simulate_to_dir(
    spec: RunSpec,
    trace: &TraceFile,
    cfg: &Config,
    dir: &Path,
    frame_log: FrameLog,
) -> Result<RunSummary, SimError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = dir.join(MANIFEST_FILE);
    if manifest.exists() {
        fs::remove_file(&manifest).map_err(io_err(&manifest))?;
    }
    let out = run_instance(spec, trace, cfg, frame_log != FrameLog::Off)?;
    let log_purity = out.frame_log.as_deref().map(log_purity);
    if let (FrameLog::Write, Some(log)) = (frame_log, &out.frame_log) {
        write(&dir.join(FRAMES_FILE), &frames_text(log))?;
    }
    let files = RunFiles::from_metrics(&out.metrics);
    write(&dir.join(RESULTS_FILE), &files.results)?;
    write(&dir.join(TIMESERIES_FILE), &files.timeseries)?;
    write(&dir.join(CONFIG_FILE), &cfg.to_text())?;
    // The manifest goes last: its presence marks the directory complete.
    write(&dir.join(MANIFEST_FILE), &RunManifest::new(spec, cfg, trace).to_text())?;
    Ok(RunSummary {
        spec,
        metrics: Some(out.metrics),
        log_purity,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct CampaignOptions {
    pub traces: PathBuf,
    pub out: PathBuf,
    pub replications: u32,
    pub seed: u64,
    pub jobs: usize,
    pub resume: bool,
    pub frame_log: FrameLog,
    pub config: Config,
}

impl CampaignOptions {
    pub fn new(traces: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        CampaignOptions {
            traces: traces.into(),
            out: out.into(),
            replications: 31,
            seed: 1,
            jobs: 1,
            resume: false,
            frame_log: FrameLog::Off,
            config: Config::default(),
        }
    }
}

#[derive(Debug)]
pub struct CampaignSummary {
    /// Instance-major, then replication order.
    pub runs: Vec<RunSummary>,
    pub results_csv: String,
    pub timeseries_csv: String,
    pub resumed: usize,
}

pub fn run_dir(out: &Path, spec: RunSpec) -> PathBuf {
    out.join("runs")
        .join(format!("{}-r{:03}", spec.instance, spec.replication))
}

fn reuse(dir: &Path, expected: &RunManifest) -> Option<RunFiles> {
    let manifest = RunManifest::parse(&fs::read_to_string(dir.join(MANIFEST_FILE)).ok()?)?;
    if &manifest != expected {
        return None;
    }
    Some(RunFiles {
        results: fs::read_to_string(dir.join(RESULTS_FILE)).ok()?,
        timeseries: fs::read_to_string(dir.join(TIMESERIES_FILE)).ok()?,
    })
}

/// Runs every instance on every trace and writes the combined results.
///
/// Replication `k` of every instance uses `trace-<k>`. Without `resume`, an
/// output directory that already holds runs is rejected; with it, runs whose
/// manifest matches are reused and the rest are redone.
pub fn run_campaign(opts: &CampaignOptions) -> Result<CampaignSummary, SimError> {
    let cfg = &opts.config;
    cfg.validate()?;
    if opts.replications < 1 {
        return Err(SimError::Campaign("at least one replication is required".into()));
    }
    let limits = cfg.trace_limits();
    let mut traces = Vec::with_capacity(opts.replications as usize);
    for k in 1..=opts.replications {
        let path = trace_path(&opts.traces, k);
        if !path.is_file() {
            return Err(SimError::Campaign(format!("missing trace {}", path.display())));
        }
        traces.push(load_trace(&path, &limits)?);
    }

    let runs_dir = opts.out.join("runs");
    let prior = opts.out.join(RESULTS_FILE).exists() || fs::read_dir(&runs_dir).is_ok_and(|mut d| d.next().is_some());
    if prior && !opts.resume {
        return Err(SimError::Campaign(format!(
            "{} already holds campaign output; pass --resume to continue it",
            opts.out.display()
        )));
    }
    fs::create_dir_all(&runs_dir).map_err(io_err(&runs_dir))?;
    write(&opts.out.join(CONFIG_FILE), &cfg.to_text())?;

    let specs: Vec<RunSpec> = InstanceId::ALL
        .iter()
        .flat_map(|&instance| {
            (1..=opts.replications).map(move |replication| RunSpec {
                instance,
                replication,
                seed: opts.seed,
            })
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| SimError::Campaign(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<(RunSummary, bool), SimError>> = pool.install(|| {
        specs
            .par_iter()
            .map(|&spec| {
                let trace = &traces[spec.replication as usize - 1];
                let dir = run_dir(&opts.out, spec);
                if opts.resume {
                    if let Some(files) = reuse(&dir, &RunManifest::new(spec, cfg, trace)) {
                        let summary = RunSummary {
                            spec,
                            metrics: None,
                            log_purity: None,
                            files,
                        };
                        return Ok((summary, true));
                    }
                }
                let result = simulate_to_dir(spec, trace, cfg, &dir, opts.frame_log);
                result.map(|s| (s, false)).map_err(|e| match e {
                    e @ SimError::Run { .. } => e,
                    other => SimError::Run {
                        instance: spec.instance.to_string(),
                        replication: spec.replication,
                        source: Box::new(other),
                    },
                })
            })
            .collect()
    });

    let mut runs = Vec::with_capacity(outcomes.len());
    let mut resumed = 0;
    for o in outcomes {
        let (summary, reused) = o?;
        resumed += reused as usize;
        runs.push(summary);
    }

    let mut results_csv = format!("{RESULTS_HEADER}\n");
    let mut timeseries_csv = format!("{TIMESERIES_HEADER}\n");
    for r in &runs {
        results_csv.push_str(RunFiles::body(&r.files.results));
        timeseries_csv.push_str(RunFiles::body(&r.files.timeseries));
    }
    write(&opts.out.join(RESULTS_FILE), &results_csv)?;
    write(&opts.out.join(TIMESERIES_FILE), &timeseries_csv)?;

    let mut manifest = format!(
        "tool={TOOL_VERSION}\nseed={}\nreplications={}\nconfig_hash={}\n",
        opts.seed,
        opts.replications,
        cfg.hash()
    );
    for (k, t) in traces.iter().enumerate() {
        let _ = writeln!(manifest, "trace_hash.{:03}={}", k + 1, hex_digest(t.emit().as_bytes()));
    }
    write(&opts.out.join(MANIFEST_FILE), &manifest)?;

    Ok(CampaignSummary {
        runs,
        results_csv,
        timeseries_csv,
        resumed,
    })
}
