use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vndn::campaign::{self, CampaignOptions, FrameLog, TOOL_VERSION};
use vndn::config::{hex_digest, Config};
use vndn::error::{SimError, StatsError};
use vndn::metrics::AppFilter;
use vndn::scenario::{InstanceId, RunSpec};
use vndn::stats::{self, Metric, ResultSet, ANALYSIS_HEADER};
use vndn::trace::load_trace;

const EXIT_VALIDATION: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(
    name = "vndn",
    version,
    about = "Native vs overlay NDN over a Wi-Fi 6 vehicular hotspot"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// key=value overrides applied on top of the defaults
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate vehicle presence traces trace-001.csv .. trace-N.csv
    GenTraces {
        #[arg(long, default_value_t = 31)]
        runs: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Run one instance over one trace
    Simulate {
        #[arg(long)]
        instance: String,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Replication number; defaults to the number in a trace-NNN file name, else 1
        #[arg(long)]
        replication: Option<u32>,
        #[arg(long)]
        out: PathBuf,
        /// Write frames.csv with one line per wireless frame outcome
        #[arg(long)]
        frame_log: bool,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Run all four instances over every trace
    Campaign {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 31)]
        runs: u32,
        /// Reuse completed runs from an earlier invocation
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        frame_log: bool,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Pairwise tests and summary tables over combined results
    Analyze {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let msg = e.to_string();
        if is_validation(&e) {
            CliError::Validation(msg)
        } else {
            CliError::Runtime(msg)
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn is_validation(e: &SimError) -> bool {
    match e {
        SimError::Trace(vndn::error::TraceError::Io { .. }) => false,
        SimError::Trace(_)
        | SimError::Config(_)
        | SimError::Setup(_)
        | SimError::Instance(_)
        | SimError::Campaign(_) => true,
        SimError::Run { source, .. } => is_validation(source),
        SimError::Kernel(_) | SimError::Io { .. } => false,
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn load_config(arg: &ConfigArg) -> Result<Config, CliError> {
    let Some(path) = &arg.config else {
        return Ok(Config::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Config::from_text(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn replication_from_name(path: &Path) -> Option<u32> {
    path.file_stem()?.to_str()?.strip_prefix("trace-")?.parse().ok()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenTraces {
            runs,
            seed,
            out,
            config,
        } => {
            let cfg = load_config(&config)?;
            let paths = campaign::gen_traces(&out, runs, seed, &cfg)?;
            println!("wrote {} trace(s) to {}", paths.len(), out.display());
        }
        Command::Simulate {
            instance,
            trace,
            seed,
            replication,
            out,
            frame_log,
            config,
        } => {
            let cfg = load_config(&config)?;
            let instance: InstanceId = instance
                .parse()
                .map_err(|e: vndn::error::UnknownInstance| CliError::Validation(e.to_string()))?;
            let trace_file = load_trace(&trace, &cfg.trace_limits()).map_err(SimError::from)?;
            let spec = RunSpec {
                instance,
                replication: replication.or_else(|| replication_from_name(&trace)).unwrap_or(1),
                seed,
            };
            let log = if frame_log { FrameLog::Write } else { FrameLog::Count };
            let s = campaign::simulate_to_dir(spec, &trace_file, &cfg, &out, log)?;
            let m = s.metrics.as_ref().expect("fresh run");
            let t = m.totals(AppFilter::All).unwrap_or_default();
            let purity = s.log_purity.unwrap_or_default();
            println!(
                "{instance} replication {}: interests_sent={} data_received={} wireless_broadcast={} wireless_unicast={}",
                spec.replication, t.interests_sent, t.data_received, purity.wireless_broadcast, purity.wireless_unicast
            );
        }
        Command::Campaign {
            traces,
            out,
            jobs,
            seed,
            runs,
            resume,
            frame_log,
            config,
        } => {
            let mut opts = CampaignOptions::new(traces, &out);
            opts.config = load_config(&config)?;
            opts.jobs = jobs;
            opts.seed = seed;
            opts.replications = runs;
            opts.resume = resume;
            opts.frame_log = if frame_log { FrameLog::Write } else { FrameLog::Off };
            let summary = campaign::run_campaign(&opts)?;
            println!(
                "{} runs ({} reused); combined results in {}",
                summary.runs.len(),
                summary.resumed,
                out.join(campaign::RESULTS_FILE).display()
            );
        }
        Command::Analyze { results, out } => analyze(&results, &out)?,
    }
    Ok(())
}

fn analyze(results: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(results).map_err(|e| CliError::Validation(format!("{}: {e}", results.display())))?;
    let rs = ResultSet::parse(&text)?;
    fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;

    let mut csv = format!("{ANALYSIS_HEADER}\n");
    let mut tables = String::new();
    for metric in [Metric::DataReceived, Metric::Satisfaction] {
        let m = stats::pairwise_matrices(&rs, metric)?;
        csv += &m.csv_rows();
        tables += &m.table();
    }
    write(&out.join("analysis.csv"), &csv)?;
    write(&out.join("matrices.txt"), &tables)?;
    write(&out.join("summary.csv"), &stats::instance_summary(&rs)?)?;
    write(&out.join("per_app.csv"), &stats::per_app_table(&rs)?)?;
    write(&out.join("normality.csv"), &stats::normality(&rs, Metric::DataReceived))?;

    let series = results.with_file_name(campaign::TIMESERIES_FILE);
    if let Ok(ts) = fs::read_to_string(&series) {
        write(&out.join("timeseries_mean.csv"), &stats::timeseries_means(&ts)?)?;
    }
    let manifest = format!(
        "tool={TOOL_VERSION}\nresults={}\nresults_hash={}\n",
        results.display(),
        hex_digest(text.as_bytes())
    );
    write(&out.join(campaign::MANIFEST_FILE), &manifest)?;
    print!("{tables}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replication_from_trace_name() {
        assert_eq!(replication_from_name(Path::new("x/trace-017.csv")), Some(17));
        assert_eq!(replication_from_name(Path::new("x/other.csv")), None);
    }
}
