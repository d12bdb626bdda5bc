use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SHORT: &str = "sim.horizon_s=30\n";

fn vndn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vndn"))
        .args(args)
        .output()
        .expect("spawn vndn")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    config: PathBuf,
    traces: PathBuf,
}

impl Fixture {
    fn new(runs: u32) -> Self {
        let dir = TempDir::new().unwrap();
        let config = dir.path().join("short.cfg");
        fs::write(&config, SHORT).unwrap();
        let traces = dir.path().join("traces");
        let f = Fixture { dir, config, traces };
        ok(&vndn(&[
            "gen-traces",
            "--runs",
            &runs.to_string(),
            "--seed",
            "5",
            "--out",
            s(&f.traces),
            "--config",
            s(&f.config),
        ]));
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn campaign(&self, out: &Path, runs: u32, jobs: u32, extra: &[&str]) -> Output {
        let runs = runs.to_string();
        let jobs = jobs.to_string();
        let mut args = vec![
            "campaign",
            "--traces",
            s(&self.traces),
            "--out",
            s(out),
            "--runs",
            &runs,
            "--jobs",
            &jobs,
            "--seed",
            "3",
            "--config",
            s(&self.config),
        ];
        args.extend_from_slice(extra);
        vndn(&args)
    }
}

#[test]
fn gen_traces_is_deterministic() {
    let f = Fixture::new(2);
    let again = f.path("again");
    ok(&vndn(&[
        "gen-traces",
        "--runs",
        "2",
        "--seed",
        "5",
        "--out",
        s(&again),
        "--config",
        s(&f.config),
    ]));
    for name in ["trace-001.csv", "trace-002.csv"] {
        assert_eq!(
            fs::read(f.traces.join(name)).unwrap(),
            fs::read(again.join(name)).unwrap()
        );
    }
    assert_ne!(
        fs::read(f.traces.join("trace-001.csv")).unwrap(),
        fs::read(f.traces.join("trace-002.csv")).unwrap()
    );

    let one = f.path("one");
    ok(&vndn(&["gen-traces", "--runs", "1", "--out", s(&one)]));
    let names: Vec<_> = fs::read_dir(&one).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec!["trace-001.csv"]);
    let text = fs::read_to_string(one.join("trace-001.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "vehicle_id,enter_s,exit_s,speed_mps,rate_pps,app"
    );
    assert_eq!(text.lines().count(), 126);
}

fn simulate(f: &Fixture, instance: &str, out: &Path) -> Output {
    vndn(&[
        "simulate",
        "--instance",
        instance,
        "--trace",
        s(&f.traces.join("trace-001.csv")),
        "--out",
        s(out),
        "--frame-log",
        "--config",
        s(&f.config),
    ])
}

#[test]
fn simulate_writes_pure_deterministic_output() {
    let f = Fixture::new(1);
    for (instance, unicast_expected) in [("overlay-2", true), ("native-1", false)] {
        let out = f.path(instance);
        let run = simulate(&f, instance, &out);
        ok(&run);
        let frames = fs::read_to_string(out.join("frames.csv")).unwrap();
        let mut lines = frames.lines();
        assert_eq!(lines.next().unwrap(), "time_s,src,dest,service,bytes,outcome");
        let mut n = 0;
        for line in lines {
            let dest = line.split(',').nth(2).unwrap();
            assert_eq!(dest != "broadcast", unicast_expected, "{instance}: {line}");
            n += 1;
        }
        assert!(n > 0);
        let stdout = String::from_utf8_lossy(&run.stdout);
        if unicast_expected {
            assert!(stdout.contains("wireless_broadcast=0"), "{stdout}");
        } else {
            assert!(stdout.contains("wireless_unicast=0"), "{stdout}");
        }

        let again = f.path(&format!("{instance}-again"));
        ok(&simulate(&f, instance, &again));
        for name in [
            "results.csv",
            "timeseries.csv",
            "frames.csv",
            "manifest.txt",
            "config.txt",
        ] {
            assert_eq!(
                fs::read(out.join(name)).unwrap(),
                fs::read(again.join(name)).unwrap(),
                "{name}"
            );
        }
        let results = fs::read_to_string(out.join("results.csv")).unwrap();
        assert_eq!(
            results.lines().next().unwrap(),
            "instance,replication,app,interests_sent,data_received"
        );
    }
}

#[test]
fn unknown_instance_is_a_validation_error() {
    let f = Fixture::new(1);
    let out = simulate(&f, "native-3", &f.path("bad"));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown instance"));
    assert!(!f.path("bad").join("results.csv").exists());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(vndn(&["simulate"]).status.code(), Some(2));
    assert_eq!(vndn(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn bad_config_is_a_validation_error() {
    let f = Fixture::new(1);
    let cfg = f.path("bad.cfg");
    fs::write(&cfg, "mac.cw_min=banana\n").unwrap();
    let out = vndn(&[
        "gen-traces",
        "--runs",
        "1",
        "--out",
        s(&f.path("t")),
        "--config",
        s(&cfg),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn campaign_is_independent_of_jobs_and_resumes() {
    let f = Fixture::new(2);
    let serial = f.path("serial");
    let parallel = f.path("parallel");
    ok(&f.campaign(&serial, 2, 1, &[]));
    ok(&f.campaign(&parallel, 2, 8, &[]));
    for name in ["results.csv", "timeseries.csv", "manifest.txt"] {
        assert_eq!(
            fs::read(serial.join(name)).unwrap(),
            fs::read(parallel.join(name)).unwrap(),
            "{name}"
        );
    }
    let results = fs::read_to_string(serial.join("results.csv")).unwrap();
    // Two replications: all + cbr rows for scenario 1, all + cbr + modified for scenario 2.
    assert_eq!(results.lines().count(), 1 + 2 * (2 + 3 + 2 + 3));

    let rejected = f.campaign(&serial, 2, 1, &[]);
    assert_eq!(rejected.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&rejected.stderr).contains("--resume"));

    let before = fs::read(serial.join("results.csv")).unwrap();
    let resumed = f.campaign(&serial, 2, 1, &["--resume"]);
    ok(&resumed);
    assert!(String::from_utf8_lossy(&resumed.stdout).contains("8 runs (8 reused)"));
    assert_eq!(fs::read(serial.join("results.csv")).unwrap(), before);

    // A run without a manifest is redone.
    fs::remove_file(serial.join("runs/native-1-r002/manifest.txt")).unwrap();
    let resumed = f.campaign(&serial, 2, 1, &["--resume"]);
    ok(&resumed);
    assert!(String::from_utf8_lossy(&resumed.stdout).contains("8 runs (7 reused)"));
    assert_eq!(fs::read(serial.join("results.csv")).unwrap(), before);
}

#[test]
fn campaign_missing_trace_aborts() {
    let f = Fixture::new(31);
    fs::remove_file(f.traces.join("trace-017.csv")).unwrap();
    let out = f.campaign(&f.path("out"), 31, 1, &[]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("trace-017.csv"), "{stderr}");
    assert!(!f.path("out").join("results.csv").exists());
}

#[test]
fn analyze_campaign_output() {
    let f = Fixture::new(3);
    let out = f.path("camp");
    ok(&f.campaign(&out, 3, 2, &[]));
    let analysis = f.path("analysis");
    ok(&vndn(&[
        "analyze",
        "--results",
        s(&out.join("results.csv")),
        "--out",
        s(&analysis),
    ]));

    let csv = fs::read_to_string(analysis.join("analysis.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "metric,instance_a,instance_b,u_statistic,p_value,a12"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows.iter().filter(|r| r.starts_with("data_received,")).count(), 6);

    let per_app = fs::read_to_string(analysis.join("per_app.csv")).unwrap();
    assert_eq!(per_app.lines().count(), 1 + 4);
    let summary = fs::read_to_string(analysis.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4);
    assert!(analysis.join("matrices.txt").exists());
    assert!(analysis.join("normality.csv").exists());
    let series = fs::read_to_string(analysis.join("timeseries_mean.csv")).unwrap();
    assert!(series.lines().count() > 1);
}

#[test]
fn analyze_identical_samples() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("instance,replication,app,interests_sent,data_received\n");
    for inst in ["native-1", "native-2", "overlay-1", "overlay-2"] {
        for (k, recv) in [(1, 500), (2, 700), (3, 600)] {
            text += &format!("{inst},{k},all,1000,{recv}\n");
            if inst.ends_with('2') {
                text += &format!(
                    "{inst},{k},cbr,500,{}\n{inst},{k},modified,500,{}\n",
                    recv / 2,
                    recv / 2
                );
            }
        }
    }
    let results = dir.path().join("results.csv");
    fs::write(&results, text).unwrap();
    let out = dir.path().join("a");
    ok(&vndn(&["analyze", "--results", s(&results), "--out", s(&out)]));
    let csv = fs::read_to_string(out.join("analysis.csv")).unwrap();
    for row in csv.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[4].parse::<f64>().unwrap(), 1.0, "{row}");
        assert_eq!(cols[5].parse::<f64>().unwrap(), 0.5, "{row}");
    }
}

#[test]
fn analyze_rejects_missing_instance() {
    let dir = TempDir::new().unwrap();
    let results = dir.path().join("results.csv");
    fs::write(
        &results,
        "instance,replication,app,interests_sent,data_received\nnative-1,1,all,10,5\nnative-1,2,all,10,6\n",
    )
    .unwrap();
    let out = vndn(&["analyze", "--results", s(&results), "--out", s(&dir.path().join("a"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("native-2"));
}
