//! Vehicle presence traces for the 172 m avenue segment.
//!
//! Traces are generated parametrically: uniform entry times, truncated-normal
//! speeds and an occasional bus-stop pause. The CSV form is the exchange
//! format between `gen-traces` and `simulate`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};

use crate::error::TraceError;
use crate::kernel::{RngStream, SimTime};

pub const VEHICLES: usize = 125;
pub const AVENUE_M: f64 = 172.0;
pub const HORIZON_S: f64 = 300.0;
pub const LAST_ENTRY_S: f64 = 280.0;
pub const MEAN_SPEED_KMH: f64 = 31.0;
pub const SD_SPEED_KMH: f64 = 8.0;
pub const MIN_SPEED_KMH: f64 = 5.0;
pub const MAX_SPEED_KMH: f64 = 60.0;
pub const PAUSE_PROBABILITY: f64 = 0.15;
pub const PAUSE_S: f64 = 10.0;
pub const RATE_RANGE: (u32, u32) = (50, 100);

pub const HEADER: &str = "vehicle_id,enter_s,exit_s,speed_mps,rate_pps,app";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum App {
    Cbr,
    Modified,
    Unassigned,
}

impl fmt::Display for App {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            App::Cbr => "cbr",
            App::Modified => "modified",
            App::Unassigned => "unassigned",
        })
    }
}

impl FromStr for App {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cbr" => Ok(App::Cbr),
            "modified" => Ok(App::Modified),
            "unassigned" => Ok(App::Unassigned),
            other => Err(format!("unknown app {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTrace {
    pub vehicle_id: u32,
    pub enter_s: f64,
    pub exit_s: f64,
    pub speed_mps: f64,
    pub rate_pps: u32,
    pub app: App,
}

impl VehicleTrace {
    pub fn enter(&self) -> SimTime {
        SimTime::from_secs_f64(self.enter_s)
    }

    pub fn exit(&self) -> SimTime {
        SimTime::from_secs_f64(self.exit_s)
    }

    pub fn dwell_s(&self) -> f64 {
        self.exit_s - self.enter_s
    }
}

/// Bounds a trace must satisfy to be accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceLimits {
    pub vehicles: usize,
    pub horizon_s: f64,
    pub max_speed_mps: f64,
    pub rate_range: (u32, u32),
}

impl Default for TraceLimits {
    fn default() -> Self {
        TraceLimits {
            vehicles: VEHICLES,
            horizon_s: HORIZON_S,
            max_speed_mps: MAX_SPEED_KMH / 3.6,
            rate_range: RATE_RANGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceFile {
    pub vehicles: Vec<VehicleTrace>,
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Generation knobs. The defaults reproduce the avenue statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceParams {
    pub vehicles: usize,
    pub horizon_s: f64,
    pub last_entry_s: f64,
    pub avenue_m: f64,
    pub rate_range: (u32, u32),
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams {
            vehicles: VEHICLES,
            horizon_s: HORIZON_S,
            last_entry_s: LAST_ENTRY_S,
            avenue_m: AVENUE_M,
            rate_range: RATE_RANGE,
        }
    }
}

fn truncated_speed_kmh(rng: &mut RngStream) -> f64 {
    let normal = Normal::new(MEAN_SPEED_KMH, SD_SPEED_KMH).expect("valid sd");
    loop {
        let v = normal.sample(rng);
        if (MIN_SPEED_KMH..=MAX_SPEED_KMH).contains(&v) {
            return v;
        }
    }
}

pub fn generate_trace(seed: u64) -> TraceFile {
    generate_trace_with(seed, &TraceParams::default())
}

pub fn generate_trace_with(seed: u64, params: &TraceParams) -> TraceFile {
    let mut movement = RngStream::new("trace-gen", seed);
    let mut rates = RngStream::new("rate", seed);
    let (lo, hi) = params.rate_range;
    let vehicles = (0..params.vehicles)
        .map(|i| {
            let enter_s = round3(movement.uniform_f64() * params.last_entry_s);
            let speed_mps = round3(truncated_speed_kmh(&mut movement) / 3.6);
            let pause = if movement.bernoulli(PAUSE_PROBABILITY) {
                PAUSE_S
            } else {
                0.0
            };
            let dwell = params.avenue_m / speed_mps + pause;
            let exit_s = round3((enter_s + dwell).min(params.horizon_s));
            let rate_pps = rates.uniform_int(lo as i64, hi as i64).expect("valid rate range") as u32;
            VehicleTrace {
                vehicle_id: i as u32 + 1,
                enter_s,
                exit_s,
                speed_mps,
                rate_pps,
                app: App::Unassigned,
            }
        })
        .collect();
    TraceFile { vehicles }
}

impl TraceFile {
    pub fn emit(&self) -> String {
        let mut out = String::with_capacity(40 * (self.vehicles.len() + 1));
        out.push_str(HEADER);
        out.push('\n');
        for v in &self.vehicles {
            out.push_str(&format!(
                "{},{:.3},{:.3},{:.3},{},{}\n",
                v.vehicle_id, v.enter_s, v.exit_s, v.speed_mps, v.rate_pps, v.app
            ));
        }
        out
    }

    pub fn parse(text: &str, limits: &TraceLimits) -> Result<TraceFile, TraceError> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end() == HEADER => {}
            other => return Err(TraceError::Header(other.unwrap_or("").to_owned())),
        }
        let mut vehicles = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in lines.enumerate() {
            let row = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let v = parse_row(line, row)?;
            validate_row(&v, row, limits)?;
            if !seen.insert(v.vehicle_id) {
                return Err(TraceError::Row {
                    row,
                    msg: format!("duplicate vehicle_id {}", v.vehicle_id),
                });
            }
            vehicles.push(v);
        }
        if vehicles.len() != limits.vehicles {
            return Err(TraceError::Count {
                expected: limits.vehicles,
                found: vehicles.len(),
            });
        }
        Ok(TraceFile { vehicles })
    }

    pub fn validate(&self, limits: &TraceLimits) -> Result<(), TraceError> {
        for (i, v) in self.vehicles.iter().enumerate() {
            validate_row(v, i + 2, limits)?;
        }
        if self.vehicles.len() != limits.vehicles {
            return Err(TraceError::Count {
                expected: limits.vehicles,
                found: self.vehicles.len(),
            });
        }
        Ok(())
    }

    /// Time-averaged number of vehicles present over `[0, horizon_s]`.
    pub fn mean_concurrency(&self, horizon_s: f64) -> f64 {
        self.vehicles.iter().map(|v| v.dwell_s()).sum::<f64>() / horizon_s
    }
}

fn parse_row(line: &str, row: usize) -> Result<VehicleTrace, TraceError> {
    let err = |msg: String| TraceError::Row { row, msg };
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 6 {
        return Err(err(format!("expected 6 fields, found {}", fields.len())));
    }
    fn num<T: FromStr>(s: &str, what: &str, row: usize) -> Result<T, TraceError> {
        s.trim().parse().map_err(|_| TraceError::Row {
            row,
            msg: format!("bad {what}: {s:?}"),
        })
    }
    Ok(VehicleTrace {
        vehicle_id: num(fields[0], "vehicle_id", row)?,
        enter_s: num(fields[1], "enter_s", row)?,
        exit_s: num(fields[2], "exit_s", row)?,
        speed_mps: num(fields[3], "speed_mps", row)?,
        rate_pps: num(fields[4], "rate_pps", row)?,
        app: fields[5].trim().parse().map_err(err)?,
    })
}

fn validate_row(v: &VehicleTrace, row: usize, limits: &TraceLimits) -> Result<(), TraceError> {
    let err = |msg: String| Err(TraceError::Row { row, msg });
    let finite = [v.enter_s, v.exit_s, v.speed_mps].iter().all(|x| x.is_finite());
    if !finite {
        return err("non-finite value".into());
    }
    if v.enter_s < 0.0 {
        return err(format!("enter_s {} is negative", v.enter_s));
    }
    if v.exit_s <= v.enter_s {
        return err(format!("exit_s {} not after enter_s {}", v.exit_s, v.enter_s));
    }
    if v.exit_s > limits.horizon_s {
        return err(format!("exit_s {} beyond horizon {}", v.exit_s, limits.horizon_s));
    }
    if v.speed_mps <= 0.0 || v.speed_mps > limits.max_speed_mps + 1e-9 {
        return err(format!(
            "speed_mps {} outside (0, {:.3}]",
            v.speed_mps, limits.max_speed_mps
        ));
    }
    let (lo, hi) = limits.rate_range;
    if !(lo..=hi).contains(&v.rate_pps) {
        return err(format!("rate_pps {} outside [{lo}, {hi}]", v.rate_pps));
    }
    Ok(())
}

pub fn load_trace(path: &Path, limits: &TraceLimits) -> Result<TraceFile, TraceError> {
    let text = fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.to_owned(),
        source,
    })?;
    TraceFile::parse(&text, limits)
}

pub fn write_trace(path: &Path, trace: &TraceFile) -> Result<(), TraceError> {
    fs::write(path, trace.emit()).map_err(|source| TraceError::Io {
        path: path.to_owned(),
        source,
    })
}
