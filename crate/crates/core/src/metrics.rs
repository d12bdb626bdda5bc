//! Per-run counters and their CSV rows.

use std::fmt::Write as _;

use crate::mac::MacCounters;
use crate::ndn::ForwarderCounters;
use crate::scenario::InstanceId;
use crate::trace::App;

pub const RESULTS_HEADER: &str = "instance,replication,app,interests_sent,data_received";
pub const TIMESERIES_HEADER: &str = "instance,replication,second,interests_sent,data_received";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AppTotals {
    pub interests_sent: u64,
    pub data_received: u64,
}

impl AppTotals {
    fn add(&mut self, other: AppTotals) {
        self.interests_sent += other.interests_sent;
        self.data_received += other.data_received;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VehicleMetrics {
    pub vehicle_id: u32,
    pub app: App,
    pub totals: AppTotals,
}

/// Which consumers a figure is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AppFilter {
    All,
    Only(App),
}

impl std::fmt::Display for AppFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppFilter::All => f.write_str("all"),
            AppFilter::Only(app) => app.fmt(f),
        }
    }
}

impl std::str::FromStr for AppFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(AppFilter::All),
            other => other.parse::<App>().map(AppFilter::Only),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PurityCounts {
    pub wireless_broadcast: u64,
    pub wireless_unicast: u64,
}

#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub instance: InstanceId,
    pub replication: u32,
    pub vehicles: Vec<VehicleMetrics>,
    /// Interests by emission second, Data by arrival second.
    pub per_second: Vec<AppTotals>,
    pub mac: MacCounters,
    pub purity: PurityCounts,
    pub backbone_frames: u64,
    pub router: ForwarderCounters,
    /// Upstream forwards of a shared name while the router already held a
    /// live PIT entry for it.
    pub router_shared_reforwards: u64,
    pub router_shared_forwards: u64,
    pub events: u64,
}

impl RunMetrics {
    pub fn new(instance: InstanceId, replication: u32, vehicles: Vec<VehicleMetrics>, seconds: usize) -> Self {
        RunMetrics {
            instance,
            replication,
            vehicles,
            per_second: vec![AppTotals::default(); seconds],
            mac: MacCounters::default(),
            purity: PurityCounts::default(),
            backbone_frames: 0,
            router: ForwarderCounters::default(),
            router_shared_reforwards: 0,
            router_shared_forwards: 0,
            events: 0,
        }
    }

    fn bin(&mut self, second: u64) -> &mut AppTotals {
        let last = self.per_second.len() - 1;
        &mut self.per_second[(second as usize).min(last)]
    }

    pub fn record_interest(&mut self, vehicle: usize, second: u64) {
        self.vehicles[vehicle].totals.interests_sent += 1;
        self.bin(second).interests_sent += 1;
    }

    pub fn record_data(&mut self, vehicle: usize, second: u64) {
        self.vehicles[vehicle].totals.data_received += 1;
        self.bin(second).data_received += 1;
    }

    /// Totals over the consumers matching `filter`, or `None` when no
    /// consumer matches.
    pub fn totals(&self, filter: AppFilter) -> Option<AppTotals> {
        let mut sum = AppTotals::default();
        let mut any = false;
        for v in &self.vehicles {
            if filter == AppFilter::All || filter == AppFilter::Only(v.app) {
                sum.add(v.totals);
                any = true;
            }
        }
        any.then_some(sum)
    }

    /// `all` first, then each application present in the run.
    pub fn result_rows(&self) -> String {
        let mut out = String::new();
        for filter in [
            AppFilter::All,
            AppFilter::Only(App::Cbr),
            AppFilter::Only(App::Modified),
        ] {
            if let Some(t) = self.totals(filter) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    self.instance, self.replication, filter, t.interests_sent, t.data_received
                );
            }
        }
        out
    }

    pub fn timeseries_rows(&self) -> String {
        let mut out = String::new();
        for (s, t) in self.per_second.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.instance, self.replication, s, t.interests_sent, t.data_received
            );
        }
        out
    }
}
