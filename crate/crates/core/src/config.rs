//! Run configuration and its flat `section.key=value` text form.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::ConfigError;
use crate::kernel::SimTime;
use crate::mac::{ChannelModel, MacParams};
use crate::trace::{TraceLimits, TraceParams, RATE_RANGE};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub horizon_s: u64,
    pub mac: MacParams,
    pub channel: ChannelModel,
    pub cs_capacity: usize,
    pub interest_lifetime: SimTime,
    pub rate_range: (u32, u32),
    pub ref_hz: u32,
    /// bits per second
    pub backbone_rate: u64,
    pub backbone_delay: SimTime,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            horizon_s: 300,
            mac: MacParams::default(),
            channel: ChannelModel::Contention,
            cs_capacity: 10_000,
            interest_lifetime: SimTime::from_secs(4),
            rate_range: RATE_RANGE,
            ref_hz: 100,
            backbone_rate: 1_000_000_000,
            backbone_delay: SimTime::from_millis(30),
        }
    }
}

fn us(t: SimTime) -> String {
    fmt_num(t.as_nanos() as f64 / 1e3)
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_owned()
}

impl Config {
    pub fn horizon(&self) -> SimTime {
        SimTime::from_secs(self.horizon_s)
    }

    pub fn trace_limits(&self) -> TraceLimits {
        TraceLimits {
            horizon_s: self.horizon_s as f64,
            rate_range: self.rate_range,
            ..TraceLimits::default()
        }
    }

    pub fn trace_params(&self) -> TraceParams {
        TraceParams {
            horizon_s: self.horizon_s as f64,
            last_entry_s: (self.horizon_s as f64 - 20.0).max(0.0),
            rate_range: self.rate_range,
            ..TraceParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, msg: String| ConfigError::Invalid {
            key: key.to_owned(),
            msg,
        };
        self.mac.validate().map_err(|m| invalid("mac", m))?;
        if self.horizon_s == 0 {
            return Err(invalid("sim.horizon_s", "must be positive".into()));
        }
        if self.interest_lifetime == SimTime::ZERO {
            return Err(invalid("ndn.interest_lifetime_s", "must be positive".into()));
        }
        let (lo, hi) = self.rate_range;
        if lo == 0 || lo > hi {
            return Err(invalid(
                "traffic.rate_min_pps",
                format!("need 0 < min <= max, got {lo}..{hi}"),
            ));
        }
        if self.ref_hz == 0 {
            return Err(invalid("traffic.ref_hz", "must be positive".into()));
        }
        if self.backbone_rate == 0 {
            return Err(invalid("backbone.rate_mbps", "must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text form; every key is present, in a fixed order.
    pub fn to_text(&self) -> String {
        let m = &self.mac;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("sim.horizon_s", self.horizon_s.to_string());
        kv(
            "sim.channel",
            match self.channel {
                ChannelModel::Contention => "contention",
                ChannelModel::Ideal => "ideal",
            }
            .into(),
        );
        kv("mac.slot_us", us(m.slot));
        kv("mac.sifs_us", us(m.sifs));
        kv("mac.difs_us", us(m.difs));
        kv("mac.cw_min", m.cw_min.to_string());
        kv("mac.cw_max", m.cw_max.to_string());
        kv("mac.retry_limit", m.retry_limit.to_string());
        kv("mac.basic_rate_mbps", fmt_num(m.basic_rate as f64 / 1e6));
        kv("mac.full_rate_mbps", fmt_num(m.full_rate as f64 / 1e6));
        kv("mac.preamble_basic_us", us(m.preamble_basic));
        kv("mac.preamble_full_us", us(m.preamble_full));
        kv("mac.ack_us", us(m.ack_duration));
        kv("ndn.cs_capacity", self.cs_capacity.to_string());
        kv("ndn.interest_lifetime_s", fmt_num(self.interest_lifetime.as_secs_f64()));
        kv("traffic.rate_min_pps", self.rate_range.0.to_string());
        kv("traffic.rate_max_pps", self.rate_range.1.to_string());
        kv("traffic.ref_hz", self.ref_hz.to_string());
        kv("backbone.rate_mbps", fmt_num(self.backbone_rate as f64 / 1e6));
        kv(
            "backbone.delay_ms",
            fmt_num(self.backbone_delay.as_nanos() as f64 / 1e6),
        );
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex_digest(self.to_text().as_bytes())
    }

    /// Applies `key=value` overrides on top of `self`. Blank lines and `#`
    /// comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let invalid = |msg: &str| ConfigError::Invalid {
            key: key.to_owned(),
            msg: format!("{msg}: {value:?}"),
        };
        let float = || -> Result<f64, ConfigError> {
            value
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| invalid("expected a non-negative number"))
        };
        let int = || -> Result<u64, ConfigError> { value.parse::<u64>().map_err(|_| invalid("expected an integer")) };
        let micros = || float().map(|x| SimTime::from_nanos((x * 1e3).round() as u64));
        let mbps = || float().map(|x| (x * 1e6).round() as u64);
        let small = |x: u64| u32::try_from(x).map_err(|_| invalid("out of range"));
        match key {
            "sim.horizon_s" => self.horizon_s = int()?,
            "sim.channel" => {
                self.channel = match value {
                    "contention" => ChannelModel::Contention,
                    "ideal" => ChannelModel::Ideal,
                    _ => return Err(invalid("expected contention|ideal")),
                }
            }
            "mac.slot_us" => self.mac.slot = micros()?,
            "mac.sifs_us" => self.mac.sifs = micros()?,
            "mac.difs_us" => self.mac.difs = micros()?,
            "mac.cw_min" => self.mac.cw_min = small(int()?)?,
            "mac.cw_max" => self.mac.cw_max = small(int()?)?,
            "mac.retry_limit" => self.mac.retry_limit = small(int()?)?,
            "mac.basic_rate_mbps" => self.mac.basic_rate = mbps()?,
            "mac.full_rate_mbps" => self.mac.full_rate = mbps()?,
            "mac.preamble_basic_us" => self.mac.preamble_basic = micros()?,
            "mac.preamble_full_us" => self.mac.preamble_full = micros()?,
            "mac.ack_us" => self.mac.ack_duration = micros()?,
            "ndn.cs_capacity" => self.cs_capacity = int()? as usize,
            "ndn.interest_lifetime_s" => self.interest_lifetime = SimTime::from_secs_f64(float()?),
            "traffic.rate_min_pps" => self.rate_range.0 = small(int()?)?,
            "traffic.rate_max_pps" => self.rate_range.1 = small(int()?)?,
            "traffic.ref_hz" => self.ref_hz = small(int()?)?,
            "backbone.rate_mbps" => self.backbone_rate = mbps()?,
            "backbone.delay_ms" => self.backbone_delay = SimTime::from_nanos((float()? * 1e6).round() as u64),
            _ => return Err(ConfigError::UnknownKey(key.to_owned())),
        }
        Ok(())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let cfg = Config::default();
        let back = Config::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert!(cfg.to_text().contains("mac.full_rate_mbps=143.4\n"));
        assert!(cfg.to_text().contains("ndn.cs_capacity=10000\n"));
    }

    #[test]
    fn overrides_change_hash() {
        let cfg = Config::from_text("# tweak\nmac.full_rate_mbps = 286.8\n\ntraffic.ref_hz=50").unwrap();
        assert_eq!(cfg.mac.full_rate, 286_800_000);
        assert_eq!(cfg.ref_hz, 50);
        assert_ne!(cfg.hash(), Config::default().hash());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            Config::from_text("nonsense"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            Config::from_text("mac.bogus=1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            Config::from_text("mac.cw_min=abc"),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(Config::from_text("mac.cw_min=2000").is_err());
        assert!(Config::from_text("traffic.rate_min_pps=120").is_err());
        assert!(Config::from_text("ndn.interest_lifetime_s=0").is_err());
    }
}
