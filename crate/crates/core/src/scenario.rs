//! Scenario description, validation, seeded generation and the on-disk
//! TOML format.
//!
//! A scenario file looks like:
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//!
//! [fleet]
//! num_uavs = 3
//! cpu_hz = 2000000000.0
//!
//! [fleet.box]
//! x_min_m = 0.0
//! x_max_m = 100.0
//! y_min_m = 0.0
//! y_max_m = 100.0
//! h_min_m = 40.0
//! h_max_m = 80.0
//!
//! [channel]
//! bandwidth_hz = 10000000.0
//! # ... remaining ChannelParams fields
//!
//! [[ues]]
//! x_m = 12.5
//! y_m = 80.25
//! data_bits = 1000000.0
//! cycles = 300000000.0
//! tx_power_w = 0.1
//! ```
//!
//! Generation uses ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with the
//! scenario seed, which produces the same stream on every platform.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ChannelParams;
use crate::{Error, Point2, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ue {
    #[serde(rename = "x_m")]
    pub x: f64,
    #[serde(rename = "y_m")]
    pub y: f64,
    pub data_bits: f64,
    pub cycles: f64,
    pub tx_power_w: f64,
}

impl Ue {
    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Motion limits shared by every UAV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionBox {
    #[serde(rename = "x_min_m")]
    pub x_min: f64,
    #[serde(rename = "x_max_m")]
    pub x_max: f64,
    #[serde(rename = "y_min_m")]
    pub y_min: f64,
    #[serde(rename = "y_max_m")]
    pub y_max: f64,
    #[serde(rename = "h_min_m")]
    pub h_min: f64,
    #[serde(rename = "h_max_m")]
    pub h_max: f64,
}

impl Default for MotionBox {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 100.0,
            y_min: 0.0,
            y_max: 100.0,
            h_min: 40.0,
            h_max: 80.0,
        }
    }
}

impl MotionBox {
    pub fn validate(&self) -> Result<()> {
        let all = [self.x_min, self.x_max, self.y_min, self.y_max, self.h_min, self.h_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("fleet.box", "all limits must be finite"));
        }
        if self.x_min >= self.x_max {
            return Err(Error::invalid("fleet.box.x_min_m", "X^min must be < X^max"));
        }
        if self.y_min >= self.y_max {
            return Err(Error::invalid("fleet.box.y_min_m", "Y^min must be < Y^max"));
        }
        if self.h_min <= 0.0 {
            return Err(Error::invalid(
                "fleet.box.h_min_m",
                format!("H^min must be > 0, got {}", self.h_min),
            ));
        }
        if self.h_min > self.h_max {
            return Err(Error::invalid("fleet.box.h_max_m", "H^min must be <= H^max"));
        }
        Ok(())
    }

    pub fn contains_horizontal(&self, p: Point2) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }

    pub fn contains(&self, p: Point2, h: f64) -> bool {
        self.contains_horizontal(p) && (self.h_min..=self.h_max).contains(&h)
    }

    pub fn clamp_horizontal(&self, p: Point2) -> Point2 {
        Point2::new(p.x.clamp(self.x_min, self.x_max), p.y.clamp(self.y_min, self.y_max))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    pub num_uavs: usize,
    /// Maximum CPU frequency of every UAV, cycles/s.
    pub cpu_hz: f64,
    #[serde(rename = "box")]
    pub bounds: MotionBox,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            num_uavs: 5,
            cpu_hz: 2e9,
            bounds: MotionBox::default(),
        }
    }
}

impl FleetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_uavs == 0 {
            return Err(Error::invalid("fleet.num_uavs", "need at least one UAV"));
        }
        if !(self.cpu_hz.is_finite() && self.cpu_hz > 0.0) {
            return Err(Error::invalid("fleet.cpu_hz", format!("must be > 0, got {}", self.cpu_hz)));
        }
        self.bounds.validate()
    }
}

/// How per-UE tasks are drawn by [`generate`].
///
/// The default is a fixed 1 Mbit per UE with 300 cycles per bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub data_bits_min: f64,
    pub data_bits_max: f64,
    pub cycles_per_bit: f64,
    pub tx_power_w: f64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            data_bits_min: 1e6,
            data_bits_max: 1e6,
            cycles_per_bit: 300.0,
            tx_power_w: crate::channel::dbm_to_watts(20.0),
        }
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.data_bits_min.is_finite() && self.data_bits_min > 0.0) {
            return Err(Error::invalid("task.data_bits_min", "must be > 0"));
        }
        if !(self.data_bits_max.is_finite() && self.data_bits_max >= self.data_bits_min) {
            return Err(Error::invalid("task.data_bits_max", "must be >= data_bits_min"));
        }
        if !(self.cycles_per_bit.is_finite() && self.cycles_per_bit > 0.0) {
            return Err(Error::invalid("task.cycles_per_bit", "must be > 0"));
        }
        if !(self.tx_power_w.is_finite() && self.tx_power_w > 0.0) {
            return Err(Error::invalid("task.tx_power_w", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub seed: u64,
    pub fleet: FleetConfig,
    pub channel: ChannelParams,
    pub ues: Vec<Ue>,
}

impl Scenario {
    pub fn new(ues: Vec<Ue>, fleet: FleetConfig, channel: ChannelParams, seed: u64) -> Result<Self> {
        let s = Self {
            schema_version: SCHEMA_VERSION,
            seed,
            fleet,
            channel,
            ues,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn num_uavs(&self) -> usize {
        self.fleet.num_uavs
    }

    pub fn bounds(&self) -> &MotionBox {
        &self.fleet.bounds
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.fleet.validate()?;
        self.channel.validate()?;
        if self.ues.is_empty() {
            return Err(Error::invalid("ues", "need at least one UE"));
        }
        for (i, ue) in self.ues.iter().enumerate() {
            let checks = [
                ("data_bits", ue.data_bits),
                ("cycles", ue.cycles),
                ("tx_power_w", ue.tx_power_w),
            ];
            for (name, value) in checks {
                if !(value.is_finite() && value > 0.0) {
                    return Err(Error::invalid(format!("ues[{i}].{name}"), format!("must be > 0, got {value}")));
                }
            }
            if !self.fleet.bounds.contains_horizontal(ue.position()) {
                return Err(Error::invalid(format!("ues[{i}].x_m/y_m"), "UE lies outside the area box"));
            }
        }
        Ok(())
    }

    /// Restrict to the first `n` UEs.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.ues.len() {
            return Err(Error::invalid("num_ues", format!("cannot take {n} of {} UEs", self.ues.len())));
        }
        let mut s = self.clone();
        s.ues.truncate(n);
        Ok(s)
    }

    pub fn with_num_uavs(&self, m: usize) -> Result<Self> {
        let mut s = self.clone();
        s.fleet.num_uavs = m;
        s.fleet.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        let text = self.to_toml_string().unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Draw a scenario with `n_ues` UEs placed i.i.d. uniformly in the area box.
///
/// UEs are drawn one at a time (x, y, then data size), so the first `k` UEs
/// of a scenario generated with `n > k` equal the scenario generated with
/// `k`.
pub fn generate(
    seed: u64,
    n_ues: usize,
    fleet: &FleetConfig,
    channel: &ChannelParams,
    task: &TaskSpec,
) -> Result<Scenario> {
    if n_ues == 0 {
        return Err(Error::invalid("num_ues", "need at least one UE"));
    }
    fleet.validate()?;
    channel.validate()?;
    task.validate()?;

    let b = &fleet.bounds;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ues = (0..n_ues)
        .map(|_| {
            let x = b.x_min + rng.gen::<f64>() * (b.x_max - b.x_min);
            let y = b.y_min + rng.gen::<f64>() * (b.y_max - b.y_min);
            let u: f64 = rng.gen();
            let data_bits = task.data_bits_min + u * (task.data_bits_max - task.data_bits_min);
            Ue {
                x,
                y,
                data_bits,
                cycles: task.cycles_per_bit * data_bits,
                tx_power_w: task.tx_power_w,
            }
        })
        .collect();
    Scenario::new(ues, fleet.clone(), channel.clone(), seed)
}
