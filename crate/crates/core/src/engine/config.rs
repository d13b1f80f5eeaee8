//! Scenario description, validation and construction of the simulated world.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::channel::{AnalyticDuct, ChannelModel, LinkBudget, SoundSpeedProfile, TlGrid, TransmissionLossModel};
use crate::mission::{message_defs, MessageDefs, MissionMessage, MissionParams};
use crate::msgcodec::StreamRegistry;
use crate::netstack::{
    NodeAddress, RouteTable, TdmaConfig, BROADCAST, DEFAULT_BITRATE_BPS, DEFAULT_HEADER_OVERHEAD, DEFAULT_QUEUE_CAP,
};
use crate::vehicle::{Drift, Role, DEFAULT_VERTICAL_RATE};

const DEFAULT_SSP: &str = include_str!("../../fixtures/ssp_afternoon.csv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("invalid scenario JSON: {0}")]
    Parse(String),
    #[error("{key}: {msg}")]
    Invalid { key: String, msg: String },
}

fn invalid(key: impl Into<String>, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        msg: msg.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Fast,
    /// Simulated seconds per wall-clock second.
    Paced(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub addr: NodeAddress,
    pub role: Role,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    pub depth: f64,
    pub slot: u32,
    #[serde(default)]
    pub heading: f64,
    #[serde(default)]
    pub drift: Option<Drift>,
    #[serde(default = "default_vertical_rate")]
    pub max_vertical_rate_mps: f64,
}

fn default_vertical_rate() -> f64 {
    DEFAULT_VERTICAL_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdmaSettings {
    pub slots_per_frame: u32,
    pub slot_duration_s: f64,
    pub guard_s: f64,
}

impl Default for TdmaSettings {
    fn default() -> Self {
        Self {
            slots_per_frame: 3,
            slot_duration_s: 1.7,
            guard_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModemSettings {
    pub bitrate_bps: f64,
    pub source_level_db: f64,
    pub f_khz: f64,
    pub header_overhead_bytes: usize,
    pub queue_cap: usize,
    /// Total per-packet processing delay, split evenly between sender and
    /// receiver.
    pub processing_delay_s: f64,
}

impl Default for ModemSettings {
    fn default() -> Self {
        Self {
            bitrate_bps: DEFAULT_BITRATE_BPS,
            source_level_db: 187.0,
            f_khz: 26.0,
            header_overhead_bytes: DEFAULT_HEADER_OVERHEAD,
            queue_cap: DEFAULT_QUEUE_CAP,
            processing_delay_s: 0.86,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSettings {
    Analytic(AnalyticDuct),
    Grid {
        path: PathBuf,
        #[serde(default)]
        strict: bool,
    },
}

impl Default for ChannelSettings {
    fn default() -> Self {
        ChannelSettings::Analytic(AnalyticDuct::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSettings {
    pub noise_level_db: f64,
    pub snr50_db: f64,
    pub snr_slope_db: f64,
    /// Peak heading-dependent transducer gain; absent disables it.
    pub directivity_db: Option<f64>,
}

impl Default for LinkSettings {
    fn default() -> Self {
        let b = LinkBudget::default();
        Self {
            noise_level_db: b.noise_level_db,
            snr50_db: b.snr50_db,
            snr_slope_db: b.snr_slope_db,
            directivity_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_seabed")]
    pub seabed_depth_m: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_tick")]
    pub tick_s: f64,
    #[serde(default)]
    pub mode: RunMode,
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub tdma: TdmaSettings,
    #[serde(default)]
    pub modem: ModemSettings,
    #[serde(default)]
    pub channel: ChannelSettings,
    /// Sound speed profile CSV; the built-in afternoon profile when absent.
    #[serde(default)]
    pub ssp_path: Option<PathBuf>,
    #[serde(default)]
    pub link: LinkSettings,
    #[serde(default)]
    pub mission: MissionParams,
    /// Destination → next hop. Unlisted nodes are reached directly.
    #[serde(default)]
    pub routes: BTreeMap<NodeAddress, NodeAddress>,
    #[serde(default)]
    pub registry_path: Option<PathBuf>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_seabed() -> f64 {
    108.0
}
fn default_duration() -> f64 {
    4000.0
}
fn default_tick() -> f64 {
    0.5
}

/// Everything the engine needs, built from a validated scenario.
#[derive(Debug, Clone)]
pub struct World {
    pub tdma: TdmaConfig,
    pub routes: RouteTable,
    pub channel: ChannelModel,
    pub ssp: SoundSpeedProfile,
    pub defs: MessageDefs,
    pub labels: BTreeMap<NodeAddress, String>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Self::from_value(serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?)
    }

    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a scenario, applies `key=value` overrides and resolves relative
    /// paths against the file's directory.
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        let mut value: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut cfg = Self::from_value(value)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::load_with_overrides(path, &[])
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn node_with_role(&self, role: Role) -> Option<&NodeConfig> {
        self.nodes.iter().find(|n| n.role == role)
    }

    pub fn leader(&self) -> Option<&NodeConfig> {
        self.node_with_role(Role::Leader)
    }

    /// Places every follower `range_m` from the leader along +x.
    pub fn with_range(&self, range_m: f64) -> Result<Self, ConfigError> {
        if !(range_m >= 1.0) {
            return Err(invalid("range", format!("must be at least 1 m, got {range_m}")));
        }
        let leader = self.leader().ok_or_else(|| invalid("nodes", "no leader"))?.clone();
        let mut cfg = self.clone();
        for n in cfg.nodes.iter_mut().filter(|n| n.role == Role::Follower) {
            n.x = leader.x + range_m;
            n.y = leader.y;
        }
        Ok(cfg)
    }

    /// Validates the scenario and builds the world. Never touches the
    /// filesystem except to read referenced inputs.
    pub fn build(&self) -> Result<World, ConfigError> {
        self.check_scalars()?;
        let labels = self.check_nodes()?;
        self.mission.validate().map_err(|msg| invalid("mission", msg))?;

        let ssp = match &self.ssp_path {
            Some(p) => SoundSpeedProfile::load(&self.resolve(p)).map_err(|e| invalid("ssp_path", e))?,
            None => SoundSpeedProfile::from_csv_reader(DEFAULT_SSP.as_bytes()).expect("built-in profile is valid"),
        };

        let loss = match &self.channel {
            ChannelSettings::Analytic(params) => {
                if params.f_khz != self.modem.f_khz {
                    return Err(invalid(
                        "channel.analytic.f_khz",
                        format!("{} conflicts with modem.f_khz {}", params.f_khz, self.modem.f_khz),
                    ));
                }
                TransmissionLossModel::analytic(params.clone(), ssp.minimum().0)
                    .map_err(|e| invalid("channel.analytic", e))?
            }
            ChannelSettings::Grid { path, strict } => {
                let mut grid = TlGrid::load(&self.resolve(path)).map_err(|e| invalid("channel.grid.path", e))?;
                grid.strict = *strict;
                TransmissionLossModel::Grid(grid)
            }
        };

        let registry = match &self.registry_path {
            Some(p) => StreamRegistry::load(&self.resolve(p)).map_err(|e| invalid("registry_path", e))?,
            None => message_defs(self.mission.packet_payload_bytes).registry,
        };
        for topic in [
            crate::mission::messages::TRIGGER_TOPIC,
            crate::mission::messages::REPOS_TOPIC,
            crate::mission::messages::DATA_TOPIC,
        ] {
            registry.lookup(topic).map_err(|e| invalid("registry_path", e))?;
        }
        let defs = MessageDefs::with_registry(registry, self.mission.packet_payload_bytes);

        let tdma = TdmaConfig {
            slots_per_frame: self.tdma.slots_per_frame,
            slot_duration_s: self.tdma.slot_duration_s,
            guard_s: self.tdma.guard_s,
            slot_of: self.nodes.iter().map(|n| (n.addr, n.slot)).collect(),
        };
        tdma.validate(self.max_airtime(&defs)).map_err(|e| invalid("tdma", e))?;

        let mut hops: BTreeMap<NodeAddress, NodeAddress> = self.nodes.iter().map(|n| (n.addr, n.addr)).collect();
        for (dst, hop) in &self.routes {
            for a in [dst, hop] {
                if !labels.contains_key(a) {
                    return Err(invalid(format!("routes.{dst}"), format!("unknown node address {a}")));
                }
            }
            hops.insert(*dst, *hop);
        }
        let routes = RouteTable::new(hops).map_err(|e| invalid("routes", e))?;

        let channel = ChannelModel {
            loss,
            budget: LinkBudget {
                source_level_db: self.modem.source_level_db,
                noise_level_db: self.link.noise_level_db,
                snr50_db: self.link.snr50_db,
                snr_slope_db: self.link.snr_slope_db,
            },
            directivity_db: self.link.directivity_db,
            ssp: Some(ssp.clone()),
        };

        Ok(World {
            tdma,
            routes,
            channel,
            ssp,
            defs,
            labels,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.build().map(|_| ())
    }

    fn max_airtime(&self, defs: &MessageDefs) -> f64 {
        let repos = defs
            .encode(&MissionMessage::reposition(self.seabed_depth_m))
            .map(|b| b.len())
            .unwrap_or(0);
        let trigger = defs
            .encode(&MissionMessage::Trigger {
                run_id: self.mission.run_id,
            })
            .map(|b| b.len())
            .unwrap_or(0);
        let body = self.mission.packet_payload_bytes.max(repos).max(trigger);
        (self.modem.header_overhead_bytes + body) as f64 * 8.0 / self.modem.bitrate_bps
    }

    fn check_scalars(&self) -> Result<(), ConfigError> {
        let positive = [
            ("seabed_depth_m", self.seabed_depth_m),
            ("duration_s", self.duration_s),
            ("tick_s", self.tick_s),
            ("modem.bitrate_bps", self.modem.bitrate_bps),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(key, format!("must be positive, got {v}")));
            }
        }
        if !(self.modem.processing_delay_s >= 0.0) {
            return Err(invalid("modem.processing_delay_s", "must be non-negative"));
        }
        if self.modem.queue_cap == 0 {
            return Err(invalid("modem.queue_cap", "must be positive"));
        }
        if let RunMode::Paced(f) = self.mode {
            if !(f > 0.0 && f.is_finite()) {
                return Err(invalid(
                    "mode.paced",
                    format!("pacing factor must be positive, got {f}"),
                ));
            }
        }
        if self.mission.safety_depth_m > self.seabed_depth_m {
            return Err(invalid("mission.safety_depth_m", "deeper than the seabed"));
        }
        Ok(())
    }

    fn check_nodes(&self) -> Result<BTreeMap<NodeAddress, String>, ConfigError> {
        let count = |r| self.nodes.iter().filter(|n| n.role == r).count();
        if count(Role::Leader) != 1 {
            return Err(invalid("nodes", "exactly one leader is required"));
        }
        if count(Role::Buoy) != 1 {
            return Err(invalid("nodes", "exactly one buoy is required"));
        }
        let followers = count(Role::Follower);
        if followers == 0 {
            return Err(invalid("nodes", "at least one follower is required"));
        }
        let mut labels = BTreeMap::new();
        let mut slots = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let key = format!("nodes.{i}");
            if n.addr == BROADCAST {
                return Err(invalid(format!("{key}.addr"), "address 0 is reserved for broadcast"));
            }
            if let Some(other) = slots.insert(n.slot, n.addr) {
                return Err(invalid(
                    format!("{key}.slot"),
                    format!("slot {} already owned by node {other}", n.slot),
                ));
            }
            for (field, v) in [("x", n.x), ("y", n.y), ("depth", n.depth), ("heading", n.heading)] {
                if !v.is_finite() {
                    return Err(invalid(format!("{key}.{field}"), "must be finite"));
                }
            }
            if n.depth < 0.0 || n.depth > self.seabed_depth_m {
                return Err(invalid(format!("{key}.depth"), "outside the water column"));
            }
            if !(n.max_vertical_rate_mps > 0.0) {
                return Err(invalid(format!("{key}.max_vertical_rate_mps"), "must be positive"));
            }
            if n.drift.is_some_and(|d| !(d.sigma_mps >= 0.0)) {
                return Err(invalid(format!("{key}.drift.sigma_mps"), "must be non-negative"));
            }
            if n.role == Role::Leader && n.depth >= self.mission.safety_depth_m {
                return Err(invalid(
                    format!("{key}.depth"),
                    "leader must start above the safety depth",
                ));
            }
            let label = if n.role == Role::Follower && followers > 1 {
                format!("follower{}", n.addr)
            } else {
                n.role.as_str().to_owned()
            };
            if labels.insert(n.addr, label).is_some() {
                return Err(invalid(format!("{key}.addr"), format!("duplicate address {}", n.addr)));
            }
        }
        Ok(labels)
    }
}

/// Applies one `dotted.path=value` override. The value is parsed as JSON
/// when possible and taken as a string otherwise. Numeric segments index
/// arrays.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| invalid(assignment, "override must look like key=value"))?;
    if path.is_empty() {
        return Err(invalid(assignment, "empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut cur = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        cur = match cur {
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| invalid(path, format!("`{seg}` is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| invalid(path, format!("index {idx} out of range ({len} items)")))?
            }
            Value::Object(map) => {
                if last {
                    map.insert((*seg).to_owned(), value);
                    return Ok(());
                }
                map.entry((*seg).to_owned())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            _ => return Err(invalid(path, format!("`{seg}` does not address an object or array"))),
        };
        if last {
            *cur = value;
            return Ok(());
        }
    }
    Ok(())
}
