//! Depth-optimization choreography: leader, follower and buoy state machines.
//!
//! Each machine is a pure transition function over `(state, event)` that
//! returns the actions the engine must carry out. No machine owns a timer;
//! time only enters through events.

mod buoy;
mod follower;
mod leader;
pub mod messages;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use buoy::{BuoyEvent, BuoyPhase, BuoyState};
pub use follower::{FollowerEvent, FollowerPhase, FollowerState};
pub use leader::{LeaderEvent, LeaderPhase, LeaderState};
pub use messages::{message_defs, MessageDefs, MissionMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BuoyMode {
    #[default]
    Auto,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurstPhase {
    Baseline,
    Optimized,
}

impl BurstPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            BurstPhase::Baseline => "baseline",
            BurstPhase::Optimized => "optimized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionParams {
    pub burst_count: u32,
    pub packet_payload_bytes: usize,
    pub burst_period_s: f64,
    pub safety_depth_m: f64,
    pub staging_depth_m: f64,
    pub broadcast_interval_s: f64,
    pub stabilization_band_m: f64,
    /// Delay before the follower starts its baseline burst.
    pub settle_delay_s: f64,
    pub buoy_mode: BuoyMode,
    pub buoy_timeout_s: f64,
    pub run_id: u64,
    pub ctd_noise_sigma_mps: f64,
    pub ctd_sample_interval_m: f64,
    /// Start each burst so that sends reach the MAC at the top of the
    /// follower's slot.
    pub align_bursts_to_slot: bool,
}

impl Default for MissionParams {
    fn default() -> Self {
        Self {
            burst_count: 100,
            packet_payload_bytes: 64,
            burst_period_s: 5.1,
            safety_depth_m: 40.0,
            staging_depth_m: 3.0,
            broadcast_interval_s: 5.0,
            stabilization_band_m: 0.5,
            settle_delay_s: 30.0,
            buoy_mode: BuoyMode::Auto,
            buoy_timeout_s: 612.0,
            run_id: 1,
            ctd_noise_sigma_mps: 0.05,
            ctd_sample_interval_m: 0.5,
            align_bursts_to_slot: true,
        }
    }
}

impl MissionParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("burst_period_s", self.burst_period_s),
            ("safety_depth_m", self.safety_depth_m),
            ("staging_depth_m", self.staging_depth_m),
            ("broadcast_interval_s", self.broadcast_interval_s),
            ("stabilization_band_m", self.stabilization_band_m),
            ("buoy_timeout_s", self.buoy_timeout_s),
            ("ctd_sample_interval_m", self.ctd_sample_interval_m),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("mission.{key} must be positive, got {v}"));
            }
        }
        if self.burst_count == 0 {
            return Err("mission.burst_count must be positive".into());
        }
        if !(self.settle_delay_s >= 0.0) || !(self.ctd_noise_sigma_mps >= 0.0) {
            return Err("mission.settle_delay_s and mission.ctd_noise_sigma_mps must be non-negative".into());
        }
        if self.staging_depth_m >= self.safety_depth_m {
            return Err("mission.staging_depth_m must be shallower than mission.safety_depth_m".into());
        }
        messages::data_pad_len(self.burst_count as u64 * 2, self.packet_payload_bytes)
            .map_err(|e| format!("mission.packet_payload_bytes: {e}"))?;
        Ok(())
    }
}

/// Work requested by a state machine.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    SetTargetDepth(f64),
    /// Begin sampling the CTD while descending.
    StartCast,
    /// The cast has been analysed; carries the chosen depth.
    OptimalDepth(f64),
    Broadcast(MissionMessage),
    /// One data packet to the leader.
    SendData {
        seq: u64,
        phase: BurstPhase,
    },
    /// Start a burst; the engine picks the first send instant and answers
    /// with `FollowerEvent::BurstTimer`.
    BeginBurst {
        phase: BurstPhase,
        generation: u32,
    },
    ScheduleBurstTimer {
        at: f64,
        generation: u32,
    },
    /// Baseline packets dropped because a reposition command arrived early.
    AbandonBurst {
        unsent: u32,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MissionError {
    #[error("{machine} cannot handle {event} in phase {phase}")]
    UnexpectedEvent {
        machine: &'static str,
        event: String,
        phase: String,
    },
    #[error("trigger already sent; duplicate ignored")]
    DuplicateTrigger,
    #[error("cannot compute the optimal depth: {0}")]
    Cast(String),
}

fn unexpected(machine: &'static str, event: impl std::fmt::Debug, phase: impl std::fmt::Debug) -> MissionError {
    MissionError::UnexpectedEvent {
        machine,
        event: format!("{event:?}"),
        phase: format!("{phase:?}"),
    }
}

/// Depth equality used to match `DepthReached` against a commanded depth.
pub(crate) fn same_depth(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-6
}
