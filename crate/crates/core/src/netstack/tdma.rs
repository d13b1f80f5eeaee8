use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::NodeAddress;

/// Slotted frame shared by all nodes. Frames repeat every
/// `slots_per_frame * slot_duration_s` starting at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdmaConfig {
    pub slots_per_frame: u32,
    pub slot_duration_s: f64,
    pub guard_s: f64,
    pub slot_of: BTreeMap<NodeAddress, u32>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TdmaError {
    #[error("node {0} has no TDMA slot")]
    NoSlot(NodeAddress),
    #[error("airtime {airtime:.4} s plus guard {guard:.4} s exceeds the {slot:.4} s slot")]
    AirtimeTooLong { airtime: f64, guard: f64, slot: f64 },
    #[error("invalid TDMA configuration: {0}")]
    Invalid(String),
}

impl TdmaConfig {
    pub fn frame_period(&self) -> f64 {
        self.slots_per_frame as f64 * self.slot_duration_s
    }

    pub fn slot(&self, node: NodeAddress) -> Result<u32, TdmaError> {
        self.slot_of.get(&node).copied().ok_or(TdmaError::NoSlot(node))
    }

    /// Checks slot indices and that `max_airtime` fits every slot.
    pub fn validate(&self, max_airtime: f64) -> Result<(), TdmaError> {
        if self.slots_per_frame == 0 {
            return Err(TdmaError::Invalid("slots_per_frame must be at least 1".into()));
        }
        if !(self.slot_duration_s > 0.0) || !(self.guard_s >= 0.0) {
            return Err(TdmaError::Invalid(
                "slot_duration_s must be positive and guard_s non-negative".into(),
            ));
        }
        for (node, slot) in &self.slot_of {
            if *slot >= self.slots_per_frame {
                return Err(TdmaError::Invalid(format!(
                    "node {node} slot {slot} is outside 0..{}",
                    self.slots_per_frame
                )));
            }
        }
        if max_airtime + self.guard_s > self.slot_duration_s {
            return Err(TdmaError::AirtimeTooLong {
                airtime: max_airtime,
                guard: self.guard_s,
                slot: self.slot_duration_s,
            });
        }
        Ok(())
    }

    /// Start of `node`'s slot in frame number `frame`.
    pub fn slot_start(&self, node: NodeAddress, frame: u64) -> Result<f64, TdmaError> {
        let slot = self.slot(node)?;
        Ok(frame as f64 * self.frame_period() + slot as f64 * self.slot_duration_s)
    }

    /// Frame number containing time `t`. Instants within a nanosecond below a
    /// frame boundary count as the next frame, so slot starts computed as
    /// `k * period` map back to `k`.
    pub fn frame_index(&self, t: f64) -> u64 {
        if t <= 0.0 {
            0
        } else {
            (t / self.frame_period() + 1e-9).floor() as u64
        }
    }
}

/// Earliest `t >= now` at which `node` may start an `airtime`-long
/// transmission that ends no later than its slot end minus the guard.
pub fn tdma_next_tx_start(now: f64, node: NodeAddress, cfg: &TdmaConfig, airtime: f64) -> Result<f64, TdmaError> {
    cfg.slot(node)?;
    if airtime + cfg.guard_s > cfg.slot_duration_s {
        return Err(TdmaError::AirtimeTooLong {
            airtime,
            guard: cfg.guard_s,
            slot: cfg.slot_duration_s,
        });
    }
    let latest_offset = cfg.slot_duration_s - cfg.guard_s - airtime;
    let mut frame = cfg.frame_index(now);
    loop {
        let start = cfg.slot_start(node, frame)?;
        let t = now.max(start);
        if t <= start + latest_offset {
            return Ok(t);
        }
        frame += 1;
    }
}
