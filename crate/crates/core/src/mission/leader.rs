use crate::vehicle::{optimal_depth, CtdCast};

use super::{same_depth, unexpected, Action, MissionError, MissionMessage, MissionParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeaderPhase {
    BaselineHold,
    CtdDescent,
    ComputeOptimal,
    StagingAscent,
    BroadcastDescent,
    HoldOptimal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeaderEvent {
    TriggerReceived,
    DepthReached(f64),
    Tick(f64),
    CtdSampleTaken { depth_m: f64, speed_mps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderState {
    pub phase: LeaderPhase,
    pub optimal_depth_m: Option<f64>,
    pub last_broadcast_t: Option<f64>,
    pub cast: CtdCast,
}

impl LeaderState {
    pub fn new(params: &MissionParams) -> Self {
        Self {
            phase: LeaderPhase::BaselineHold,
            optimal_depth_m: None,
            last_broadcast_t: None,
            cast: CtdCast::new(params.ctd_noise_sigma_mps, params.ctd_sample_interval_m),
        }
    }

    /// Applies one event. On error the state is left untouched.
    pub fn handle(&mut self, event: LeaderEvent, params: &MissionParams) -> Result<Vec<Action>, MissionError> {
        use LeaderPhase::*;
        match (self.phase, &event) {
            (BaselineHold, LeaderEvent::TriggerReceived) => {
                self.phase = CtdDescent;
                Ok(vec![Action::SetTargetDepth(params.safety_depth_m), Action::StartCast])
            }
            (CtdDescent, LeaderEvent::CtdSampleTaken { depth_m, speed_mps }) => {
                self.cast.push(*depth_m, *speed_mps);
                Ok(vec![])
            }
            (CtdDescent, LeaderEvent::DepthReached(d)) if same_depth(*d, params.safety_depth_m) => {
                let best = optimal_depth(&self.cast).map_err(|e| MissionError::Cast(e.to_string()))?;
                self.phase = ComputeOptimal;
                self.optimal_depth_m = Some(best);
                self.phase = StagingAscent;
                Ok(vec![
                    Action::OptimalDepth(best),
                    Action::SetTargetDepth(params.staging_depth_m),
                ])
            }
            (StagingAscent, LeaderEvent::DepthReached(d)) if same_depth(*d, params.staging_depth_m) => {
                let best = self.optimal_depth_m.expect("set on leaving the cast");
                self.phase = BroadcastDescent;
                self.last_broadcast_t = None;
                Ok(vec![Action::SetTargetDepth(best)])
            }
            (BroadcastDescent, LeaderEvent::Tick(t)) => {
                let due = self
                    .last_broadcast_t
                    .is_none_or(|last| t - last >= params.broadcast_interval_s - 1e-9);
                if due {
                    self.last_broadcast_t = Some(*t);
                    let best = self.optimal_depth_m.expect("set on leaving the cast");
                    Ok(vec![Action::Broadcast(MissionMessage::reposition(best))])
                } else {
                    Ok(vec![])
                }
            }
            (BroadcastDescent, LeaderEvent::DepthReached(d))
                if self.optimal_depth_m.is_some_and(|best| same_depth(*d, best)) =>
            {
                self.phase = HoldOptimal;
                Ok(vec![])
            }
            (_, LeaderEvent::Tick(_)) => Ok(vec![]),
            // Intermediate arrivals, such as crossing the staging depth on the
            // way to the optimum, carry no meaning.
            (_, LeaderEvent::DepthReached(_)) if self.phase != BaselineHold => Ok(vec![]),
            (phase, _) => Err(unexpected("leader", event, phase)),
        }
    }
}
