use super::{Action, BuoyMode, MissionError, MissionMessage, MissionParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuoyPhase {
    Listening,
    TriggerSent,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuoyEvent {
    /// A follower data packet was heard.
    Overheard,
    Tick(f64),
    OperatorTrigger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuoyState {
    pub phase: BuoyPhase,
    pub overheard: u32,
}

impl Default for BuoyState {
    fn default() -> Self {
        Self::new()
    }
}

impl BuoyState {
    pub fn new() -> Self {
        Self {
            phase: BuoyPhase::Listening,
            overheard: 0,
        }
    }

    fn fire(&mut self, params: &MissionParams) -> Vec<Action> {
        self.phase = BuoyPhase::TriggerSent;
        vec![Action::Broadcast(MissionMessage::Trigger { run_id: params.run_id })]
    }

    /// Applies one event. In auto mode the trigger fires after a full
    /// baseline burst is heard or at the timeout; the operator can trigger
    /// in either mode. At most one trigger is ever sent.
    pub fn handle(&mut self, event: BuoyEvent, params: &MissionParams) -> Result<Vec<Action>, MissionError> {
        let auto = params.buoy_mode == BuoyMode::Auto;
        match (self.phase, event) {
            (BuoyPhase::Listening, BuoyEvent::Overheard) => {
                self.overheard += 1;
                if auto && self.overheard >= params.burst_count {
                    Ok(self.fire(params))
                } else {
                    Ok(vec![])
                }
            }
            (BuoyPhase::Listening, BuoyEvent::Tick(t)) if auto && t >= params.buoy_timeout_s => Ok(self.fire(params)),
            (BuoyPhase::Listening, BuoyEvent::OperatorTrigger) => Ok(self.fire(params)),
            (BuoyPhase::TriggerSent, BuoyEvent::OperatorTrigger) => Err(MissionError::DuplicateTrigger),
            (BuoyPhase::TriggerSent, BuoyEvent::Overheard) => {
                self.overheard += 1;
                Ok(vec![])
            }
            (_, BuoyEvent::Tick(_)) => Ok(vec![]),
        }
    }
}
