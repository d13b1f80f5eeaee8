use super::{unexpected, Action, BurstPhase, MissionError, MissionParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FollowerPhase {
    BaselineHold,
    TxBaseline,
    Wait,
    Reposition,
    TxOptimized,
    Done,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FollowerEvent {
    /// Settle delay elapsed.
    StartBaseline,
    /// A burst timer fired at time `t`. Stale generations are ignored.
    BurstTimer {
        t: f64,
        generation: u32,
    },
    Tick(f64),
    ReposCmd(f64),
    DepthReached(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowerState {
    pub phase: FollowerPhase,
    pub sent_this_phase: u32,
    pub next_seq: u64,
    pub generation: u32,
    pub burst_start_t: Option<f64>,
    pub target_depth_m: Option<f64>,
    pub abandoned: u32,
}

impl Default for FollowerState {
    fn default() -> Self {
        Self::new()
    }
}

impl FollowerState {
    pub fn new() -> Self {
        Self {
            phase: FollowerPhase::BaselineHold,
            sent_this_phase: 0,
            next_seq: 0,
            generation: 0,
            burst_start_t: None,
            target_depth_m: None,
            abandoned: 0,
        }
    }

    fn burst_phase(&self) -> Option<BurstPhase> {
        match self.phase {
            FollowerPhase::TxBaseline => Some(BurstPhase::Baseline),
            FollowerPhase::TxOptimized => Some(BurstPhase::Optimized),
            _ => None,
        }
    }

    fn begin_burst(&mut self, phase: FollowerPhase, burst: BurstPhase, params: &MissionParams) -> Action {
        self.phase = phase;
        self.sent_this_phase = 0;
        self.burst_start_t = None;
        self.generation += 1;
        // Optimized sequence numbers follow the full baseline range.
        if burst == BurstPhase::Optimized {
            self.next_seq = params.burst_count as u64;
        }
        Action::BeginBurst {
            phase: burst,
            generation: self.generation,
        }
    }

    /// Applies one event. On error the state is left untouched.
    pub fn handle(&mut self, event: FollowerEvent, params: &MissionParams) -> Result<Vec<Action>, MissionError> {
        use FollowerPhase::*;
        match (self.phase, &event) {
            (BaselineHold, FollowerEvent::StartBaseline) => {
                Ok(vec![self.begin_burst(TxBaseline, BurstPhase::Baseline, params)])
            }
            (TxBaseline | TxOptimized, FollowerEvent::BurstTimer { t, generation })
                if *generation == self.generation =>
            {
                let phase = self.burst_phase().expect("transmitting phase");
                let start = *self.burst_start_t.get_or_insert(*t);
                let mut actions = vec![Action::SendData {
                    seq: self.next_seq,
                    phase,
                }];
                self.next_seq += 1;
                self.sent_this_phase += 1;
                if self.sent_this_phase >= params.burst_count {
                    self.phase = if phase == BurstPhase::Baseline { Wait } else { Done };
                } else {
                    actions.push(Action::ScheduleBurstTimer {
                        at: start + self.sent_this_phase as f64 * params.burst_period_s,
                        generation: self.generation,
                    });
                }
                Ok(actions)
            }
            (_, FollowerEvent::BurstTimer { .. }) => Ok(vec![]),
            (TxBaseline | Wait, FollowerEvent::ReposCmd(d)) => {
                let mut actions = Vec::new();
                if self.phase == TxBaseline {
                    let unsent = params.burst_count - self.sent_this_phase;
                    self.abandoned += unsent;
                    actions.push(Action::AbandonBurst { unsent });
                }
                self.generation += 1;
                self.phase = Reposition;
                self.target_depth_m = Some(*d);
                actions.push(Action::SetTargetDepth(*d));
                Ok(actions)
            }
            // Only the first command is acted on.
            (Reposition | TxOptimized | Done, FollowerEvent::ReposCmd(_)) => Ok(vec![]),
            (Reposition, FollowerEvent::DepthReached(d))
                if self
                    .target_depth_m
                    .is_some_and(|target| (d - target).abs() <= params.stabilization_band_m) =>
            {
                Ok(vec![self.begin_burst(TxOptimized, BurstPhase::Optimized, params)])
            }
            (_, FollowerEvent::Tick(_)) => Ok(vec![]),
            (_, FollowerEvent::DepthReached(_)) if self.phase != BaselineHold => Ok(vec![]),
            (phase, _) => Err(unexpected("follower", event, phase)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u32) -> MissionParams {
        MissionParams {
            burst_count: n,
            ..MissionParams::default()
        }
    }

    fn fire(s: &mut FollowerState, t: f64, p: &MissionParams) -> Vec<Action> {
        let generation = s.generation;
        s.handle(FollowerEvent::BurstTimer { t, generation }, p).unwrap()
    }

    #[test]
    fn baseline_burst_then_wait() {
        let p = params(3);
        let mut s = FollowerState::new();
        let a = s.handle(FollowerEvent::StartBaseline, &p).unwrap();
        assert_eq!(
            a,
            vec![Action::BeginBurst {
                phase: BurstPhase::Baseline,
                generation: 1
            }]
        );
        assert_eq!(
            fire(&mut s, 30.0, &p),
            vec![
                Action::SendData {
                    seq: 0,
                    phase: BurstPhase::Baseline
                },
                Action::ScheduleBurstTimer {
                    at: 35.1,
                    generation: 1
                }
            ]
        );
        fire(&mut s, 35.1, &p);
        assert_eq!(
            fire(&mut s, 40.2, &p),
            vec![Action::SendData {
                seq: 2,
                phase: BurstPhase::Baseline
            }]
        );
        assert_eq!(s.phase, FollowerPhase::Wait);
    }

    #[test]
    fn send_times_do_not_accumulate_error() {
        let p = params(100);
        let mut s = FollowerState::new();
        s.handle(FollowerEvent::StartBaseline, &p).unwrap();
        let mut t = 29.57;
        let mut last = None;
        for _ in 0..99 {
            let a = fire(&mut s, t, &p);
            if let Some(Action::ScheduleBurstTimer { at, .. }) = a.last() {
                t = *at;
                last = Some(*at);
            }
        }
        assert_eq!(last, Some(29.57 + 99.0 * 5.1));
    }

    #[test]
    fn reposition_during_wait_then_optimized_burst() {
        let p = params(2);
        let mut s = FollowerState::new();
        s.handle(FollowerEvent::StartBaseline, &p).unwrap();
        fire(&mut s, 0.0, &p);
        fire(&mut s, 5.1, &p);
        assert_eq!(s.phase, FollowerPhase::Wait);
        assert_eq!(
            s.handle(FollowerEvent::ReposCmd(13.7), &p).unwrap(),
            vec![Action::SetTargetDepth(13.7)]
        );
        assert_eq!(s.phase, FollowerPhase::Reposition);
        // Second command is redundant.
        assert!(s.handle(FollowerEvent::ReposCmd(20.0), &p).unwrap().is_empty());
        assert_eq!(s.target_depth_m, Some(13.7));
        // Outside the band nothing happens.
        assert!(s.handle(FollowerEvent::DepthReached(14.3), &p).unwrap().is_empty());
        let a = s.handle(FollowerEvent::DepthReached(13.9), &p).unwrap();
        assert_eq!(
            a,
            vec![Action::BeginBurst {
                phase: BurstPhase::Optimized,
                generation: 3
            }]
        );
        assert_eq!(
            fire(&mut s, 100.0, &p)[0],
            Action::SendData {
                seq: 2,
                phase: BurstPhase::Optimized
            }
        );
        fire(&mut s, 105.1, &p);
        assert_eq!(s.phase, FollowerPhase::Done);
        assert!(s.handle(FollowerEvent::ReposCmd(5.0), &p).unwrap().is_empty());
    }

    #[test]
    fn early_command_abandons_baseline() {
        let p = params(100);
        let mut s = FollowerState::new();
        s.handle(FollowerEvent::StartBaseline, &p).unwrap();
        for k in 0..40 {
            fire(&mut s, k as f64 * 5.1, &p);
        }
        let stale = s.generation;
        let a = s.handle(FollowerEvent::ReposCmd(13.7), &p).unwrap();
        assert_eq!(
            a,
            vec![Action::AbandonBurst { unsent: 60 }, Action::SetTargetDepth(13.7)]
        );
        assert_eq!(s.abandoned, 60);
        // The pending timer from the baseline burst is now stale.
        assert!(s
            .handle(
                FollowerEvent::BurstTimer {
                    t: 204.0,
                    generation: stale
                },
                &p
            )
            .unwrap()
            .is_empty());
    }

    #[test]
    fn unexpected_events_leave_state() {
        let p = params(3);
        let mut s = FollowerState::new();
        let before = s.clone();
        assert!(s.handle(FollowerEvent::ReposCmd(10.0), &p).is_err());
        assert_eq!(s, before);
        s.handle(FollowerEvent::StartBaseline, &p).unwrap();
        let before = s.clone();
        assert!(s.handle(FollowerEvent::StartBaseline, &p).is_err());
        assert_eq!(s, before);
    }
}
