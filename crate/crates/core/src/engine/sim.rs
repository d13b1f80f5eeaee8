//! Event loop: fixed kinematics ticks interleaved with exact-time
//! communication events.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::mpsc::{Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use super::config::{ConfigError, ScenarioConfig, World};
use super::log::{num, Event, EventKind};
use crate::channel::decide_reception;
use crate::mission::{
    Action, BuoyEvent, BuoyState, BurstPhase, FollowerEvent, FollowerPhase, FollowerState, LeaderEvent, LeaderState,
    MissionError, MissionMessage, MissionParams,
};
use crate::netstack::{Datagram, NetStack, NodeAddress, RxOutcome, BROADCAST};
use crate::vehicle::{ctd_sample, step_kinematics, Role, VehicleState};

/// Stream numbers of the per-subsystem generators derived from the seed.
pub const STREAM_CHANNEL: u64 = 1;
pub const STREAM_DRIFT: u64 = 2;
pub const STREAM_CTD: u64 = 3;

/// UDP-style port carried by every mission datagram.
const MISSION_PORT: u8 = 1;

/// Generator for one subsystem. All streams share the master seed and differ
/// only in the ChaCha stream id, so draws in one never shift another.
pub fn subsystem_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlCommand {
    OperatorTrigger,
}

/// Frames streamed to control-channel subscribers.
#[derive(Debug, Clone, PartialEq)]
pub enum Telemetry {
    Event(Event),
    Vehicle { node: String, depth_m: f64, t: f64 },
    Warn(String),
    Done,
}

impl Telemetry {
    pub fn to_json_line(&self) -> String {
        match self {
            Telemetry::Event(e) => format!("{{\"k\":\"telemetry\",\"event\":{}}}", e.to_json_line()),
            Telemetry::Vehicle { node, depth_m, t } => format!(
                "{{\"k\":\"vehicle\",\"node\":{},\"depth_m\":{depth_m:.6},\"t\":{t:.6}}}",
                Value::String(node.clone())
            ),
            Telemetry::Warn(msg) => format!("{{\"k\":\"warn\",\"msg\":{}}}", Value::String(msg.clone())),
            Telemetry::Done => "{\"k\":\"done\"}".to_owned(),
        }
    }
}

/// Both ends of the paced-run boundary as seen from the engine.
pub struct ControlChannel {
    pub commands: Receiver<ControlCommand>,
    pub telemetry: Sender<Telemetry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transmission {
    pub node: NodeAddress,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseMetrics {
    pub sent: u32,
    pub received: u32,
    pub lost: u32,
    /// Rejected by a full transmit queue.
    pub dropped: u32,
    pub per: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelaySample {
    pub seq: u64,
    pub end_to_end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub baseline: PhaseMetrics,
    pub optimized: PhaseMetrics,
    pub delays: Vec<DelaySample>,
    pub mean_delay_s: Option<f64>,
    pub optimal_depth_m: Option<f64>,
    pub completion: bool,
    pub abandoned: u32,
    pub end_time_s: f64,
}

impl RunMetrics {
    pub fn phase(&self, p: BurstPhase) -> &PhaseMetrics {
        match p {
            BurstPhase::Baseline => &self.baseline,
            BurstPhase::Optimized => &self.optimized,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub events: Vec<Event>,
    pub metrics: RunMetrics,
    pub transmissions: Vec<Transmission>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    InFlight,
    Received(f64),
    Lost,
    Dropped,
}

#[derive(Debug, Clone, Copy)]
struct DataRecord {
    phase: BurstPhase,
    tx_t: f64,
    fate: Fate,
}

#[derive(Debug, Clone)]
enum Agent {
    Leader(LeaderState),
    Follower(FollowerState),
    Buoy(BuoyState),
}

#[derive(Debug, Clone)]
struct Node {
    label: String,
    vehicle: VehicleState,
    stack: NetStack,
    agent: Agent,
    mac_pending: bool,
    /// Report the next arrival at the commanded depth.
    watch_depth: bool,
    /// Next CTD sampling depth while a cast is running.
    cast_next: Option<f64>,
}

#[derive(Debug, Clone)]
enum SimEvent {
    Tick(u64),
    StartBaseline(usize),
    BurstTimer {
        node: usize,
        generation: u32,
    },
    Enqueue {
        node: usize,
        dst: NodeAddress,
        body: Vec<u8>,
    },
    MacService(usize),
    Arrival {
        node: usize,
        datagram: Datagram,
        decoded: bool,
    },
    Deliver {
        node: usize,
        datagram: Datagram,
    },
    Operator,
}

impl SimEvent {
    fn in_flight(&self) -> bool {
        matches!(
            self,
            SimEvent::Enqueue { .. } | SimEvent::Arrival { .. } | SimEvent::Deliver { .. }
        )
    }
}

struct Scheduled {
    t: f64,
    order: u64,
    event: SimEvent,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    // Reversed so the max-heap pops the earliest, then first-scheduled.
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then_with(|| other.order.cmp(&self.order))
    }
}

/// A single run. Owns all mutable state; nothing is shared across runs.
pub struct Simulation {
    world: World,
    params: MissionParams,
    seed: u64,
    tick_s: f64,
    duration_s: f64,
    half_delay_s: f64,
    now: f64,
    queue: BinaryHeap<Scheduled>,
    order: u64,
    nodes: Vec<Node>,
    index_of: BTreeMap<NodeAddress, usize>,
    rng_channel: ChaCha8Rng,
    rng_drift: ChaCha8Rng,
    rng_ctd: ChaCha8Rng,
    events: Vec<Event>,
    transmissions: Vec<Transmission>,
    ledger: BTreeMap<(NodeAddress, u64), DataRecord>,
    in_flight: usize,
    finished: bool,
    telemetry: Option<Vec<Telemetry>>,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, ConfigError> {
        let world = cfg.build()?;
        let mut nodes = Vec::new();
        let mut index_of = BTreeMap::new();
        for n in &cfg.nodes {
            let mut vehicle = VehicleState::new(n.addr, n.role, n.x, n.y, n.depth, cfg.seabed_depth_m);
            vehicle.heading_deg = n.heading;
            vehicle.drift = n.drift;
            vehicle.max_vertical_rate_mps = n.max_vertical_rate_mps;
            let agent = match n.role {
                Role::Leader => Agent::Leader(LeaderState::new(&cfg.mission)),
                Role::Follower => Agent::Follower(FollowerState::new()),
                Role::Buoy => Agent::Buoy(BuoyState::new()),
            };
            index_of.insert(n.addr, nodes.len());
            nodes.push(Node {
                label: world.labels[&n.addr].clone(),
                vehicle,
                stack: NetStack::new(
                    n.addr,
                    cfg.modem.queue_cap,
                    cfg.modem.header_overhead_bytes,
                    cfg.modem.bitrate_bps,
                ),
                agent,
                mac_pending: false,
                watch_depth: false,
                cast_next: None,
            });
        }
        let mut sim = Self {
            world,
            params: cfg.mission.clone(),
            seed: cfg.seed,
            tick_s: cfg.tick_s,
            duration_s: cfg.duration_s,
            half_delay_s: cfg.modem.processing_delay_s / 2.0,
            now: 0.0,
            queue: BinaryHeap::new(),
            order: 0,
            nodes,
            index_of,
            rng_channel: subsystem_rng(cfg.seed, STREAM_CHANNEL),
            rng_drift: subsystem_rng(cfg.seed, STREAM_DRIFT),
            rng_ctd: subsystem_rng(cfg.seed, STREAM_CTD),
            events: Vec::new(),
            transmissions: Vec::new(),
            ledger: BTreeMap::new(),
            in_flight: 0,
            finished: false,
            telemetry: None,
        };
        sim.log(
            Event::new(0.0, "engine", EventKind::RunMeta)
                .with("seed", cfg.seed)
                .with("duration_s", num(cfg.duration_s))
                .with("nodes", cfg.nodes.len()),
        );
        sim.schedule(0.0, SimEvent::Tick(0));
        for i in 0..sim.nodes.len() {
            if matches!(sim.nodes[i].agent, Agent::Follower(_)) {
                sim.schedule(cfg.mission.settle_delay_s, SimEvent::StartBaseline(i));
            }
        }
        Ok(sim)
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Time of the next pending event within the run window.
    pub fn next_time(&self) -> Option<f64> {
        if self.finished {
            return None;
        }
        self.queue.peek().map(|s| s.t).filter(|&t| t <= self.duration_s)
    }

    fn schedule(&mut self, t: f64, event: SimEvent) {
        if event.in_flight() {
            self.in_flight += 1;
        }
        self.order += 1;
        self.queue.push(Scheduled {
            t: t.max(self.now),
            order: self.order,
            event,
        });
    }

    fn log(&mut self, e: Event) {
        if let Some(out) = &mut self.telemetry {
            out.push(Telemetry::Event(e.clone()));
        }
        self.events.push(e);
    }

    fn warn(&mut self, node: usize, msg: String) {
        log::warn!("t={:.3} {}: {msg}", self.now, self.nodes[node].label);
        let label = self.nodes[node].label.clone();
        self.log(Event::new(self.now, label, EventKind::State).with("warning", msg.clone()));
        if let Some(out) = &mut self.telemetry {
            out.push(Telemetry::Warn(msg));
        }
    }

    /// Schedules an operator trigger at `t` (not earlier than now).
    pub fn inject_operator_trigger(&mut self, t: f64) {
        self.schedule(t, SimEvent::Operator);
    }

    /// Processes one event. Returns false once the run is over.
    pub fn step(&mut self) -> bool {
        if self.next_time().is_none() {
            self.finished = true;
            return false;
        }
        let Scheduled { t, event, .. } = self.queue.pop().expect("peeked");
        self.now = t;
        if event.in_flight() {
            self.in_flight -= 1;
        }
        match event {
            SimEvent::Tick(k) => self.on_tick(k),
            SimEvent::StartBaseline(i) => self.follower_event(i, FollowerEvent::StartBaseline),
            SimEvent::BurstTimer { node, generation } => {
                self.follower_event(node, FollowerEvent::BurstTimer { t, generation })
            }
            SimEvent::Enqueue { node, dst, body } => self.on_enqueue(node, dst, body),
            SimEvent::MacService(i) => self.on_mac(i),
            SimEvent::Arrival {
                node,
                datagram,
                decoded,
            } => self.on_arrival(node, datagram, decoded),
            SimEvent::Deliver { node, datagram } => self.on_deliver(node, datagram),
            SimEvent::Operator => {
                if let Some(i) = self.nodes.iter().position(|n| matches!(n.agent, Agent::Buoy(_))) {
                    self.buoy_event(i, BuoyEvent::OperatorTrigger);
                }
            }
        }
        if self.all_followers_done() && self.in_flight == 0 && self.nodes.iter().all(|n| n.stack.queue_len() == 0) {
            self.finished = true;
        }
        !self.finished
    }

    fn all_followers_done(&self) -> bool {
        self.nodes.iter().all(|n| match &n.agent {
            Agent::Follower(f) => f.phase == FollowerPhase::Done,
            _ => true,
        })
    }

    fn on_tick(&mut self, k: u64) {
        let t = k as f64 * self.tick_s;
        if k > 0 {
            for n in &mut self.nodes {
                n.vehicle = step_kinematics(&n.vehicle, self.tick_s, &mut self.rng_drift);
            }
        }
        for i in 0..self.nodes.len() {
            self.sample_cast(i);
        }
        for i in 0..self.nodes.len() {
            self.check_depth(i);
        }
        for i in 0..self.nodes.len() {
            match self.nodes[i].agent {
                Agent::Leader(_) => self.leader_event(i, LeaderEvent::Tick(t)),
                Agent::Follower(_) => self.follower_event(i, FollowerEvent::Tick(t)),
                Agent::Buoy(_) => self.buoy_event(i, BuoyEvent::Tick(t)),
            }
        }
        if t.fract() == 0.0 {
            if let Some(out) = &mut self.telemetry {
                for n in &self.nodes {
                    out.push(Telemetry::Vehicle {
                        node: n.label.clone(),
                        depth_m: n.vehicle.depth_m,
                        t,
                    });
                }
            }
        }
        let next = (k + 1) as f64 * self.tick_s;
        if next <= self.duration_s {
            self.schedule(next, SimEvent::Tick(k + 1));
        }
    }

    /// Takes every sample the CTD passed since the last tick, at the exact
    /// sampling depths, plus one at the bottom of the cast.
    fn sample_cast(&mut self, i: usize) {
        let Some(mut next) = self.nodes[i].cast_next else {
            return;
        };
        let depth = self.nodes[i].vehicle.depth_m;
        let bottom = self.params.safety_depth_m;
        while next <= depth + 1e-9 && next <= bottom + 1e-9 {
            self.take_sample(i, next);
            next += self.params.ctd_sample_interval_m;
        }
        if depth >= bottom - 1e-9 {
            let last = next - self.params.ctd_sample_interval_m;
            if last < bottom - 1e-9 {
                self.take_sample(i, bottom);
            }
            self.nodes[i].cast_next = None;
        } else {
            self.nodes[i].cast_next = Some(next);
        }
    }

    fn take_sample(&mut self, i: usize, depth_m: f64) {
        let speed_mps = ctd_sample(
            &self.world.ssp,
            depth_m,
            &mut self.rng_ctd,
            self.params.ctd_noise_sigma_mps,
        );
        self.leader_event(i, LeaderEvent::CtdSampleTaken { depth_m, speed_mps });
    }

    fn check_depth(&mut self, i: usize) {
        let n = &self.nodes[i];
        if !n.watch_depth {
            return;
        }
        let v = &n.vehicle;
        let reached = match n.agent {
            Agent::Follower(_) => (v.depth_m - v.target_depth_m).abs() <= self.params.stabilization_band_m,
            _ => v.at_target(),
        };
        if !reached {
            return;
        }
        let depth = v.depth_m;
        let label = n.label.clone();
        self.nodes[i].watch_depth = false;
        self.log(Event::new(self.now, label, EventKind::DepthReached).depth(depth));
        match self.nodes[i].agent {
            Agent::Leader(_) => self.leader_event(i, LeaderEvent::DepthReached(depth)),
            Agent::Follower(_) => self.follower_event(i, FollowerEvent::DepthReached(depth)),
            Agent::Buoy(_) => {}
        }
    }

    fn phase_name(&self, i: usize) -> String {
        match &self.nodes[i].agent {
            Agent::Leader(s) => format!("{:?}", s.phase),
            Agent::Follower(s) => format!("{:?}", s.phase),
            Agent::Buoy(s) => format!("{:?}", s.phase),
        }
    }

    fn leader_event(&mut self, i: usize, ev: LeaderEvent) {
        let params = self.params.clone();
        let before = self.phase_name(i);
        let result = match &mut self.nodes[i].agent {
            Agent::Leader(s) => s.handle(ev, &params),
            _ => return,
        };
        self.after_transition(i, before, result);
    }

    fn follower_event(&mut self, i: usize, ev: FollowerEvent) {
        let params = self.params.clone();
        let before = self.phase_name(i);
        let result = match &mut self.nodes[i].agent {
            Agent::Follower(s) => s.handle(ev, &params),
            _ => return,
        };
        self.after_transition(i, before, result);
    }

    fn buoy_event(&mut self, i: usize, ev: BuoyEvent) {
        let params = self.params.clone();
        let before = self.phase_name(i);
        let result = match &mut self.nodes[i].agent {
            Agent::Buoy(s) => s.handle(ev, &params),
            _ => return,
        };
        self.after_transition(i, before, result);
    }

    fn after_transition(&mut self, i: usize, before: String, result: Result<Vec<Action>, MissionError>) {
        match result {
            Ok(actions) => {
                let after = self.phase_name(i);
                if after != before {
                    let label = self.nodes[i].label.clone();
                    self.log(
                        Event::new(self.now, label, EventKind::State)
                            .with("from", before)
                            .with("to", after),
                    );
                }
                for a in actions {
                    self.apply(i, a);
                }
            }
            Err(e) => self.warn(i, e.to_string()),
        }
    }

    fn apply(&mut self, i: usize, action: Action) {
        let now = self.now;
        match action {
            Action::SetTargetDepth(d) => {
                self.nodes[i].vehicle.set_target_depth(d);
                self.nodes[i].watch_depth = true;
            }
            Action::StartCast => self.nodes[i].cast_next = Some(self.nodes[i].vehicle.depth_m),
            Action::OptimalDepth(d) => {
                let label = self.nodes[i].label.clone();
                self.log(Event::new(now, label, EventKind::OptimalDepth).depth(d));
            }
            Action::Broadcast(msg) => {
                let label = self.nodes[i].label.clone();
                let e = match &msg {
                    MissionMessage::Trigger { run_id } => {
                        Event::new(now, label, EventKind::TriggerTx).with("run_id", *run_id)
                    }
                    MissionMessage::RepositionCmd { depth_dm } => Event::new(now, label, EventKind::ReposCmdTx)
                        .depth(msg.depth_m().unwrap_or_default())
                        .with("depth_dm", *depth_dm),
                    MissionMessage::Data { .. } => unreachable!("data is unicast"),
                };
                self.log(e);
                self.send_app(i, BROADCAST, &msg);
            }
            Action::SendData { seq, phase } => {
                let Some(leader) = self.nodes.iter().position(|n| matches!(n.agent, Agent::Leader(_))) else {
                    return;
                };
                let dst = self.nodes[leader].vehicle.addr;
                let msg = match self.world.defs.data_message(seq) {
                    Ok(m) => m,
                    Err(e) => return self.warn(i, e),
                };
                let n = &self.nodes[i];
                let e = Event::new(now, n.label.clone(), EventKind::PktTx)
                    .seq(seq)
                    .depth(n.vehicle.depth_m)
                    .with("phase", phase.as_str())
                    .with("dst", self.nodes[leader].label.clone());
                let src = n.vehicle.addr;
                self.log(e);
                self.ledger.insert(
                    (src, seq),
                    DataRecord {
                        phase,
                        tx_t: now,
                        fate: Fate::InFlight,
                    },
                );
                self.send_app(i, dst, &msg);
            }
            Action::BeginBurst { generation, .. } => {
                let t0 = self.burst_start(i);
                self.schedule(t0, SimEvent::BurstTimer { node: i, generation });
            }
            Action::ScheduleBurstTimer { at, generation } => {
                self.schedule(at, SimEvent::BurstTimer { node: i, generation })
            }
            Action::AbandonBurst { unsent } => {
                let label = self.nodes[i].label.clone();
                self.log(Event::new(now, label, EventKind::State).with("abandoned", unsent));
            }
        }
    }

    /// First send instant of a burst. With alignment the send reaches the
    /// MAC exactly at the start of the node's slot.
    fn burst_start(&self, i: usize) -> f64 {
        if !self.params.align_bursts_to_slot {
            return self.now;
        }
        let addr = self.nodes[i].vehicle.addr;
        let tdma = &self.world.tdma;
        let ready = self.now + self.half_delay_s;
        let frame = tdma.frame_index(ready);
        let Ok(mut start) = tdma.slot_start(addr, frame) else {
            return self.now;
        };
        if start < ready - 1e-9 {
            start = tdma.slot_start(addr, frame + 1).unwrap_or(start);
        }
        start - self.half_delay_s
    }

    fn send_app(&mut self, i: usize, dst: NodeAddress, msg: &MissionMessage) {
        match self.world.defs.encode(msg) {
            Ok(body) => {
                let t = self.now + self.half_delay_s;
                self.schedule(t, SimEvent::Enqueue { node: i, dst, body });
            }
            Err(e) => self.warn(i, format!("cannot encode {msg:?}: {e}")),
        }
    }

    fn on_enqueue(&mut self, i: usize, dst: NodeAddress, body: Vec<u8>) {
        let seq = self.data_seq(&body);
        let routes = self.world.routes.clone();
        if let Err(e) = self.nodes[i].stack.send(&routes, dst, MISSION_PORT, body) {
            if let Some(seq) = seq {
                let src = self.nodes[i].vehicle.addr;
                if let Some(r) = self.ledger.get_mut(&(src, seq)) {
                    r.fate = Fate::Dropped;
                }
            }
            self.warn(i, format!("send failed: {e}"));
            return;
        }
        self.kick_mac(i);
    }

    fn kick_mac(&mut self, i: usize) {
        if self.nodes[i].mac_pending {
            return;
        }
        match self.nodes[i].stack.next_service_time(self.now, &self.world.tdma) {
            Ok(Some(t)) => {
                self.nodes[i].mac_pending = true;
                self.schedule(t, SimEvent::MacService(i));
            }
            Ok(None) => {}
            Err(e) => self.warn(i, format!("MAC cannot schedule: {e}")),
        }
    }

    fn on_mac(&mut self, i: usize) {
        self.nodes[i].mac_pending = false;
        let now = self.now;
        let Some(datagram) = self.nodes[i].stack.pop_for_tx(now, &self.world.tdma) else {
            return;
        };
        let airtime = self.nodes[i].stack.airtime(&datagram);
        let src = self.nodes[i].vehicle.addr;
        self.transmissions.push(Transmission {
            node: src,
            start: now,
            end: now + airtime,
        });
        let src_pose = self.nodes[i].vehicle.pose();
        for j in 0..self.nodes.len() {
            if j == i {
                continue;
            }
            let dst_pose = self.nodes[j].vehicle.pose();
            match decide_reception(
                &mut self.rng_channel,
                &self.world.channel,
                &src_pose,
                &dst_pose,
                now,
                airtime,
            ) {
                Ok(r) => self.schedule(
                    r.rx_time,
                    SimEvent::Arrival {
                        node: j,
                        datagram: datagram.clone(),
                        decoded: r.decoded,
                    },
                ),
                Err(e) => self.warn(j, format!("channel evaluation failed: {e}")),
            }
        }
        self.kick_mac(i);
    }

    fn data_seq(&self, body: &[u8]) -> Option<u64> {
        self.world.defs.decode(body).0.into_iter().find_map(|m| match m {
            MissionMessage::Data { seq, .. } => Some(seq),
            _ => None,
        })
    }

    fn on_arrival(&mut self, j: usize, datagram: Datagram, decoded: bool) {
        let addr = self.nodes[j].vehicle.addr;
        if !decoded {
            if datagram.dst == addr || datagram.dst == BROADCAST {
                let (msgs, _, _) = self.world.defs.decode(&datagram.body);
                let src = self.label_of(datagram.src);
                let mut e = Event::new(self.now, self.nodes[j].label.clone(), EventKind::PktLost).with("src", src);
                if let Some(m) = msgs.first() {
                    e = e.with("stream", m.topic());
                    if let MissionMessage::Data { seq, .. } = m {
                        e = e.seq(*seq);
                        if let Some(r) = self.ledger.get_mut(&(datagram.src, *seq)) {
                            r.fate = Fate::Lost;
                        }
                    }
                }
                self.log(e);
            }
            return;
        }
        let routes = self.world.routes.clone();
        match self.nodes[j].stack.on_channel_rx(&routes, &datagram) {
            RxOutcome::Deliver { .. } | RxOutcome::Overheard => {
                let t = self.now + self.half_delay_s;
                self.schedule(t, SimEvent::Deliver { node: j, datagram });
            }
            RxOutcome::Forward => self.kick_mac(j),
        }
    }

    fn label_of(&self, addr: NodeAddress) -> String {
        self.index_of
            .get(&addr)
            .map(|&i| self.nodes[i].label.clone())
            .unwrap_or_else(|| addr.to_string())
    }

    fn on_deliver(&mut self, j: usize, datagram: Datagram) {
        let addr = self.nodes[j].vehicle.addr;
        let overheard = datagram.dst != addr && datagram.dst != BROADCAST;
        let (msgs, errors, skipped) = self.world.defs.decode(&datagram.body);
        for e in errors {
            self.warn(j, format!("malformed packet skipped: {e}"));
        }
        if skipped > 0 && msgs.is_empty() {
            self.warn(j, format!("{skipped} unframed bytes skipped"));
        }
        let src = self.label_of(datagram.src);
        let now = self.now;
        let label = self.nodes[j].label.clone();
        for m in msgs {
            match (m, &self.nodes[j].agent) {
                (MissionMessage::Data { seq, .. }, Agent::Buoy(_)) if overheard => {
                    let dst = self.label_of(datagram.dst);
                    self.log(
                        Event::new(now, label.clone(), EventKind::PktOverheard)
                            .seq(seq)
                            .with("src", src.clone())
                            .with("dst", dst),
                    );
                    self.buoy_event(j, BuoyEvent::Overheard);
                }
                (MissionMessage::Data { seq, .. }, Agent::Leader(_)) if !overheard => {
                    let record = self.ledger.get_mut(&(datagram.src, seq));
                    let mut e = Event::new(now, label.clone(), EventKind::PktRx)
                        .seq(seq)
                        .with("src", src.clone());
                    if let Some(r) = record {
                        if r.fate == Fate::InFlight {
                            r.fate = Fate::Received(now);
                        }
                        e = e.with("phase", r.phase.as_str());
                    }
                    self.log(e);
                }
                (MissionMessage::Trigger { run_id }, Agent::Leader(_)) => {
                    self.log(
                        Event::new(now, label.clone(), EventKind::TriggerRx)
                            .with("src", src.clone())
                            .with("run_id", run_id),
                    );
                    self.leader_event(j, LeaderEvent::TriggerReceived);
                }
                (m @ MissionMessage::RepositionCmd { .. }, Agent::Follower(_)) => {
                    let depth = m.depth_m().expect("reposition carries a depth");
                    self.log(
                        Event::new(now, label.clone(), EventKind::ReposCmdRx)
                            .depth(depth)
                            .with("src", src.clone()),
                    );
                    self.follower_event(j, FollowerEvent::ReposCmd(depth));
                }
                _ => {}
            }
        }
    }

    /// Sent = received + lost + dropped + in flight, per phase.
    pub fn conservation(&self) -> BTreeMap<BurstPhase, (u32, u32, u32, u32, u32)> {
        let mut out: BTreeMap<BurstPhase, (u32, u32, u32, u32, u32)> = BTreeMap::new();
        for r in self.ledger.values() {
            let e = out.entry(r.phase).or_default();
            e.0 += 1;
            match r.fate {
                Fate::Received(_) => e.1 += 1,
                Fate::Lost => e.2 += 1,
                Fate::Dropped => e.3 += 1,
                Fate::InFlight => e.4 += 1,
            }
        }
        out
    }

    fn metrics(&self) -> RunMetrics {
        let mut phases: BTreeMap<BurstPhase, PhaseMetrics> = BTreeMap::new();
        let mut delays = Vec::new();
        for (&(_, seq), r) in &self.ledger {
            let p = phases.entry(r.phase).or_default();
            p.sent += 1;
            match r.fate {
                Fate::Received(t) => {
                    p.received += 1;
                    delays.push(DelaySample {
                        seq,
                        end_to_end_s: t - r.tx_t,
                    });
                }
                Fate::Lost => p.lost += 1,
                Fate::Dropped => p.dropped += 1,
                Fate::InFlight => {}
            }
        }
        for p in phases.values_mut() {
            if p.sent > 0 {
                p.per = Some((p.sent - p.received) as f64 / p.sent as f64);
            }
        }
        let mean_delay_s =
            (!delays.is_empty()).then(|| delays.iter().map(|d| d.end_to_end_s).sum::<f64>() / delays.len() as f64);
        let mut optimal_depth_m = None;
        let mut abandoned = 0;
        for n in &self.nodes {
            match &n.agent {
                Agent::Leader(s) => optimal_depth_m = s.optimal_depth_m,
                Agent::Follower(s) => abandoned += s.abandoned,
                Agent::Buoy(_) => {}
            }
        }
        RunMetrics {
            seed: self.seed,
            baseline: phases.remove(&BurstPhase::Baseline).unwrap_or_default(),
            optimized: phases.remove(&BurstPhase::Optimized).unwrap_or_default(),
            delays,
            mean_delay_s,
            optimal_depth_m,
            completion: self.all_followers_done(),
            abandoned,
            end_time_s: self.now,
        }
    }

    /// Closes the run, logging any follower that never finished.
    pub fn finish(mut self) -> RunOutput {
        for i in 0..self.nodes.len() {
            if let Agent::Follower(f) = &self.nodes[i].agent {
                if f.phase != FollowerPhase::Done {
                    let phase = format!("{:?}", f.phase);
                    let label = self.nodes[i].label.clone();
                    self.log(
                        Event::new(self.now, label, EventKind::State)
                            .with("incomplete", true)
                            .with("phase", phase),
                    );
                }
            }
        }
        RunOutput {
            metrics: self.metrics(),
            events: self.events,
            transmissions: self.transmissions,
        }
    }

    fn drain_telemetry(&mut self, tx: &Sender<Telemetry>) {
        if let Some(out) = &mut self.telemetry {
            for frame in out.drain(..) {
                // A vanished subscriber never stalls the run.
                let _ = tx.send(frame);
            }
        }
    }
}

/// Runs as fast as possible.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, ConfigError> {
    let mut sim = Simulation::new(cfg)?;
    while sim.step() {}
    Ok(sim.finish())
}

/// Runs with simulated time advancing at `pacing_factor` times wall time,
/// streaming telemetry and accepting operator commands.
pub fn paced_run(cfg: &ScenarioConfig, pacing_factor: f64, control: ControlChannel) -> Result<RunOutput, ConfigError> {
    if !(pacing_factor > 0.0 && pacing_factor.is_finite()) {
        return Err(ConfigError::Invalid {
            key: "mode.paced".into(),
            msg: format!("pacing factor must be positive, got {pacing_factor}"),
        });
    }
    let mut sim = Simulation::new(cfg)?;
    sim.telemetry = Some(Vec::new());
    sim.drain_telemetry(&control.telemetry);
    let wall_start = Instant::now();
    let mut commands_open = true;
    'run: while let Some(next_t) = sim.next_time() {
        let due = wall_start + Duration::from_secs_f64(next_t / pacing_factor);
        loop {
            let now = Instant::now();
            if now >= due {
                break;
            }
            if !commands_open {
                std::thread::sleep(due - now);
                break;
            }
            match control.commands.recv_timeout(due - now) {
                Ok(ControlCommand::OperatorTrigger) => {
                    let sim_t = (wall_start.elapsed().as_secs_f64() * pacing_factor).clamp(sim.now, next_t);
                    sim.inject_operator_trigger(sim_t);
                    continue 'run;
                }
                Err(RecvTimeoutError::Timeout) => break,
                Err(RecvTimeoutError::Disconnected) => commands_open = false,
            }
        }
        sim.step();
        sim.drain_telemetry(&control.telemetry);
    }
    let streamed = sim.events().len();
    let out = sim.finish();
    for e in &out.events[streamed..] {
        let _ = control.telemetry.send(Telemetry::Event(e.clone()));
    }
    let _ = control.telemetry.send(Telemetry::Done);
    Ok(out)
}
