//! Timeline reconstruction from an event log, including logs recorded
//! outside this simulator.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use super::log::{event_src, parse_jsonl, Event, EventKind, MalformedLine};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stem {
    pub t: f64,
    pub ev: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseReport {
    pub sent: u32,
    pub received: u32,
    pub per: Option<f64>,
    pub first_tx_t: Option<f64>,
    pub last_tx_t: Option<f64>,
    pub span_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DelayStats {
    pub count: usize,
    pub mean_s: Option<f64>,
    pub median_s: Option<f64>,
    pub min_s: Option<f64>,
    pub max_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Milestones {
    pub trigger_tx: Option<f64>,
    pub trigger_rx: Option<f64>,
    pub optimal_depth: Option<f64>,
    pub optimal_depth_m: Option<f64>,
    pub first_repos_cmd_tx: Option<f64>,
    pub first_repos_cmd_rx: Option<f64>,
    pub follower_depth_reached: Option<f64>,
    pub first_optimized_tx: Option<f64>,
}

impl Milestones {
    /// trigger_rx < optimal_depth < repos_cmd_tx <= repos_cmd_rx <
    /// follower depth_reached < first optimized pkt_tx, all present.
    pub fn causal_order_holds(&self) -> bool {
        let chain = [
            self.trigger_rx,
            self.optimal_depth,
            self.first_repos_cmd_tx,
            self.first_repos_cmd_rx,
            self.follower_depth_reached,
            self.first_optimized_tx,
        ];
        if chain.iter().any(Option::is_none) {
            return false;
        }
        let t: Vec<f64> = chain.iter().map(|x| x.unwrap()).collect();
        t[0] < t[1] && t[1] < t[2] && t[2] <= t[3] && t[3] < t[4] && t[4] < t[5]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TimelineReport {
    pub events: usize,
    pub nodes: BTreeMap<String, Vec<Stem>>,
    pub phases: BTreeMap<String, PhaseReport>,
    pub delay: DelayStats,
    pub milestones: Milestones,
    pub causal_order: bool,
    pub malformed: Vec<MalformedLine>,
}

fn is_follower(node: &str) -> bool {
    node.starts_with("follower")
}

fn min_opt(a: Option<f64>, b: f64) -> Option<f64> {
    Some(a.map_or(b, |a| a.min(b)))
}

/// Reconstructs stems, phase counts and delays. A `pkt_tx` without a
/// `detail.phase` is baseline before the first trigger event and optimized
/// after it.
pub fn analyze_timeline(events: &[Event]) -> TimelineReport {
    let mut report = TimelineReport {
        events: events.len(),
        ..TimelineReport::default()
    };
    let first_trigger = events
        .iter()
        .filter(|e| matches!(e.ev, EventKind::TriggerTx | EventKind::TriggerRx))
        .map(|e| e.t)
        .reduce(f64::min);

    let stem_kinds = [
        EventKind::PktTx,
        EventKind::PktRx,
        EventKind::PktOverheard,
        EventKind::PktLost,
        EventKind::TriggerTx,
        EventKind::TriggerRx,
        EventKind::OptimalDepth,
        EventKind::ReposCmdTx,
        EventKind::ReposCmdRx,
        EventKind::DepthReached,
    ];

    // (src, seq) → (tx time, phase); also by seq alone for logs without src.
    let mut sent: HashMap<(String, u64), (f64, String)> = HashMap::new();
    let mut sent_by_seq: HashMap<u64, Vec<String>> = HashMap::new();
    let mut matched: HashMap<(String, u64), ()> = HashMap::new();
    let mut delays = Vec::new();
    let m = &mut report.milestones;

    for e in events {
        if stem_kinds.contains(&e.ev) {
            report.nodes.entry(e.node.clone()).or_default().push(Stem {
                t: e.t,
                ev: e.ev.as_str().to_owned(),
                seq: e.seq,
            });
        }
        match e.ev {
            EventKind::PktTx => {
                let Some(seq) = e.seq else { continue };
                let phase = match e.detail_str("phase") {
                    Some(p) => p.to_owned(),
                    None if first_trigger.is_some_and(|t| e.t >= t) => "optimized".to_owned(),
                    None => "baseline".to_owned(),
                };
                let p = report.phases.entry(phase.clone()).or_default();
                p.sent += 1;
                p.first_tx_t = min_opt(p.first_tx_t, e.t);
                p.last_tx_t = Some(p.last_tx_t.map_or(e.t, |l: f64| l.max(e.t)));
                if phase == "optimized" {
                    m.first_optimized_tx = min_opt(m.first_optimized_tx, e.t);
                }
                sent.insert((e.node.clone(), seq), (e.t, phase));
                sent_by_seq.entry(seq).or_default().push(e.node.clone());
            }
            EventKind::PktRx => {
                let Some(seq) = e.seq else { continue };
                let src = match event_src(e) {
                    Some(s) => Some(s.to_owned()),
                    None => sent_by_seq.get(&seq).and_then(|v| v.first().cloned()),
                };
                let Some(src) = src else { continue };
                let key = (src, seq);
                if matched.contains_key(&key) {
                    continue;
                }
                if let Some((tx_t, phase)) = sent.get(&key) {
                    delays.push(e.t - tx_t);
                    report.phases.entry(phase.clone()).or_default().received += 1;
                    matched.insert(key, ());
                }
            }
            EventKind::TriggerTx => m.trigger_tx = min_opt(m.trigger_tx, e.t),
            EventKind::TriggerRx => m.trigger_rx = min_opt(m.trigger_rx, e.t),
            EventKind::OptimalDepth => {
                if m.optimal_depth.is_none() {
                    m.optimal_depth = Some(e.t);
                    m.optimal_depth_m = e.depth_m;
                }
            }
            EventKind::ReposCmdTx => m.first_repos_cmd_tx = min_opt(m.first_repos_cmd_tx, e.t),
            EventKind::ReposCmdRx => m.first_repos_cmd_rx = min_opt(m.first_repos_cmd_rx, e.t),
            EventKind::DepthReached
                if is_follower(&e.node)
                    && m.follower_depth_reached.is_none()
                    && m.first_repos_cmd_rx.is_some_and(|r| e.t >= r) =>
            {
                m.follower_depth_reached = Some(e.t);
            }
            _ => {}
        }
    }

    for p in report.phases.values_mut() {
        if p.sent > 0 {
            p.per = Some((p.sent - p.received) as f64 / p.sent as f64);
        }
        if let (Some(a), Some(b)) = (p.first_tx_t, p.last_tx_t) {
            p.span_s = Some(b - a);
        }
    }
    if !delays.is_empty() {
        let mut sorted = delays.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        report.delay = DelayStats {
            count: n,
            mean_s: Some(delays.iter().sum::<f64>() / n as f64),
            median_s: Some(super::mc::quantile(&sorted, 0.5)),
            min_s: Some(sorted[0]),
            max_s: Some(sorted[n - 1]),
        };
    }
    report.causal_order = report.milestones.causal_order_holds();
    report
}

/// Parses and analyzes a JSONL log; bad lines are listed in the report.
pub fn analyze_log_text(text: &str) -> TimelineReport {
    let (events, malformed) = parse_jsonl(text);
    let mut report = analyze_timeline(&events);
    report.malformed = malformed;
    report
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.prec$}"))
}

impl TimelineReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "events: {}", self.events).unwrap();
        for (node, stems) in &self.nodes {
            writeln!(s, "node {node}: {} stems", stems.len()).unwrap();
        }
        for (phase, p) in &self.phases {
            writeln!(
                s,
                "{phase}: sent {} received {} per: {} span_s: {}",
                p.sent,
                p.received,
                p.per.map_or_else(|| "-".to_owned(), |x| format!("{x}")),
                opt(p.span_s, 1)
            )
            .unwrap();
        }
        writeln!(s, "delay_count: {}", self.delay.count).unwrap();
        writeln!(s, "mean_delay_s: {}", opt(self.delay.mean_s, 2)).unwrap();
        writeln!(s, "median_delay_s: {}", opt(self.delay.median_s, 2)).unwrap();
        let m = &self.milestones;
        for (name, v) in [
            ("trigger_tx", m.trigger_tx),
            ("trigger_rx", m.trigger_rx),
            ("optimal_depth", m.optimal_depth),
            ("first_repos_cmd_tx", m.first_repos_cmd_tx),
            ("first_repos_cmd_rx", m.first_repos_cmd_rx),
            ("follower_depth_reached", m.follower_depth_reached),
            ("first_optimized_tx", m.first_optimized_tx),
        ] {
            writeln!(s, "{name}: {}", opt(v, 3)).unwrap();
        }
        writeln!(s, "optimal_depth_m: {}", opt(m.optimal_depth_m, 2)).unwrap();
        writeln!(
            s,
            "causal_order: {}",
            if self.causal_order { "ok" } else { "incomplete" }
        )
        .unwrap();
        if !self.malformed.is_empty() {
            let n = self.malformed.len();
            writeln!(s, "{n} malformed line{}", if n == 1 { "" } else { "s" }).unwrap();
            for bad in &self.malformed {
                writeln!(s, "  line {}: {}", bad.line, bad.msg).unwrap();
            }
        }
        s
    }
}
