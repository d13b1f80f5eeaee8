//! JSON Lines event log with a fixed field order and 6-decimal floats.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    PktTx,
    PktRx,
    PktLost,
    PktOverheard,
    TriggerTx,
    TriggerRx,
    OptimalDepth,
    ReposCmdTx,
    ReposCmdRx,
    DepthReached,
    State,
    RunMeta,
}

impl EventKind {
    pub const ALL: [EventKind; 12] = [
        EventKind::PktTx,
        EventKind::PktRx,
        EventKind::PktLost,
        EventKind::PktOverheard,
        EventKind::TriggerTx,
        EventKind::TriggerRx,
        EventKind::OptimalDepth,
        EventKind::ReposCmdTx,
        EventKind::ReposCmdRx,
        EventKind::DepthReached,
        EventKind::State,
        EventKind::RunMeta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::PktTx => "pkt_tx",
            EventKind::PktRx => "pkt_rx",
            EventKind::PktLost => "pkt_lost",
            EventKind::PktOverheard => "pkt_overheard",
            EventKind::TriggerTx => "trigger_tx",
            EventKind::TriggerRx => "trigger_rx",
            EventKind::OptimalDepth => "optimal_depth",
            EventKind::ReposCmdTx => "repos_cmd_tx",
            EventKind::ReposCmdRx => "repos_cmd_rx",
            EventKind::DepthReached => "depth_reached",
            EventKind::State => "state",
            EventKind::RunMeta => "run_meta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub node: String,
    pub ev: EventKind,
    pub seq: Option<u64>,
    pub depth_m: Option<f64>,
    pub detail: Option<Map<String, Value>>,
}

/// Number rounded to 6 decimals for use inside `detail`.
pub fn num(x: f64) -> Value {
    let r = (x * 1e6).round() / 1e6;
    serde_json::Number::from_f64(r)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

impl Event {
    pub fn new(t: f64, node: impl Into<String>, ev: EventKind) -> Self {
        Self {
            t,
            node: node.into(),
            ev,
            seq: None,
            depth_m: None,
            detail: None,
        }
    }

    pub fn seq(mut self, seq: u64) -> Self {
        self.seq = Some(seq);
        self
    }

    pub fn depth(mut self, depth_m: f64) -> Self {
        self.depth_m = Some(depth_m);
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.detail
            .get_or_insert_with(Map::new)
            .insert(key.to_owned(), value.into());
        self
    }

    pub fn detail_str(&self, key: &str) -> Option<&str> {
        self.detail.as_ref()?.get(key)?.as_str()
    }

    /// One log line without the trailing newline.
    pub fn to_json_line(&self) -> String {
        let mut s = String::with_capacity(96);
        let node = Value::String(self.node.clone());
        write!(s, "{{\"t\":{:.6},\"node\":{},\"ev\":\"{}\"", self.t, node, self.ev).unwrap();
        if let Some(seq) = self.seq {
            write!(s, ",\"seq\":{seq}").unwrap();
        }
        if let Some(d) = self.depth_m {
            write!(s, ",\"depth_m\":{d:.6}").unwrap();
        }
        if let Some(detail) = &self.detail {
            write!(s, ",\"detail\":{}", Value::Object(detail.clone())).unwrap();
        }
        s.push('}');
        s
    }

    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let obj = v.as_object().ok_or("not a JSON object")?;
        let t = obj.get("t").and_then(Value::as_f64).ok_or("missing numeric `t`")?;
        let node = obj.get("node").and_then(Value::as_str).ok_or("missing string `node`")?;
        let ev_str = obj.get("ev").and_then(Value::as_str).ok_or("missing string `ev`")?;
        let ev = EventKind::parse(ev_str).ok_or_else(|| format!("unknown event kind `{ev_str}`"))?;
        let seq = match obj.get("seq") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_u64().ok_or("`seq` is not an unsigned integer")?),
        };
        let depth_m = match obj.get("depth_m") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_f64().ok_or("`depth_m` is not a number")?),
        };
        let detail = match obj.get("detail") {
            None | Some(Value::Null) => None,
            Some(Value::Object(m)) => Some(m.clone()),
            Some(_) => return Err("`detail` is not an object".into()),
        };
        if let Some(k) = obj
            .keys()
            .find(|k| !["t", "node", "ev", "seq", "depth_m", "detail"].contains(&k.as_str()))
        {
            return Err(format!("unknown field `{k}`"));
        }
        Ok(Self {
            t,
            node: node.to_owned(),
            ev,
            seq,
            depth_m,
            detail,
        })
    }
}

pub fn to_jsonl(events: &[Event]) -> String {
    let mut out = String::with_capacity(events.len() * 96);
    for e in events {
        out.push_str(&e.to_json_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct MalformedLine {
    pub line: usize,
    pub msg: String,
}

/// Parses a log, collecting bad lines instead of stopping. Blank lines are
/// skipped. Line numbers are 1-based.
pub fn parse_jsonl(text: &str) -> (Vec<Event>, Vec<MalformedLine>) {
    let mut events = Vec::new();
    let mut malformed = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match Event::from_json_line(line) {
            Ok(e) => events.push(e),
            Err(msg) => malformed.push(MalformedLine { line: i + 1, msg }),
        }
    }
    (events, malformed)
}

/// Sender of a received or lost packet: `detail.src` when present.
pub fn event_src(e: &Event) -> Option<&str> {
    e.detail_str("src")
}

/// Checks time monotonicity and that every `pkt_rx` follows a `pkt_tx` with
/// the same sender and sequence number.
pub fn validate_log(events: &[Event]) -> Result<(), Vec<String>> {
    let mut problems = Vec::new();
    let mut sent: BTreeSet<(String, u64)> = BTreeSet::new();
    let mut sent_seq: BTreeMap<u64, usize> = BTreeMap::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, e) in events.iter().enumerate() {
        if e.t < last_t {
            problems.push(format!("event {i}: t {} precedes {}", e.t, last_t));
        }
        last_t = last_t.max(e.t);
        match e.ev {
            EventKind::PktTx => {
                if let Some(seq) = e.seq {
                    sent.insert((e.node.clone(), seq));
                    *sent_seq.entry(seq).or_default() += 1;
                }
            }
            EventKind::PktRx => {
                let Some(seq) = e.seq else {
                    problems.push(format!("event {i}: pkt_rx without seq"));
                    continue;
                };
                let matched = match event_src(e) {
                    Some(src) => sent.contains(&(src.to_owned(), seq)),
                    None => sent_seq.contains_key(&seq),
                };
                if !matched {
                    problems.push(format!("event {i}: pkt_rx seq {seq} has no earlier pkt_tx"));
                }
            }
            _ => {}
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}
