//! Deterministic discrete-event core: scenarios, the event loop, logs,
//! Monte Carlo aggregation and timeline analysis.

pub mod analyze;
pub mod config;
pub mod log;
pub mod mc;
pub mod sim;

pub use analyze::{analyze_log_text, analyze_timeline, Milestones, TimelineReport};
pub use config::{apply_override, ConfigError, RunMode, ScenarioConfig, World};
pub use log::{parse_jsonl, to_jsonl, validate_log, Event, EventKind, MalformedLine};
pub use mc::{boxplot_csv, five_number, monte_carlo, range_sweep, FiveNumber, McSummary, SweepPoint};
pub use sim::{
    paced_run, run, subsystem_rng, ControlChannel, ControlCommand, RunMetrics, RunOutput, Simulation, Telemetry,
    Transmission,
};
