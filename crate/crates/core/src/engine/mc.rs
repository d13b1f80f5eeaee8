//! Independent-seed repetitions and boxplot summaries.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ConfigError, ScenarioConfig};
use super::sim::{run, RunMetrics};

/// Boxplot statistics with linearly interpolated quartiles (type 7).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Type-7 quantile of an ascending slice.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn five_number(samples: &[f64]) -> Option<FiveNumber> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Some(FiveNumber {
        min: s[0],
        q1: quantile(&s, 0.25),
        median: quantile(&s, 0.5),
        q3: quantile(&s, 0.75),
        max: s[s.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDistribution {
    /// PER per run, in seed order.
    pub samples: Vec<f64>,
    pub summary: Option<FiveNumber>,
}

impl PhaseDistribution {
    fn new(samples: Vec<f64>) -> Self {
        Self {
            summary: five_number(&samples),
            samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub runs: usize,
    pub seed_base: u64,
    /// Runs whose follower never finished the optimized burst; they are
    /// left out of the optimized distribution.
    pub incomplete: usize,
    pub baseline: PhaseDistribution,
    pub optimized: PhaseDistribution,
    pub mean_delay_s: Option<f64>,
}

/// Runs seeds `seed_base..seed_base + n_runs` on the current rayon pool.
/// The result does not depend on execution order.
pub fn monte_carlo_runs(cfg: &ScenarioConfig, n_runs: usize, seed_base: u64) -> Result<Vec<RunMetrics>, ConfigError> {
    if n_runs == 0 {
        return Err(ConfigError::Invalid {
            key: "runs".into(),
            msg: "at least one run is required".into(),
        });
    }
    cfg.validate()?;
    (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut c = cfg.clone();
            c.seed = seed_base.wrapping_add(i as u64);
            run(&c).map(|out| out.metrics)
        })
        .collect()
}

pub fn summarize(runs: &[RunMetrics], seed_base: u64) -> McSummary {
    let baseline: Vec<f64> = runs.iter().filter_map(|m| m.baseline.per).collect();
    let optimized: Vec<f64> = runs
        .iter()
        .filter(|m| m.completion)
        .filter_map(|m| m.optimized.per)
        .collect();
    let delays: Vec<f64> = runs
        .iter()
        .flat_map(|m| m.delays.iter().map(|d| d.end_to_end_s))
        .collect();
    McSummary {
        runs: runs.len(),
        seed_base,
        incomplete: runs.iter().filter(|m| !m.completion).count(),
        baseline: PhaseDistribution::new(baseline),
        optimized: PhaseDistribution::new(optimized),
        mean_delay_s: (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64),
    }
}

pub fn monte_carlo(cfg: &ScenarioConfig, n_runs: usize, seed_base: u64) -> Result<McSummary, ConfigError> {
    Ok(summarize(&monte_carlo_runs(cfg, n_runs, seed_base)?, seed_base))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub range_m: f64,
    pub summary: McSummary,
}

/// Monte Carlo at each follower-leader separation.
pub fn range_sweep(
    cfg: &ScenarioConfig,
    ranges_m: &[f64],
    n_runs: usize,
    seed_base: u64,
) -> Result<Vec<SweepPoint>, ConfigError> {
    ranges_m
        .iter()
        .map(|&r| {
            Ok(SweepPoint {
                range_m: r,
                summary: monte_carlo(&cfg.with_range(r)?, n_runs, seed_base)?,
            })
        })
        .collect()
}

/// `range_m,phase,min,q1,median,q3,max`, one row per range and phase.
pub fn boxplot_csv(points: &[SweepPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["range_m", "phase", "min", "q1", "median", "q3", "max"])
        .expect("in-memory write");
    for p in points {
        for (phase, dist) in [("baseline", &p.summary.baseline), ("optimized", &p.summary.optimized)] {
            let cells: Vec<String> = match dist.summary {
                Some(s) => [s.min, s.q1, s.median, s.q3, s.max]
                    .iter()
                    .map(|v| format!("{v:.6}"))
                    .collect(),
                None => vec![String::new(); 5],
            };
            let mut row = vec![format!("{}", p.range_m), phase.to_owned()];
            row.extend(cells);
            w.write_record(&row).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
