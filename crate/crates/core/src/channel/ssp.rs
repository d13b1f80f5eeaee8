use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

/// Speeds outside this band load with a warning.
pub const PLAUSIBLE_SPEED: (f64, f64) = (1400.0, 1600.0);
/// Speeds outside this band are rejected.
pub const VALID_SPEED: (f64, f64) = (1300.0, 1700.0);

#[derive(Debug, Error)]
pub enum SspError {
    #[error("sound speed profile needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("depths must be non-negative and strictly increasing (row {row})")]
    NotIncreasing { row: usize },
    #[error("sound speed {speed} m/s at {depth} m is outside [1300, 1700]")]
    SpeedOutOfRange { depth: f64, speed: f64 },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid SSP CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Piecewise-linear sound speed over depth.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundSpeedProfile {
    samples: Vec<(f64, f64)>,
}

#[derive(Debug, Deserialize)]
struct Row {
    depth_m: f64,
    speed_mps: f64,
}

impl SoundSpeedProfile {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, SspError> {
        if samples.len() < 2 {
            return Err(SspError::TooFewSamples(samples.len()));
        }
        for (row, w) in samples.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(SspError::NotIncreasing { row: row + 1 });
            }
        }
        if !(samples[0].0 >= 0.0) {
            return Err(SspError::NotIncreasing { row: 0 });
        }
        for &(depth, speed) in &samples {
            if !(VALID_SPEED.0..=VALID_SPEED.1).contains(&speed) {
                return Err(SspError::SpeedOutOfRange { depth, speed });
            }
            if !(PLAUSIBLE_SPEED.0..=PLAUSIBLE_SPEED.1).contains(&speed) {
                log::warn!("sound speed {speed} m/s at {depth} m is outside the usual 1400-1600 m/s band");
            }
        }
        Ok(Self { samples })
    }

    /// Reads a `depth_m,speed_mps` CSV.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self, SspError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut samples = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            samples.push((row.depth_m, row.speed_mps));
        }
        Self::new(samples)
    }

    pub fn load(path: &Path) -> Result<Self, SspError> {
        let file = std::fs::File::open(path).map_err(|source| SspError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_reader(file)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Depth and speed of the sampled minimum (shallowest on ties).
    pub fn minimum(&self) -> (f64, f64) {
        self.samples
            .iter()
            .copied()
            .fold(self.samples[0], |best, s| if s.1 < best.1 { s } else { best })
    }

    /// Mean speed over the depth interval between `a` and `b`.
    pub fn mean_speed(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if hi - lo < 1e-9 {
            return sample_ssp(self, lo);
        }
        // Exact integral of the piecewise-linear profile (clamped outside).
        let mut knots = vec![lo];
        knots.extend(self.samples.iter().map(|s| s.0).filter(|&d| d > lo && d < hi));
        knots.push(hi);
        let area: f64 = knots
            .windows(2)
            .map(|w| 0.5 * (sample_ssp(self, w[0]) + sample_ssp(self, w[1])) * (w[1] - w[0]))
            .sum();
        area / (hi - lo)
    }
}

/// Linear interpolation between bracketing samples, clamped at both ends.
pub fn sample_ssp(p: &SoundSpeedProfile, depth_m: f64) -> f64 {
    let s = &p.samples;
    if depth_m <= s[0].0 {
        return s[0].1;
    }
    let last = s[s.len() - 1];
    if depth_m >= last.0 {
        return last.1;
    }
    let i = s.partition_point(|&(d, _)| d <= depth_m);
    let (d0, c0) = s[i - 1];
    let (d1, c1) = s[i];
    c0 + (c1 - c0) * (depth_m - d0) / (d1 - d0)
}
