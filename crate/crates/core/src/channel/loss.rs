use std::collections::BTreeMap;
use std::path::Path;

use ordered::Key;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Thorp absorption in dB/km, frequency in kHz.
pub fn thorp_alpha(f_khz: f64) -> f64 {
    let f2 = f_khz * f_khz;
    0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003
}

/// Spreading and absorption plus a Gaussian gain centred on the duct axis.
///
/// The duct term is a calibration surrogate for the low-loss layer around the
/// sound-speed minimum, not a propagation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticDuct {
    #[serde(default = "default_k_spread")]
    pub k_spread: f64,
    #[serde(default = "default_f_khz")]
    pub f_khz: f64,
    /// Duct axis depth; `None` means "use the SSP minimum".
    #[serde(default)]
    pub duct_depth_m: Option<f64>,
    #[serde(default = "default_sigma")]
    pub duct_sigma_m: f64,
    #[serde(default = "default_gain")]
    pub duct_gain_db: f64,
}

fn default_k_spread() -> f64 {
    1.5
}
fn default_f_khz() -> f64 {
    26.0
}
fn default_sigma() -> f64 {
    6.0
}
fn default_gain() -> f64 {
    25.0
}

impl Default for AnalyticDuct {
    fn default() -> Self {
        Self {
            k_spread: default_k_spread(),
            f_khz: default_f_khz(),
            duct_depth_m: None,
            duct_sigma_m: default_sigma(),
            duct_gain_db: default_gain(),
        }
    }
}

impl AnalyticDuct {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(1.0..=2.0).contains(&self.k_spread) {
            return Err(LossError::Invalid(format!("k_spread {} not in [1, 2]", self.k_spread)));
        }
        if !(self.duct_sigma_m > 0.0) {
            return Err(LossError::Invalid("duct_sigma_m must be positive".into()));
        }
        if !(self.duct_gain_db >= 0.0) {
            return Err(LossError::Invalid("duct_gain_db must be non-negative".into()));
        }
        if !(self.f_khz >= 0.0) {
            return Err(LossError::Invalid("f_khz must be non-negative".into()));
        }
        Ok(())
    }

    fn loss(&self, duct_depth: f64, range_m: f64, tx_depth: f64, rx_depth: f64) -> f64 {
        let spreading = self.k_spread * 10.0 * range_m.log10();
        let absorption = thorp_alpha(self.f_khz) * range_m / 1000.0;
        let s2 = 2.0 * self.duct_sigma_m * self.duct_sigma_m;
        let off = (tx_depth - duct_depth).powi(2) + (rx_depth - duct_depth).powi(2);
        let duct = self.duct_gain_db * (-off / s2).exp();
        (spreading + absorption - duct).max(0.0)
    }
}

#[derive(Debug, Error)]
pub enum LossError {
    #[error("range {0} m is below the 1 m reference distance")]
    RangeTooShort(f64),
    #[error("point (tx {tx} m, rx {rx} m, range {range} m) lies outside the TL grid")]
    OutOfGrid { tx: f64, rx: f64, range: f64 },
    #[error("invalid loss model: {0}")]
    Invalid(String),
    #[error("TL grid is missing the lattice point (tx {tx}, rx {rx}, range {range})")]
    IncompleteGrid { tx: f64, rx: f64, range: f64 },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid TL grid CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Tabulated loss on a full (tx depth, rx depth, range) lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct TlGrid {
    pub tx_depths_m: Vec<f64>,
    pub rx_depths_m: Vec<f64>,
    pub ranges_m: Vec<f64>,
    /// Row-major `[tx][rx][range]`.
    tl_db: Vec<f64>,
    /// Reject queries outside the axes instead of clamping.
    pub strict: bool,
}

mod ordered {
    /// Total-order wrapper so lattice coordinates can key a map.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Key(pub f64);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Key {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }
}

#[derive(Debug, Deserialize)]
struct GridRow {
    tx_depth_m: f64,
    rx_depth_m: f64,
    range_m: f64,
    tl_db: f64,
}

fn strictly_increasing(axis: &[f64]) -> bool {
    axis.windows(2).all(|w| w[1] > w[0])
}

impl TlGrid {
    pub fn new(
        tx_depths_m: Vec<f64>,
        rx_depths_m: Vec<f64>,
        ranges_m: Vec<f64>,
        tl_db: Vec<f64>,
    ) -> Result<Self, LossError> {
        for (name, axis) in [("tx", &tx_depths_m), ("rx", &rx_depths_m), ("range", &ranges_m)] {
            if axis.is_empty() || !strictly_increasing(axis) {
                return Err(LossError::Invalid(format!(
                    "{name} axis must be non-empty and strictly increasing"
                )));
            }
        }
        if tl_db.len() != tx_depths_m.len() * rx_depths_m.len() * ranges_m.len() {
            return Err(LossError::Invalid("TL table size does not match the axes".into()));
        }
        if tl_db.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(LossError::Invalid("TL values must be finite and non-negative".into()));
        }
        Ok(Self {
            tx_depths_m,
            rx_depths_m,
            ranges_m,
            tl_db,
            strict: false,
        })
    }

    /// Reads `tx_depth_m,rx_depth_m,range_m,tl_db` rows in any order; every
    /// lattice point must be present exactly once.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self, LossError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut points: BTreeMap<(Key, Key, Key), f64> = BTreeMap::new();
        for row in rdr.deserialize() {
            let r: GridRow = row?;
            let key = (Key(r.tx_depth_m), Key(r.rx_depth_m), Key(r.range_m));
            if points.insert(key, r.tl_db).is_some() {
                return Err(LossError::Invalid(format!(
                    "duplicate lattice point (tx {}, rx {}, range {})",
                    r.tx_depth_m, r.rx_depth_m, r.range_m
                )));
            }
        }
        let axis = |pick: fn(&(Key, Key, Key)) -> Key| {
            let mut v: Vec<f64> = points.keys().map(|k| pick(k).0).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let tx = axis(|k| k.0);
        let rx = axis(|k| k.1);
        let ranges = axis(|k| k.2);
        let mut table = Vec::with_capacity(tx.len() * rx.len() * ranges.len());
        for &t in &tx {
            for &r in &rx {
                for &g in &ranges {
                    let v = points.get(&(Key(t), Key(r), Key(g))).ok_or(LossError::IncompleteGrid {
                        tx: t,
                        rx: r,
                        range: g,
                    })?;
                    table.push(*v);
                }
            }
        }
        Self::new(tx, rx, ranges, table)
    }

    pub fn load(path: &Path) -> Result<Self, LossError> {
        let file = std::fs::File::open(path).map_err(|source| LossError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_reader(file)
    }

    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.tl_db[(i * self.rx_depths_m.len() + j) * self.ranges_m.len() + k]
    }

    /// Trilinear interpolation, clamped at the axis edges.
    pub fn interpolate(&self, tx: f64, rx: f64, range: f64) -> Result<f64, LossError> {
        if self.strict {
            let inside = |axis: &[f64], v: f64| v >= axis[0] && v <= axis[axis.len() - 1];
            if !inside(&self.tx_depths_m, tx) || !inside(&self.rx_depths_m, rx) || !inside(&self.ranges_m, range) {
                return Err(LossError::OutOfGrid { tx, rx, range });
            }
        }
        let (i0, i1, wi) = bracket(&self.tx_depths_m, tx);
        let (j0, j1, wj) = bracket(&self.rx_depths_m, rx);
        let (k0, k1, wk) = bracket(&self.ranges_m, range);
        let lerp = |a: f64, b: f64, w: f64| a + (b - a) * w;
        let plane = |i| {
            let near = lerp(self.at(i, j0, k0), self.at(i, j0, k1), wk);
            let far = lerp(self.at(i, j1, k0), self.at(i, j1, k1), wk);
            lerp(near, far, wj)
        };
        Ok(lerp(plane(i0), plane(i1), wi))
    }
}

/// Bracketing indices and weight of `v` on `axis`, clamped.
fn bracket(axis: &[f64], v: f64) -> (usize, usize, f64) {
    let n = axis.len();
    if n == 1 || v <= axis[0] {
        return (0, 0, 0.0);
    }
    if v >= axis[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let hi = axis.partition_point(|&a| a <= v);
    let lo = hi - 1;
    (lo, hi, (v - axis[lo]) / (axis[hi] - axis[lo]))
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransmissionLossModel {
    AnalyticDuct { params: AnalyticDuct, duct_depth_m: f64 },
    Grid(TlGrid),
}

impl TransmissionLossModel {
    /// Analytic model whose duct axis defaults to `ssp_minimum_depth`.
    pub fn analytic(params: AnalyticDuct, ssp_minimum_depth: f64) -> Result<Self, LossError> {
        params.validate()?;
        let duct_depth_m = params.duct_depth_m.unwrap_or(ssp_minimum_depth);
        Ok(Self::AnalyticDuct { params, duct_depth_m })
    }

    pub fn frequency_khz(&self) -> Option<f64> {
        match self {
            Self::AnalyticDuct { params, .. } => Some(params.f_khz),
            Self::Grid(_) => None,
        }
    }
}

/// Loss in dB from a source at `tx_depth_m` to a receiver `range_m` away at
/// `rx_depth_m`.
pub fn transmission_loss(
    model: &TransmissionLossModel,
    range_m: f64,
    tx_depth_m: f64,
    rx_depth_m: f64,
) -> Result<f64, LossError> {
    if !(range_m >= 1.0) {
        return Err(LossError::RangeTooShort(range_m));
    }
    match model {
        TransmissionLossModel::AnalyticDuct { params, duct_depth_m } => {
            Ok(params.loss(*duct_depth_m, range_m, tx_depth_m, rx_depth_m))
        }
        TransmissionLossModel::Grid(grid) => grid.interpolate(tx_depth_m, rx_depth_m, range_m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn duct(gain: f64) -> TransmissionLossModel {
        TransmissionLossModel::analytic(
            AnalyticDuct {
                duct_gain_db: gain,
                ..AnalyticDuct::default()
            },
            13.74,
        )
        .unwrap()
    }

    #[test]
    fn thorp_values() {
        assert!((thorp_alpha(0.0) - 0.003).abs() < 1e-12);
        // Term by term at 26 kHz: 0.1098373, 6.2333795, 0.1859, 0.003.
        let f2: f64 = 676.0;
        let expected = 0.11 * f2 / 677.0 + 44.0 * f2 / 4776.0 + 2.75e-4 * f2 + 0.003;
        assert!((thorp_alpha(26.0) - expected).abs() < 1e-12);
        assert!((thorp_alpha(26.0) - 6.5266).abs() < 1e-3);
        assert!((thorp_alpha(10.0) - 1.1870).abs() < 1e-3);
    }

    #[test]
    fn analytic_examples() {
        let m = duct(25.0);
        let tl = transmission_loss(&m, 1.0, 100.0, 100.0).unwrap();
        assert!(tl.abs() < 0.01, "{tl}");
        let flat = duct(0.0);
        let tl = transmission_loss(&flat, 1000.0, 50.0, 50.0).unwrap();
        assert!((tl - 51.53).abs() < 0.01, "{tl}");
        let on_axis = transmission_loss(&m, 1000.0, 13.74, 13.74).unwrap();
        let no_gain = transmission_loss(&flat, 1000.0, 13.74, 13.74).unwrap();
        assert!((no_gain - on_axis - 25.0).abs() < 1e-9);
        // Floored at zero close to the source on the duct axis.
        assert_eq!(transmission_loss(&m, 2.0, 13.74, 13.74).unwrap(), 0.0);
        assert!(matches!(
            transmission_loss(&m, 0.5, 0.0, 0.0),
            Err(LossError::RangeTooShort(_))
        ));
    }

    #[test]
    fn invalid_params() {
        let bad = AnalyticDuct {
            k_spread: 2.5,
            ..AnalyticDuct::default()
        };
        assert!(TransmissionLossModel::analytic(bad, 10.0).is_err());
        let bad = AnalyticDuct {
            duct_sigma_m: 0.0,
            ..AnalyticDuct::default()
        };
        assert!(TransmissionLossModel::analytic(bad, 10.0).is_err());
    }

    fn small_grid() -> TlGrid {
        let mut csv = String::from("tx_depth_m,rx_depth_m,range_m,tl_db\n");
        for (i, tx) in [5.0, 15.0].iter().enumerate() {
            for (j, rx) in [5.0, 15.0, 25.0].iter().enumerate() {
                for (k, r) in [100.0, 500.0, 1000.0].iter().enumerate() {
                    let v = 30.0 + 10.0 * i as f64 + 3.0 * j as f64 + 12.0 * k as f64;
                    csv.push_str(&format!("{tx},{rx},{r},{v}\n"));
                }
            }
        }
        TlGrid::from_csv_reader(csv.as_bytes()).unwrap()
    }

    #[test]
    fn grid_reproduces_nodes_and_clamps() {
        let g = small_grid();
        assert_eq!(g.interpolate(5.0, 5.0, 100.0).unwrap(), 30.0);
        assert_eq!(g.interpolate(15.0, 25.0, 1000.0).unwrap(), 30.0 + 10.0 + 6.0 + 24.0);
        // Midpoints of a linear table interpolate exactly.
        assert!((g.interpolate(10.0, 10.0, 300.0).unwrap() - (30.0 + 5.0 + 1.5 + 6.0)).abs() < 1e-9);
        // Clamping.
        assert_eq!(g.interpolate(0.0, 0.0, 50.0).unwrap(), 30.0);
        let mut strict = g.clone();
        strict.strict = true;
        assert!(matches!(
            strict.interpolate(0.0, 5.0, 100.0),
            Err(LossError::OutOfGrid { .. })
        ));
    }

    #[test]
    fn grid_rejects_incomplete_lattice() {
        let csv = "tx_depth_m,rx_depth_m,range_m,tl_db\n5,5,100,40\n5,5,200,45\n5,10,100,41\n";
        assert!(matches!(
            TlGrid::from_csv_reader(csv.as_bytes()),
            Err(LossError::IncompleteGrid { .. })
        ));
        let csv = "tx_depth_m,rx_depth_m,range_m,tl_db\n5,5,100,-1\n";
        assert!(TlGrid::from_csv_reader(csv.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn tl_increases_with_range(r in 1.0f64..5000.0, dr in 0.1f64..1000.0, tx in 0.0f64..100.0, rx in 0.0f64..100.0) {
            // Without duct gain the zero floor is never reached.
            let m = duct(0.0);
            let a = transmission_loss(&m, r, tx, rx).unwrap();
            let b = transmission_loss(&m, r + dr, tx, rx).unwrap();
            prop_assert!(b > a);
            // With gain, strict once above the floor.
            let g = duct(25.0);
            let a = transmission_loss(&g, r, tx, rx).unwrap();
            let b = transmission_loss(&g, r + dr, tx, rx).unwrap();
            prop_assert!(b > a || (a == 0.0 && b >= a));
        }

        #[test]
        fn duct_axis_is_best(r in 1.0f64..5000.0, delta in -50.0f64..50.0) {
            let m = duct(25.0);
            let on = transmission_loss(&m, r, 13.74, 13.74).unwrap();
            let off = transmission_loss(&m, r, 13.74 + delta, 13.74 + delta).unwrap();
            prop_assert!(on <= off);
        }

        #[test]
        fn grid_bounded_by_cell(tx in 0.0f64..30.0, rx in 0.0f64..30.0, r in 50.0f64..1200.0) {
            let g = small_grid();
            let v = g.interpolate(tx, rx, r).unwrap();
            let (i0, i1, _) = bracket(&g.tx_depths_m, tx);
            let (j0, j1, _) = bracket(&g.rx_depths_m, rx);
            let (k0, k1, _) = bracket(&g.ranges_m, r);
            let mut corners = Vec::new();
            for i in [i0, i1] {
                for j in [j0, j1] {
                    for k in [k0, k1] {
                        corners.push(g.at(i, j, k));
                    }
                }
            }
            let min = corners.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= min - 1e-9 && v <= max + 1e-9);
        }
    }
}
