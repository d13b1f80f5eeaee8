//! Vehicle kinematics and the simulated CTD.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{sample_ssp, NodePose, SoundSpeedProfile};
use crate::netstack::NodeAddress;

pub const DEFAULT_VERTICAL_RATE: f64 = 0.3;
pub const DEFAULT_BUOY_DEPTH: f64 = 0.5;
pub const DEFAULT_CTD_NOISE: f64 = 0.05;
pub const DEFAULT_CTD_INTERVAL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Leader,
    Follower,
    Buoy,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Leader => "leader",
            Role::Follower => "follower",
            Role::Buoy => "buoy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drift {
    pub sigma_mps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub addr: NodeAddress,
    pub role: Role,
    pub x_m: f64,
    pub y_m: f64,
    pub depth_m: f64,
    pub heading_deg: f64,
    pub target_depth_m: f64,
    pub max_vertical_rate_mps: f64,
    pub drift: Option<Drift>,
    pub seabed_depth_m: f64,
}

impl VehicleState {
    pub fn new(addr: NodeAddress, role: Role, x_m: f64, y_m: f64, depth_m: f64, seabed_depth_m: f64) -> Self {
        let depth_m = if role == Role::Buoy {
            depth_m
        } else {
            depth_m.clamp(0.0, seabed_depth_m)
        };
        Self {
            addr,
            role,
            x_m,
            y_m,
            depth_m,
            heading_deg: 0.0,
            target_depth_m: depth_m,
            max_vertical_rate_mps: DEFAULT_VERTICAL_RATE,
            drift: None,
            seabed_depth_m,
        }
    }

    /// Commands a new depth. Buoys ignore depth commands.
    pub fn set_target_depth(&mut self, depth_m: f64) {
        if self.role != Role::Buoy {
            self.target_depth_m = depth_m.clamp(0.0, self.seabed_depth_m);
        }
    }

    pub fn pose(&self) -> NodePose {
        NodePose {
            x_m: self.x_m,
            y_m: self.y_m,
            depth_m: self.depth_m,
            heading_deg: self.heading_deg,
        }
    }

    pub fn at_target(&self) -> bool {
        self.depth_m == self.target_depth_m
    }
}

/// Advances one fixed step: constant-rate depth change toward the target
/// without overshoot, plus an optional horizontal random walk.
pub fn step_kinematics<R: Rng + ?Sized>(state: &VehicleState, dt_s: f64, rng: &mut R) -> VehicleState {
    let mut next = state.clone();
    if state.role != Role::Buoy {
        let max_step = state.max_vertical_rate_mps * dt_s;
        let delta = state.target_depth_m - state.depth_m;
        next.depth_m = if delta.abs() <= max_step {
            state.target_depth_m
        } else {
            state.depth_m + max_step.copysign(delta)
        };
    }
    if let Some(drift) = state.drift {
        if drift.sigma_mps > 0.0 {
            let n = Normal::new(0.0, drift.sigma_mps * dt_s.sqrt()).expect("finite drift sigma");
            next.x_m += n.sample(rng);
            next.y_m += n.sample(rng);
        }
    }
    next
}

/// Profile value at `depth_m` plus Gaussian sensor noise.
pub fn ctd_sample<R: Rng + ?Sized>(profile: &SoundSpeedProfile, depth_m: f64, rng: &mut R, noise_sigma: f64) -> f64 {
    let truth = sample_ssp(profile, depth_m);
    if noise_sigma > 0.0 {
        truth + Normal::new(0.0, noise_sigma).expect("finite noise sigma").sample(rng)
    } else {
        truth
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CastError {
    #[error("CTD cast has {0} sample(s); at least 2 are needed")]
    EmptyCast(usize),
}

/// Sound speed samples in acquisition order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CtdCast {
    pub samples: Vec<(f64, f64)>,
    pub noise_sigma_mps: f64,
    pub sample_interval_m: f64,
}

impl CtdCast {
    pub fn new(noise_sigma_mps: f64, sample_interval_m: f64) -> Self {
        Self {
            samples: Vec::new(),
            noise_sigma_mps,
            sample_interval_m,
        }
    }

    pub fn push(&mut self, depth_m: f64, speed_mps: f64) {
        self.samples.push((depth_m, speed_mps));
    }

    /// Samples the profile every `sample_interval_m` from `from` to `to`
    /// inclusive, as a descending probe would.
    pub fn descend<R: Rng + ?Sized>(
        profile: &SoundSpeedProfile,
        from: f64,
        to: f64,
        noise_sigma: f64,
        interval: f64,
        rng: &mut R,
    ) -> Self {
        let mut cast = Self::new(noise_sigma, interval);
        let steps = ((to - from) / interval).floor() as usize;
        for i in 0..=steps {
            let d = from + i as f64 * interval;
            cast.push(d, ctd_sample(profile, d, rng, noise_sigma));
        }
        if cast.samples.last().is_some_and(|&(d, _)| d < to) {
            cast.push(to, ctd_sample(profile, to, rng, noise_sigma));
        }
        cast
    }
}

/// Depth of the slowest measured sound speed; the shallowest depth wins ties.
pub fn optimal_depth(cast: &CtdCast) -> Result<f64, CastError> {
    if cast.samples.len() < 2 {
        return Err(CastError::EmptyCast(cast.samples.len()));
    }
    let best = cast
        .samples
        .iter()
        .copied()
        .reduce(|best, s| {
            if s.1 < best.1 || (s.1 == best.1 && s.0 < best.0) {
                s
            } else {
                best
            }
        })
        .expect("non-empty");
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn auv(depth: f64, target: f64) -> VehicleState {
        let mut v = VehicleState::new(2, Role::Follower, 0.0, 0.0, depth, 108.0);
        v.set_target_depth(target);
        v
    }

    fn fixture() -> SoundSpeedProfile {
        SoundSpeedProfile::from_csv_reader(include_str!("../fixtures/ssp_afternoon.csv").as_bytes()).unwrap()
    }

    #[test]
    fn kinematics_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((step_kinematics(&auv(5.0, 40.0), 10.0, &mut rng).depth_m - 8.0).abs() < 1e-12);
        assert_eq!(step_kinematics(&auv(40.0, 40.0), 10.0, &mut rng).depth_m, 40.0);
        assert_eq!(step_kinematics(&auv(39.9, 40.0), 10.0, &mut rng).depth_m, 40.0);
        assert!((step_kinematics(&auv(20.0, 5.0), 10.0, &mut rng).depth_m - 17.0).abs() < 1e-12);
    }

    #[test]
    fn buoy_ignores_depth_commands() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = VehicleState::new(3, Role::Buoy, 0.0, 0.0, DEFAULT_BUOY_DEPTH, 108.0);
        b.set_target_depth(40.0);
        for _ in 0..100 {
            b = step_kinematics(&b, 0.5, &mut rng);
        }
        assert_eq!(b.depth_m, DEFAULT_BUOY_DEPTH);
    }

    #[test]
    fn targets_clamped_to_water_column() {
        let mut v = auv(10.0, 500.0);
        assert_eq!(v.target_depth_m, 108.0);
        v.set_target_depth(-4.0);
        assert_eq!(v.target_depth_m, 0.0);
    }

    #[test]
    fn drift_is_replayable() {
        let mut v = auv(10.0, 10.0);
        v.drift = Some(Drift { sigma_mps: 0.1 });
        let walk = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = v.clone();
            for _ in 0..50 {
                s = step_kinematics(&s, 0.5, &mut rng);
            }
            (s.x_m, s.y_m)
        };
        assert_eq!(walk(4), walk(4));
        assert_ne!(walk(4), (0.0, 0.0));
    }

    #[test]
    fn ctd_examples() {
        let p = fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(ctd_sample(&p, 13.74, &mut rng, 0.0), 1502.0);
        assert_eq!(ctd_sample(&p, 500.0, &mut rng, 0.0), 1508.0);
        let n = 10_000;
        let draws: Vec<f64> = (0..n).map(|_| ctd_sample(&p, 20.0, &mut rng, 0.05)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let std = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        // Standard error of a sample std is about sigma / sqrt(2(n-1)).
        let se = 0.05 / (2.0 * (n - 1) as f64).sqrt();
        assert!((std - 0.05).abs() < 3.0 * se, "std {std}");
    }

    #[test]
    fn optimal_depth_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cast = CtdCast::descend(&fixture(), 0.0, 40.0, 0.0, 0.5, &mut rng);
        let d = optimal_depth(&cast).unwrap();
        assert!((d - 13.74).abs() <= 0.5, "{d}");

        let mut falling = CtdCast::new(0.0, 1.0);
        for i in 0..5 {
            falling.push(i as f64, 1510.0 - i as f64);
        }
        assert_eq!(optimal_depth(&falling).unwrap(), 4.0);

        let mut tie = CtdCast::new(0.0, 1.0);
        for (d, c) in [(8.0, 1504.0), (10.0, 1501.0), (11.0, 1503.0), (12.0, 1501.0)] {
            tie.push(d, c);
        }
        assert_eq!(optimal_depth(&tie).unwrap(), 10.0);

        let mut one = CtdCast::new(0.0, 1.0);
        one.push(3.0, 1500.0);
        assert_eq!(optimal_depth(&one), Err(CastError::EmptyCast(1)));
    }

    proptest! {
        #[test]
        fn depth_rate_bounded(depth in 0.0f64..100.0, target in 0.0f64..100.0, dt in 0.01f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let v = auv(depth, target);
            let n = step_kinematics(&v, dt, &mut rng);
            prop_assert!((n.depth_m - v.depth_m).abs() <= v.max_vertical_rate_mps * dt + 1e-12);
            prop_assert!((n.depth_m - target).abs() <= (depth - target).abs());
            prop_assert_eq!((n.x_m, n.y_m), (v.x_m, v.y_m));
        }

        #[test]
        fn noiseless_cast_finds_argmin(min_depth in 2.0f64..38.0, min_speed in 1480.0f64..1500.0) {
            let p = SoundSpeedProfile::new(vec![(0.0, 1510.0), (min_depth, min_speed), (40.0, 1508.0)]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let cast = CtdCast::descend(&p, 0.0, 40.0, 0.0, 0.5, &mut rng);
            prop_assert!((optimal_depth(&cast).unwrap() - min_depth).abs() <= 0.5);
        }
    }
}
