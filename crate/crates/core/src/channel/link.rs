use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{transmission_loss, LossError, TransmissionLossModel};
use super::ssp::SoundSpeedProfile;

pub const DEFAULT_SOUND_SPEED: f64 = 1500.0;

/// Link budget terms, all in dB. The SNR → success curve is logistic with
/// midpoint `snr50_db` and scale `snr_slope_db`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    #[serde(default = "default_sl")]
    pub source_level_db: f64,
    #[serde(default = "default_nl")]
    pub noise_level_db: f64,
    #[serde(default = "default_snr50")]
    pub snr50_db: f64,
    #[serde(default = "default_slope")]
    pub snr_slope_db: f64,
}

fn default_sl() -> f64 {
    187.0
}
fn default_nl() -> f64 {
    60.0
}
fn default_snr50() -> f64 {
    10.0
}
fn default_slope() -> f64 {
    1.5
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            source_level_db: default_sl(),
            noise_level_db: default_nl(),
            snr50_db: default_snr50(),
            snr_slope_db: default_slope(),
        }
    }
}

impl LinkBudget {
    pub fn snr_db(&self, tl_db: f64, extra_gain_db: f64) -> f64 {
        self.source_level_db - tl_db + extra_gain_db - self.noise_level_db
    }
}

pub fn packet_success_prob(budget: &LinkBudget, tl_db: f64, extra_gain_db: f64) -> f64 {
    let snr = budget.snr_db(tl_db, extra_gain_db);
    1.0 / (1.0 + (-(snr - budget.snr50_db) / budget.snr_slope_db).exp())
}

fn wrap_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r > 180.0 {
        360.0 - r
    } else {
        r
    }
}

/// Heading-dependent gain of two horizontally mounted transducers.
///
/// Each endpoint contributes `(D/2)(1 + cos θ)/2`, where θ is the angle
/// between its stern direction and the line to the peer. Headings and the
/// bearing are compass degrees.
pub fn directivity_gain(tx_heading: f64, rx_heading: f64, bearing_tx_to_rx: f64, max_gain_db: f64) -> f64 {
    let term = |heading: f64, bearing: f64| {
        let off = wrap_deg(heading + 180.0 - bearing).to_radians();
        max_gain_db / 2.0 * (1.0 + off.cos()) / 2.0
    };
    term(tx_heading, bearing_tx_to_rx) + term(rx_heading, bearing_tx_to_rx + 180.0)
}

pub fn propagation_delay(range_m: f64, c_eff_mps: f64) -> f64 {
    range_m / c_eff_mps
}

/// Compass bearing (0 = +y, 90 = +x) from `a` to `b`.
pub fn bearing_deg(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    (bx - ax).atan2(by - ay).to_degrees().rem_euclid(360.0)
}

/// Geometry of one endpoint at transmission time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePose {
    pub x_m: f64,
    pub y_m: f64,
    pub depth_m: f64,
    pub heading_deg: f64,
}

impl NodePose {
    pub fn slant_range(&self, other: &NodePose) -> f64 {
        let dx = self.x_m - other.x_m;
        let dy = self.y_m - other.y_m;
        let dz = self.depth_m - other.depth_m;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Everything needed to evaluate one link.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub loss: TransmissionLossModel,
    pub budget: LinkBudget,
    /// Peak transducer directivity in dB; `None` disables the heading term.
    pub directivity_db: Option<f64>,
    /// Profile used for the effective sound speed; 1500 m/s without one.
    pub ssp: Option<SoundSpeedProfile>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEvaluation {
    pub range_m: f64,
    pub tl_db: f64,
    pub gain_db: f64,
    pub snr_db: f64,
    pub p_success: f64,
    pub delay_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reception {
    pub decoded: bool,
    pub rx_time: f64,
    pub link: LinkEvaluation,
}

impl ChannelModel {
    pub fn effective_speed(&self, a_depth: f64, b_depth: f64) -> f64 {
        self.ssp
            .as_ref()
            .map(|p| p.mean_speed(a_depth, b_depth))
            .unwrap_or(DEFAULT_SOUND_SPEED)
    }

    pub fn evaluate(&self, src: &NodePose, dst: &NodePose) -> Result<LinkEvaluation, LossError> {
        let range_m = src.slant_range(dst);
        // Below the 1 m reference the loss is taken at 1 m.
        let tl_db = transmission_loss(&self.loss, range_m.max(1.0), src.depth_m, dst.depth_m)?;
        let gain_db = match self.directivity_db {
            Some(d) => directivity_gain(
                src.heading_deg,
                dst.heading_deg,
                bearing_deg(src.x_m, src.y_m, dst.x_m, dst.y_m),
                d,
            ),
            None => 0.0,
        };
        let c = self.effective_speed(src.depth_m, dst.depth_m);
        Ok(LinkEvaluation {
            range_m,
            tl_db,
            gain_db,
            snr_db: self.budget.snr_db(tl_db, gain_db),
            p_success: packet_success_prob(&self.budget, tl_db, gain_db),
            delay_s: propagation_delay(range_m, c),
        })
    }
}

/// One Bernoulli draw per call from the channel's own stream.
pub fn decide_reception<R: Rng + ?Sized>(
    rng: &mut R,
    model: &ChannelModel,
    src: &NodePose,
    dst: &NodePose,
    tx_time: f64,
    airtime: f64,
) -> Result<Reception, LossError> {
    let link = model.evaluate(src, dst)?;
    let draw: f64 = rng.random();
    Ok(Reception {
        decoded: draw < link.p_success,
        rx_time: tx_time + airtime + link.delay_s,
        link,
    })
}
