//! Acoustic channel: sound speed profiles, transmission loss, link budget and
//! per-packet reception decisions.

pub mod link;
pub mod loss;
pub mod ssp;

pub use link::{
    bearing_deg, decide_reception, directivity_gain, packet_success_prob, propagation_delay, ChannelModel, LinkBudget,
    LinkEvaluation, NodePose, Reception,
};
pub use loss::{thorp_alpha, transmission_loss, AnalyticDuct, LossError, TlGrid, TransmissionLossModel};
pub use ssp::{sample_ssp, SoundSpeedProfile, SspError};
