//! Frame-structure overhead and instantaneous achievable rate.

use serde::{Deserialize, Serialize};

use crate::channel::{array_response, ChannelState, Codebook};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    /// Full beam alignment, uplink feedback, data and secondary probing.
    Initialization,
    /// Feedback of the previous secondary probe, data and secondary probing.
    Secondary,
}

impl FrameKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::Initialization => "initialization",
            FrameKind::Secondary => "secondary",
        }
    }
}

/// Slot durations of both frame types, in a common (arbitrary) time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub t_acq: f64,
    pub t_fb_i: f64,
    pub t_dl: f64,
    pub t_sp: f64,
    pub t_fb_sp: f64,
}

impl FrameConfig {
    /// One acquisition slot per codebook beam and one probing slot per probe.
    pub fn for_codebook(beams: usize, probes: usize) -> Self {
        Self {
            t_acq: beams as f64,
            t_fb_i: 10.0,
            t_dl: 500.0,
            t_sp: probes as f64,
            t_fb_sp: probes as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.t_acq, self.t_fb_i, self.t_dl, self.t_sp, self.t_fb_sp];
        if all.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(invalid("frame", "durations must be finite and >= 0"));
        }
        if !(self.t_dl > 0.0) {
            return Err(invalid("frame.t_dl", "data slot must be positive"));
        }
        Ok(())
    }

    pub fn frame_length(&self, kind: FrameKind) -> f64 {
        match kind {
            FrameKind::Initialization => self.t_acq + self.t_fb_i + self.t_dl + self.t_sp,
            FrameKind::Secondary => self.t_fb_sp + self.t_dl + self.t_sp,
        }
    }

    pub fn overhead(&self, kind: FrameKind) -> f64 {
        match kind {
            FrameKind::Initialization => self.t_acq + self.t_fb_i + self.t_sp,
            FrameKind::Secondary => self.t_fb_sp + self.t_sp,
        }
    }
}

/// `T_X / T_FR` for the given frame type.
pub fn overhead_fraction(kind: FrameKind, cfg: &FrameConfig) -> Result<f64> {
    let total = cfg.frame_length(kind);
    if !(total > 0.0) {
        return Err(invalid("frame", "total frame length is zero"));
    }
    cfg.validate()?;
    Ok(cfg.overhead(kind) / total)
}

/// Link parameters that the rate expression needs besides the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    pub power: f64,
    pub noise_std: f64,
}

/// Achievable rate in bit/s/Hz when the BS serves the UE on the codebook
/// beam nearest `theta_hat_deg` while the true path is `state`.
pub fn instantaneous_rate(
    state: &ChannelState,
    theta_hat_deg: f64,
    kind: FrameKind,
    cfg: &FrameConfig,
    params: RateParams,
    sample_time_s: f64,
    cb: &Codebook,
) -> Result<f64> {
    if !(params.noise_std > 0.0) {
        return Err(invalid("noise_std", "must be positive for the rate"));
    }
    if !(state.alpha.norm() > 0.0) {
        return Err(invalid("alpha", "must be nonzero"));
    }
    if !theta_hat_deg.is_finite() {
        return Err(Error::NonFiniteAngle(theta_hat_deg));
    }
    if !cb.covers(theta_hat_deg) {
        return Err(Error::AngleOutOfRange {
            angle: theta_hat_deg,
            min: cb.angle(0),
            max: cb.angle(cb.len() - 1),
        });
    }
    let beam = cb.vector(cb.nearest_index(theta_hat_deg));
    let response = array_response(cb.geometry(), state.theta_deg, beam)?;
    let doppler =
        num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * state.doppler_hz * sample_time_s);
    let gain = (state.alpha * response * doppler).norm_sqr();
    let snr = params.power * gain / (params.noise_std * params.noise_std);
    let rho = overhead_fraction(kind, cfg)?;
    Ok((1.0 - rho) * (1.0 + snr).log2())
}
