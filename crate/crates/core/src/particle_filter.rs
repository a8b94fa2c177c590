//! Random-walk particle filter over the angle of departure.
//!
//! Each particle is an angle hypothesis. Weights come from the complex
//! residual between the probe measurement and the response predicted by the
//! particle angle and a smoothed path-gain estimate.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{array_response, ArrayGeometry, Codebook, PseudoSpectrum, MAX_ANGLE_DEG};
use crate::error::{invalid, Error, Result};

/// Weight kept on the previous gain estimate at every step.
const GAIN_SMOOTHING: f64 = 0.9;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PfConfig {
    pub n_particles: usize,
    /// Random-walk standard deviation per frame, degrees.
    pub process_std_deg: f64,
    /// Resample when the effective sample size drops below this fraction of N.
    pub resample_threshold: f64,
}

impl Default for PfConfig {
    fn default() -> Self {
        Self {
            n_particles: 100,
            process_std_deg: 1.5,
            resample_threshold: 0.5,
        }
    }
}

impl PfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(invalid("pf.n_particles", "need at least one particle"));
        }
        if !(self.process_std_deg > 0.0) || !self.process_std_deg.is_finite() {
            return Err(invalid("pf.process_std_deg", "must be positive"));
        }
        if !(self.resample_threshold > 0.0 && self.resample_threshold <= 1.0) {
            return Err(invalid("pf.resample_threshold", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub angles_deg: Vec<f64>,
    pub weights: Vec<f64>,
    pub gain_estimate: Complex64,
}

impl ParticleSet {
    pub fn new(angles_deg: Vec<f64>, weights: Vec<f64>, gain_estimate: Complex64) -> Result<Self> {
        if angles_deg.is_empty() {
            return Err(Error::Empty("particle set"));
        }
        if angles_deg.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: angles_deg.len(),
                actual: weights.len(),
            });
        }
        check_normalized(&weights)?;
        Ok(Self {
            angles_deg,
            weights,
            gain_estimate,
        })
    }

    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }

    pub fn mean_angle(&self) -> f64 {
        self.angles_deg.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    pub fn effective_sample_size(&self) -> f64 {
        effective_sample_size(&self.weights)
    }
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

fn check_normalized(weights: &[f64]) -> Result<()> {
    let sum: f64 = weights.iter().sum();
    if !((sum - 1.0).abs() <= WEIGHT_SUM_TOLERANCE) || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::UnnormalizedWeights(sum));
    }
    Ok(())
}

/// Outcome of a single filter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfEstimate {
    pub theta_hat_deg: f64,
    pub ess: f64,
    pub resampled: bool,
    /// Every particle had numerically zero likelihood; weights were reset.
    pub diverged: bool,
}

fn clamp_angle(theta: f64) -> f64 {
    theta.clamp(-MAX_ANGLE_DEG, MAX_ANGLE_DEG)
}

/// Seeds the filter around the best beam of the initial sweep.
pub fn pf_init<R: Rng + ?Sized>(
    cfg: &PfConfig,
    spectrum: &PseudoSpectrum,
    cb: &Codebook,
    rng: &mut R,
) -> Result<ParticleSet> {
    cfg.validate()?;
    if spectrum.len() != cb.len() {
        return Err(Error::DimensionMismatch {
            expected: cb.len(),
            actual: spectrum.len(),
        });
    }
    let m = spectrum.main_index();
    let center = cb.angle(m);
    let angles_deg = (0..cfg.n_particles)
        .map(|_| {
            let u: f64 = rng.sample(StandardNormal);
            clamp_angle(center + cfg.process_std_deg * u)
        })
        .collect();
    let weights = vec![1.0 / cfg.n_particles as f64; cfg.n_particles];
    let response = array_response(cb.geometry(), center, cb.vector(m))?;
    let gain_estimate = spectrum.values()[m] / response;
    Ok(ParticleSet {
        angles_deg,
        weights,
        gain_estimate,
    })
}

/// Predict, weight against `z` measured through `probe_beam`, resample when
/// the effective sample size collapses, then refresh the gain estimate.
pub fn pf_step<R: Rng + ?Sized>(
    mut ps: ParticleSet,
    z: Complex64,
    probe_beam: &[Complex64],
    cfg: &PfConfig,
    noise_std: f64,
    geom: &ArrayGeometry,
    rng: &mut R,
) -> Result<(ParticleSet, PfEstimate)> {
    check_normalized(&ps.weights)?;
    if probe_beam.len() != geom.n_tx() {
        return Err(Error::DimensionMismatch {
            expected: geom.n_tx(),
            actual: probe_beam.len(),
        });
    }
    if !(noise_std > 0.0) {
        return Err(invalid("noise_std", "likelihood needs a positive noise level"));
    }

    for a in ps.angles_deg.iter_mut() {
        let u: f64 = rng.sample(StandardNormal);
        *a = clamp_angle(*a + cfg.process_std_deg * u);
    }

    let inv_var = 1.0 / (noise_std * noise_std);
    let mut log_w = Vec::with_capacity(ps.len());
    for (a, w) in ps.angles_deg.iter().zip(&ps.weights) {
        let predicted = ps.gain_estimate * array_response(geom, *a, probe_beam)?;
        log_w.push(w.ln() - (z - predicted).norm_sqr() * inv_var);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let diverged = !max.is_finite() || max < f64::MIN_POSITIVE.ln();
    let n = ps.len() as f64;
    if diverged {
        ps.weights.iter_mut().for_each(|w| *w = 1.0 / n);
    } else {
        let mut total = 0.0;
        for (w, lw) in ps.weights.iter_mut().zip(&log_w) {
            *w = (lw - max).exp();
            total += *w;
        }
        ps.weights.iter_mut().for_each(|w| *w /= total);
    }

    let ess = ps.effective_sample_size();
    let resampled = ess < cfg.resample_threshold * n;
    if resampled {
        let idx = resample_systematic(&ps.weights, rng)?;
        ps.angles_deg = idx.iter().map(|&i| ps.angles_deg[i]).collect();
        ps.weights.iter_mut().for_each(|w| *w = 1.0 / n);
    }

    let theta_hat_deg = ps.mean_angle();
    let response = array_response(geom, clamp_angle(theta_hat_deg), probe_beam)?;
    if response.norm() > 1e-9 {
        ps.gain_estimate = GAIN_SMOOTHING * ps.gain_estimate + (1.0 - GAIN_SMOOTHING) * (z / response);
    }
    Ok((
        ps,
        PfEstimate {
            theta_hat_deg,
            ess,
            resampled,
            diverged,
        },
    ))
}

/// Systematic resampling: one uniform offset, `N` equal strides over the CDF.
pub fn resample_systematic<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::Empty("weights"));
    }
    check_normalized(weights)?;
    let n = weights.len();
    let step = 1.0 / n as f64;
    let offset = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cdf = weights[0];
    let mut i = 0;
    for j in 0..n {
        let u = offset + j as f64 * step;
        while u > cdf && i + 1 < n {
            i += 1;
            cdf += weights[i];
        }
        out.push(i);
    }
    Ok(out)
}
