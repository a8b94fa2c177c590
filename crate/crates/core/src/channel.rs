//! Line-of-sight channel between a ULA base station and a single-antenna UE.
//!
//! Angles are degrees measured from array broadside, in `[-90, 90]`. The
//! physical angle from the array axis is `90 - theta`, so the per-element
//! phase term `cos(theta_phys)` becomes `sin(theta)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

pub const MAX_ANGLE_DEG: f64 = 90.0;

const GRID_TOLERANCE_DEG: f64 = 1e-9;

/// Element positions of a linear array, in wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<f64>,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidGeometry("array needs at least one element".into()));
        }
        if positions[0] != 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "first element must sit at the origin, got {}",
                positions[0]
            )));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite element position".into()));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGeometry(
                "element positions must be strictly increasing".into(),
            ));
        }
        Ok(Self { positions })
    }

    /// Uniform linear array with `n_tx` elements spaced `spacing` wavelengths apart.
    pub fn ula(n_tx: usize, spacing: f64) -> Result<Self> {
        if n_tx == 0 {
            return Err(Error::InvalidGeometry("array needs at least one element".into()));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        Self::new((0..n_tx).map(|i| i as f64 * spacing).collect())
    }

    /// Half-wavelength ULA.
    pub fn half_wavelength(n_tx: usize) -> Result<Self> {
        Self::ula(n_tx, 0.5)
    }

    pub fn n_tx(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
}

/// Ground-truth LoS path parameters for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    pub theta_deg: f64,
    pub alpha: Complex64,
    pub doppler_hz: f64,
    pub delay_s: f64,
}

impl ChannelState {
    pub fn new(theta_deg: f64, alpha: Complex64, doppler_hz: f64, delay_s: f64) -> Result<Self> {
        check_angle(theta_deg)?;
        if !(alpha.norm() > 0.0) || !alpha.is_finite() {
            return Err(invalid("alpha", format!("|alpha| must be positive, got {alpha}")));
        }
        Ok(Self {
            theta_deg,
            alpha,
            doppler_hz,
            delay_s,
        })
    }

    /// Static path at broadside-relative `theta_deg` with real gain `gain`.
    pub fn stationary(theta_deg: f64, gain: f64) -> Result<Self> {
        Self::new(theta_deg, Complex64::new(gain, 0.0), 0.0, 0.0)
    }
}

pub(crate) fn check_angle(theta_deg: f64) -> Result<()> {
    if !theta_deg.is_finite() {
        return Err(Error::NonFiniteAngle(theta_deg));
    }
    if theta_deg.abs() > MAX_ANGLE_DEG + GRID_TOLERANCE_DEG {
        return Err(Error::AngleOutOfRange {
            angle: theta_deg,
            min: -MAX_ANGLE_DEG,
            max: MAX_ANGLE_DEG,
        });
    }
    Ok(())
}

/// Transmit steering vector toward `theta_deg`; every entry has unit modulus.
pub fn steering_vector(geom: &ArrayGeometry, theta_deg: f64) -> Result<Vec<Complex64>> {
    check_angle(theta_deg)?;
    let u = theta_deg.to_radians().sin();
    Ok(geom
        .positions
        .iter()
        .map(|d| Complex64::from_polar(1.0, 2.0 * PI * d * u))
        .collect())
}

/// `a^H(theta) * beam`
pub fn array_response(geom: &ArrayGeometry, theta_deg: f64, beam: &[Complex64]) -> Result<Complex64> {
    if beam.len() != geom.n_tx() {
        return Err(Error::DimensionMismatch {
            expected: geom.n_tx(),
            actual: beam.len(),
        });
    }
    check_angle(theta_deg)?;
    let u = theta_deg.to_radians().sin();
    Ok(geom
        .positions
        .iter()
        .zip(beam)
        .map(|(d, b)| Complex64::from_polar(1.0, -2.0 * PI * d * u) * b)
        .sum())
}

/// Unit-norm beams on a uniform angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    geometry: ArrayGeometry,
    start_deg: f64,
    step_deg: f64,
    angles_deg: Vec<f64>,
    vectors: Vec<Vec<Complex64>>,
}

pub fn build_codebook(geom: &ArrayGeometry, start_deg: f64, step_deg: f64, count: usize) -> Result<Codebook> {
    if count < 2 {
        return Err(Error::InvalidCodebook(format!("need at least 2 beams, got {count}")));
    }
    if !(step_deg > 0.0) || !step_deg.is_finite() || !start_deg.is_finite() {
        return Err(Error::InvalidCodebook(format!(
            "step must be positive and finite, got start={start_deg} step={step_deg}"
        )));
    }
    let angles_deg: Vec<f64> = (0..count).map(|k| start_deg + k as f64 * step_deg).collect();
    let last = angles_deg[count - 1];
    if start_deg < -MAX_ANGLE_DEG - GRID_TOLERANCE_DEG || last > MAX_ANGLE_DEG + GRID_TOLERANCE_DEG {
        return Err(Error::InvalidCodebook(format!(
            "grid [{start_deg}, {last}] leaves [-90, 90]"
        )));
    }
    let angles_deg: Vec<f64> = angles_deg
        .into_iter()
        .map(|a| a.clamp(-MAX_ANGLE_DEG, MAX_ANGLE_DEG))
        .collect();
    let scale = 1.0 / (geom.n_tx() as f64).sqrt();
    let vectors = angles_deg
        .iter()
        .map(|&a| steering_vector(geom, a).map(|v| v.into_iter().map(|x| x * scale).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Codebook {
        geometry: geom.clone(),
        start_deg,
        step_deg,
        angles_deg,
        vectors,
    })
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn step_deg(&self) -> f64 {
        self.step_deg
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn angle(&self, index: usize) -> f64 {
        self.angles_deg[index]
    }

    pub fn vector(&self, index: usize) -> &[Complex64] {
        &self.vectors[index]
    }

    pub fn vectors(&self) -> &[Vec<Complex64>] {
        &self.vectors
    }

    /// Whether `theta_deg` lies within half a step of the grid span.
    pub fn covers(&self, theta_deg: f64) -> bool {
        let half = 0.5 * self.step_deg;
        theta_deg >= self.angles_deg[0] - half - GRID_TOLERANCE_DEG
            && theta_deg <= self.angles_deg[self.len() - 1] + half + GRID_TOLERANCE_DEG
    }

    /// Grid index whose angle is nearest to `theta_deg` (ties toward the lower index).
    /// Angles beyond the grid snap to the closest end.
    pub fn nearest_index(&self, theta_deg: f64) -> usize {
        let pos = (theta_deg - self.start_deg) / self.step_deg;
        let idx = if pos - pos.floor() == 0.5 {
            pos.floor()
        } else {
            pos.round()
        };
        idx.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    pub fn nearest_angle(&self, theta_deg: f64) -> f64 {
        self.angle(self.nearest_index(theta_deg))
    }
}

/// Draws circularly-symmetric complex Gaussian noise with total variance `std^2`.
pub fn complex_noise<R: Rng + ?Sized>(noise_std: f64, rng: &mut R) -> Complex64 {
    if noise_std == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let s = noise_std / std::f64::consts::SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Noiseless part of a single probe: `alpha * a^H(theta) beam * exp(j 2 pi nu t)`.
pub fn expected_measurement(
    geom: &ArrayGeometry,
    state: &ChannelState,
    beam: &[Complex64],
    sample_time_s: f64,
) -> Result<Complex64> {
    let response = array_response(geom, state.theta_deg, beam)?;
    let doppler = Complex64::from_polar(1.0, 2.0 * PI * state.doppler_hz * sample_time_s);
    Ok(state.alpha * response * doppler)
}

/// One pilot observation at the single-antenna UE through `beam`.
pub fn measure<R: Rng + ?Sized>(
    geom: &ArrayGeometry,
    state: &ChannelState,
    beam: &[Complex64],
    noise_std: f64,
    sample_time_s: f64,
    rng: &mut R,
) -> Result<Complex64> {
    if !(noise_std >= 0.0) {
        return Err(invalid("noise_std", format!("must be >= 0, got {noise_std}")));
    }
    let clean = expected_measurement(geom, state, beam, sample_time_s)?;
    Ok(clean + complex_noise(noise_std, rng))
}

/// Complex probe measurements over the whole codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSpectrum {
    values: Vec<Complex64>,
    main_index: usize,
}

impl PseudoSpectrum {
    pub fn from_values(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("pseudo-spectrum"));
        }
        let main_index = argmax_magnitude(&values);
        Ok(Self { values, main_index })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn main_index(&self) -> usize {
        self.main_index
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }
}

fn argmax_magnitude(values: &[Complex64]) -> usize {
    let mut best = 0;
    let mut best_mag = f64::NEG_INFINITY;
    for (i, z) in values.iter().enumerate() {
        let m = z.norm_sqr();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    best
}

/// Exhaustive sweep: beam `i` is probed at `t0 + i * dt`.
pub fn beam_sweep<R: Rng + ?Sized>(
    state: &ChannelState,
    cb: &Codebook,
    noise_std: f64,
    t0: f64,
    dt: f64,
    rng: &mut R,
) -> Result<PseudoSpectrum> {
    if cb.is_empty() {
        return Err(Error::Empty("codebook"));
    }
    let values = cb
        .vectors
        .iter()
        .enumerate()
        .map(|(i, beam)| measure(&cb.geometry, state, beam, noise_std, t0 + i as f64 * dt, rng))
        .collect::<Result<Vec<_>>>()?;
    PseudoSpectrum::from_values(values)
}
