//! Default experiment geometry, per-realization randomisation and the
//! measurement simulation that feeds dataset generation.
//!
//! The BS sits 105 m below the centre of a 70 m circle. The evaluation
//! arc runs between the two tangent points seen from the BS (AoD ±41.8°),
//! passing 35 m from the BS at its midpoint. Training data comes from two
//! earlier laps at different speeds plus the exit line, so the evaluation
//! pass itself is never seen during training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{beam_sweep, measure, ArrayGeometry, ChannelState, Codebook, PseudoSpectrum};
use crate::dataset::{generate_dataset, probe_bins, Dataset, FrameObservation, MeasurementRun};
use crate::error::{invalid, Result};
use crate::framing::{FrameConfig, FrameKind, RateParams};
use crate::motion::{
    generate_trajectory, to_channel_states, LinkBudget, Segment, SpeedChange, Trajectory, TrajectorySpec,
};

pub const BS_POSITION_M: [f64; 2] = [0.0, -105.0];
pub const CIRCLE_RADIUS_M: f64 = 70.0;
/// Circle angle of the training start point S.
pub const START_ANGLE_DEG: f64 = -11.5;

/// Circle angles of the two tangent points seen from the BS.
pub fn tangent_angles_deg() -> (f64, f64) {
    let half = (CIRCLE_RADIUS_M / -BS_POSITION_M[1]).acos().to_degrees();
    (-90.0 - half, -90.0 + half)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub n_tx: usize,
    pub spacing_wavelengths: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookConfig {
    pub start_deg: f64,
    pub step_deg: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub array: ArrayConfig,
    pub codebook: CodebookConfig,
    pub link: LinkBudget,
    pub eval_trajectory: TrajectorySpec,
    pub train_trajectory: TrajectorySpec,
    /// Slot durations; derived from the codebook size and probe count when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameConfig>,
    pub noise_std: f64,
    pub power: f64,
    pub probes_per_frame: usize,
    pub half_width: usize,
    pub realizations: usize,
    pub train_realizations: usize,
    /// Training realizations are cut into runs of this many frames, each
    /// opening with its own initial sweep; 0 keeps whole passes.
    pub train_run_frames: usize,
    /// Half-range of the per-realization rotation about the BS, in grid steps.
    pub jitter_steps: f64,
    /// Chance that a training frame probes one bin beside the true beam
    /// instead of on it; 0 is plain teacher forcing.
    pub train_offset_prob: f64,
    pub seed: u64,
}

fn arc(start: f64, end: f64, profile: &[(f64, f64)]) -> Segment {
    Segment::CircularArc {
        center_m: [0.0, 0.0],
        radius_m: CIRCLE_RADIUS_M,
        start_angle_deg: start,
        end_angle_deg: end,
        speed_profile: profile.iter().map(|&(f, v)| SpeedChange::new(f, v)).collect(),
    }
}

pub fn default_eval_trajectory() -> TrajectorySpec {
    let (a, d) = tangent_angles_deg();
    TrajectorySpec {
        frame_period_s: 0.1,
        segments: vec![arc(a, d, &[(0.0, 11.6), (0.4, 12.6), (0.6, 12.4)])],
    }
}

pub fn default_train_trajectory() -> TrajectorySpec {
    let lap1_end = START_ANGLE_DEG + 360.0;
    let lap2_end = lap1_end + 360.0;
    let s = START_ANGLE_DEG.to_radians();
    let start = [CIRCLE_RADIUS_M * s.cos(), CIRCLE_RADIUS_M * s.sin()];
    TrajectorySpec {
        frame_period_s: 0.1,
        segments: vec![
            arc(START_ANGLE_DEG, lap1_end, &[(0.0, 14.0), (0.5, 10.0)]),
            arc(lap1_end, lap2_end, &[(0.0, 10.0), (0.5, 14.5)]),
            Segment::Line {
                start_m: start,
                end_m: [153.0, 41.0],
                speed_profile: vec![SpeedChange::new(0.0, 12.0)],
            },
        ],
    }
}

pub fn default_link() -> LinkBudget {
    LinkBudget {
        bs_position_m: BS_POSITION_M,
        carrier_hz: 28e9,
        // 25 dB beamformed SNR at 35 m with 64 antennas and unit noise, which
        // puts the Oracle rate near 6 bit/s/Hz at closest approach.
        ref_gain: (10f64.powf(2.5) / 64.0).sqrt(),
        ref_distance_m: 35.0,
        pathloss_exponent: 2.0,
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            array: ArrayConfig {
                n_tx: 64,
                spacing_wavelengths: 0.5,
            },
            codebook: CodebookConfig {
                start_deg: -90.0,
                step_deg: 1.0,
                count: 181,
            },
            link: default_link(),
            eval_trajectory: default_eval_trajectory(),
            train_trajectory: default_train_trajectory(),
            frame: None,
            noise_std: 1.0,
            power: 1.0,
            probes_per_frame: 3,
            half_width: 8,
            realizations: 26,
            train_realizations: 8,
            train_run_frames: 100,
            jitter_steps: 0.5,
            train_offset_prob: 0.5,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        self.codebook()?;
        self.link.validate()?;
        generate_trajectory(&self.eval_trajectory)?;
        generate_trajectory(&self.train_trajectory)?;
        if let Some(f) = &self.frame {
            f.validate()?;
        }
        if !(self.noise_std > 0.0) || !self.noise_std.is_finite() {
            return Err(invalid("noise_std", "must be positive"));
        }
        if !(self.power > 0.0) || !self.power.is_finite() {
            return Err(invalid("power", "must be positive"));
        }
        let window = 2 * self.half_width + 1;
        if self.half_width == 0 || window > self.codebook.count {
            return Err(invalid(
                "half_width",
                format!("window of {window} does not fit the codebook"),
            ));
        }
        if self.probes_per_frame == 0 || self.probes_per_frame > window {
            return Err(invalid("probes_per_frame", "must be between 1 and the window length"));
        }
        if self.realizations == 0 || self.train_realizations == 0 {
            return Err(invalid("realizations", "must be positive"));
        }
        if self.train_run_frames == 1 {
            return Err(invalid("train_run_frames", "runs need at least two frames"));
        }
        if !(0.0..=1.0).contains(&self.train_offset_prob) {
            return Err(invalid("train_offset_prob", "must lie in [0, 1]"));
        }
        if !(self.jitter_steps >= 0.0) {
            return Err(invalid("jitter_steps", "must be >= 0"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::ula(self.array.n_tx, self.array.spacing_wavelengths)
    }

    pub fn codebook(&self) -> Result<Codebook> {
        crate::channel::build_codebook(
            &self.geometry()?,
            self.codebook.start_deg,
            self.codebook.step_deg,
            self.codebook.count,
        )
    }

    /// Slot durations for a tracker that probes `probes` beams per frame.
    pub fn frame_config(&self, probes: usize) -> FrameConfig {
        self.frame
            .unwrap_or_else(|| FrameConfig::for_codebook(self.codebook.count, probes))
    }

    pub fn rate_params(&self) -> RateParams {
        RateParams {
            power: self.power,
            noise_std: self.noise_std,
        }
    }
}

/// Independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    EvalChannel = 1,
    TrainChannel = 2,
    TrainNoise = 3,
    Tracking = 4,
    NetworkInit = 5,
    Training = 6,
}

pub fn stream_rng(seed: u64, stream: Stream, realization: u64, sub: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 56) | ((realization & 0xFF_FFFF_FFFF) << 16) | (sub & 0xFFFF));
    rng
}

/// One randomised pass along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub index: usize,
    pub states: Vec<ChannelState>,
    pub times_s: Vec<f64>,
    pub frame_period_s: f64,
}

impl Realization {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Consecutive pieces of `frames` frames; a trailing piece shorter than two frames is dropped.
    pub fn split(&self, frames: usize) -> Vec<Realization> {
        if frames == 0 || frames >= self.len() {
            return vec![self.clone()];
        }
        self.states
            .chunks(frames)
            .zip(self.times_s.chunks(frames))
            .filter(|(s, _)| s.len() >= 2)
            .map(|(s, t)| Realization {
                index: self.index,
                states: s.to_vec(),
                times_s: t.to_vec(),
                frame_period_s: self.frame_period_s,
            })
            .collect()
    }
}

/// Rotates `traj` about the BS by a random sub-grid angle and draws a global phase.
pub fn realize<R: Rng + ?Sized>(
    traj: &Trajectory,
    link: &LinkBudget,
    jitter_deg: f64,
    index: usize,
    rng: &mut R,
) -> Result<Realization> {
    let rot = if jitter_deg > 0.0 {
        rng.random_range(-jitter_deg..=jitter_deg)
    } else {
        0.0
    };
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let moved = traj.rotated_about(link.bs_position_m, rot);
    let states = to_channel_states(&moved, link, phase)?;
    Ok(Realization {
        index,
        states,
        times_s: moved.times_s,
        frame_period_s: traj.frame_period_s,
    })
}

fn realizations(cfg: &ScenarioConfig, spec: &TrajectorySpec, count: usize, stream: Stream) -> Result<Vec<Realization>> {
    let traj = generate_trajectory(spec)?;
    let jitter = cfg.jitter_steps * cfg.codebook.step_deg;
    (0..count)
        .map(|r| {
            realize(
                &traj,
                &cfg.link,
                jitter,
                r,
                &mut stream_rng(cfg.seed, stream, r as u64, 0),
            )
        })
        .collect()
}

pub fn eval_realizations(cfg: &ScenarioConfig) -> Result<Vec<Realization>> {
    realizations(cfg, &cfg.eval_trajectory, cfg.realizations, Stream::EvalChannel)
}

pub fn train_realizations(cfg: &ScenarioConfig) -> Result<Vec<Realization>> {
    realizations(cfg, &cfg.train_trajectory, cfg.train_realizations, Stream::TrainChannel)
}

/// Sample time of probe `j` of `probes`, spaced uniformly over the probing
/// slot at the end of a frame that starts at `frame_start_s`.
pub fn probe_time(
    frame: &FrameConfig,
    kind: FrameKind,
    frame_start_s: f64,
    period_s: f64,
    j: usize,
    probes: usize,
) -> f64 {
    let total = frame.frame_length(kind);
    let slot = (total - frame.t_sp + (j as f64 + 0.5) * frame.t_sp / probes.max(1) as f64) / total;
    frame_start_s + period_s * slot
}

/// Full codebook sweep at the start of an Initialization frame.
pub fn initial_sweep<R: Rng + ?Sized>(
    state: &ChannelState,
    cb: &Codebook,
    frame: &FrameConfig,
    noise_std: f64,
    frame_start_s: f64,
    period_s: f64,
    rng: &mut R,
) -> Result<PseudoSpectrum> {
    let slot = period_s / frame.frame_length(FrameKind::Initialization);
    beam_sweep(state, cb, noise_std, frame_start_s, slot, rng)
}

/// Teacher-forced measurements: the probes of frame `k` surround the true grid index.
pub fn simulate_training_run<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    real: &Realization,
    cb: &Codebook,
    rng: &mut R,
) -> Result<MeasurementRun> {
    let p = cfg.probes_per_frame;
    let frame = cfg.frame_config(p);
    let period = real.frame_period_s;
    let initial = initial_sweep(&real.states[0], cb, &frame, cfg.noise_std, real.times_s[0], period, rng)?;
    let geom = cb.geometry();
    let mut frames = Vec::with_capacity(real.len());
    for (k, (state, t0)) in real.states.iter().zip(&real.times_s).enumerate() {
        let kind = if k == 0 {
            FrameKind::Initialization
        } else {
            FrameKind::Secondary
        };
        let true_index = cb.nearest_index(state.theta_deg);
        let beam_index = if cfg.train_offset_prob > 0.0 && rng.random_bool(cfg.train_offset_prob) {
            if rng.random_bool(0.5) {
                true_index.saturating_sub(1)
            } else {
                (true_index + 1).min(cb.len() - 1)
            }
        } else {
            true_index
        };
        let probes = probe_bins(beam_index, p, cb.len())
            .enumerate()
            .map(|(j, bin)| {
                let t = probe_time(&frame, kind, *t0, period, j, p);
                measure(geom, state, cb.vector(bin), cfg.noise_std, t, rng).map(|z| (bin, z))
            })
            .collect::<Result<Vec<_>>>()?;
        frames.push(FrameObservation {
            true_index,
            beam_index,
            probes,
        });
    }
    Ok(MeasurementRun { initial, frames })
}

/// Dataset from the training trajectory for the scenario's `(L, p)`, one
/// sequence per run.
pub fn training_dataset(cfg: &ScenarioConfig) -> Result<Dataset> {
    cfg.validate()?;
    let cb = cfg.codebook()?;
    let mut runs = Vec::new();
    for real in train_realizations(cfg)? {
        let mut rng = stream_rng(cfg.seed, Stream::TrainNoise, real.index as u64, 0);
        for piece in real.split(cfg.train_run_frames) {
            runs.push(simulate_training_run(cfg, &piece, &cb, &mut rng)?);
        }
    }
    generate_dataset(&runs, cfg.half_width, cfg.probes_per_frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_points_give_expected_aod() {
        let (a, d) = tangent_angles_deg();
        assert!((a + 138.19).abs() < 0.01 && (d + 41.81).abs() < 0.01);
        let link = default_link();
        let pa = [
            CIRCLE_RADIUS_M * a.to_radians().cos(),
            CIRCLE_RADIUS_M * a.to_radians().sin(),
        ];
        let pd = [
            CIRCLE_RADIUS_M * d.to_radians().cos(),
            CIRCLE_RADIUS_M * d.to_radians().sin(),
        ];
        assert!((link.bearing_deg(pa) + 41.81).abs() < 0.01);
        assert!((link.bearing_deg(pd) - 41.81).abs() < 0.01);
    }

    #[test]
    fn default_eval_run_has_98_frames() {
        let traj = generate_trajectory(&default_eval_trajectory()).unwrap();
        assert_eq!(traj.len(), 98);
        let link = default_link();
        let states = to_channel_states(&traj, &link, 0.0).unwrap();
        let max_slew = states
            .windows(2)
            .map(|w| (w[1].theta_deg - w[0].theta_deg).abs())
            .fold(0.0, f64::max);
        assert!((1.8..2.3).contains(&max_slew), "max slew {max_slew}");
        // Closest approach is 35 m, where the beamformed SNR is 25 dB.
        let best = states.iter().map(|s| s.alpha.norm()).fold(0.0, f64::max);
        let snr_db = 10.0 * (64.0 * best * best).log10();
        assert!((snr_db - 25.0).abs() < 0.05, "{snr_db}");
    }

    #[test]
    fn oracle_rate_rises_then_falls() {
        let cfg = ScenarioConfig::default();
        let real = &eval_realizations(&cfg).unwrap()[0];
        let g: Vec<f64> = real.states.iter().map(|s| s.alpha.norm()).collect();
        let peak = g
            .iter()
            .enumerate()
            .fold((0, 0.0), |a, (i, v)| if *v > a.1 { (i, *v) } else { a })
            .0;
        assert!(peak > 30 && peak < 70, "peak at {peak}");
        assert!(g[0] < g[peak] && g[g.len() - 1] < g[peak]);
    }

    #[test]
    fn realizations_differ_but_repeat() {
        let cfg = ScenarioConfig::default();
        let a = eval_realizations(&cfg).unwrap();
        let b = eval_realizations(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 26);
        assert_ne!(a[0].states[0].alpha, a[1].states[0].alpha);
        for r in &a {
            let drift = (r.states[0].theta_deg - a[0].states[0].theta_deg).abs();
            assert!(drift <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn streams_are_independent() {
        let mut x = stream_rng(5, Stream::Tracking, 3, 1);
        let mut y = stream_rng(5, Stream::Tracking, 3, 2);
        let mut z = stream_rng(5, Stream::Tracking, 3, 1);
        let (a, b, c): (u64, u64, u64) = (x.random(), y.random(), z.random());
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn probe_times_fall_inside_the_probing_slot() {
        let f = FrameConfig::for_codebook(181, 3);
        let sec = f.frame_length(FrameKind::Secondary);
        for j in 0..3 {
            let t = probe_time(&f, FrameKind::Secondary, 2.0, 0.1, j, 3);
            let slot = (t - 2.0) / 0.1 * sec;
            assert!(slot > sec - 3.0 && slot < sec, "{slot}");
        }
    }

    #[test]
    fn training_dataset_shape() {
        let cfg = ScenarioConfig {
            train_realizations: 2,
            half_width: 3,
            probes_per_frame: 3,
            ..ScenarioConfig::default()
        };
        let d = training_dataset(&cfg).unwrap();
        let frames = generate_trajectory(&cfg.train_trajectory).unwrap().len();
        let per_pass = frames.div_ceil(100) - usize::from(frames % 100 == 1);
        assert_eq!(d.sequences.len(), 2 * per_pass);
        assert_eq!(d.sequences[0].len(), 99);
        let whole = training_dataset(&ScenarioConfig {
            train_run_frames: 0,
            ..cfg.clone()
        })
        .unwrap();
        assert_eq!(whole.sequences.len(), 2);
        assert!(whole.sequences.iter().all(|s| s.len() == frames - 1));
        assert!(d.sequences[0].features.iter().all(|f| f.len() == 7));
    }

    #[test]
    fn training_beam_offsets_follow_probability() {
        let cb = ScenarioConfig::default().codebook().unwrap();
        let count_off = |prob: f64| {
            let cfg = ScenarioConfig {
                train_offset_prob: prob,
                ..ScenarioConfig::default()
            };
            let real = &train_realizations(&cfg).unwrap()[0];
            let mut rng = stream_rng(0, Stream::TrainNoise, 0, 0);
            let run = simulate_training_run(&cfg, real, &cb, &mut rng).unwrap();
            assert!(run.frames.iter().all(|f| f.beam_index.abs_diff(f.true_index) <= 1));
            let off = run.frames.iter().filter(|f| f.beam_index != f.true_index).count();
            off as f64 / run.frames.len() as f64
        };
        assert_eq!(count_off(0.0), 0.0);
        let half = count_off(0.5);
        assert!((half - 0.5).abs() < 0.1, "{half}");
    }

    #[test]
    fn validation_catches_bad_settings() {
        let mut cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        cfg.probes_per_frame = 40;
        assert!(cfg.validate().is_err());
        cfg.probes_per_frame = 1;
        cfg.noise_std = 0.0;
        assert!(cfg.validate().is_err());
    }
}
