//! Closed-loop trackers and their evaluation.
//!
//! Frame `k` serves data on the beam chosen from measurements up to frame
//! `k - 1`; frame 0 uses the initial sweep. The probes taken at the end of
//! frame `k` see channel state `k` and decide the beam of frame `k + 1`.

use std::collections::VecDeque;
use std::io::Write;
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{measure, Codebook};
use crate::dataset::{probe_bins, FeatureWindow, RunningSpectrum};
use crate::error::{invalid, Error, Result};
use crate::framing::{instantaneous_rate, FrameKind};
use crate::particle_filter::{pf_init, pf_step, PfConfig};
use crate::rnn::{predict_offset, RnnNetwork};
use crate::scenario::{initial_sweep, probe_time, Realization, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackerKind {
    Oracle,
    Pf,
    Rnn,
}

impl TrackerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TrackerKind::Oracle => "oracle",
            TrackerKind::Pf => "pf",
            TrackerKind::Rnn => "rnn",
        }
    }

    pub fn id(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult {
    pub tracker: TrackerKind,
    pub theta_true_deg: Vec<f64>,
    pub theta_hat_deg: Vec<f64>,
    pub frame_kinds: Vec<FrameKind>,
    pub rates: Vec<f64>,
    /// Frames that ran a fresh full sweep after the trigger fired.
    pub reacquisitions: Vec<usize>,
    /// PF steps at which every particle had vanishing likelihood.
    pub divergences: Vec<usize>,
}

impl TrackResult {
    fn new(tracker: TrackerKind, n: usize) -> Self {
        Self {
            tracker,
            theta_true_deg: Vec::with_capacity(n),
            theta_hat_deg: Vec::with_capacity(n),
            frame_kinds: Vec::with_capacity(n),
            rates: Vec::with_capacity(n),
            reacquisitions: Vec::new(),
            divergences: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.theta_true_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_true_deg.is_empty()
    }

    pub fn squared_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.theta_hat_deg
            .iter()
            .zip(&self.theta_true_deg)
            .map(|(h, t)| (h - t).powi(2))
    }
}

struct Recorder<'a> {
    cfg: &'a ScenarioConfig,
    cb: &'a Codebook,
    real: &'a Realization,
    out: TrackResult,
    probes: usize,
}

impl Recorder<'_> {
    fn push(&mut self, k: usize, theta_hat: f64, kind: FrameKind) -> Result<()> {
        let state = &self.real.states[k];
        let frame = self.cfg.frame_config(self.probes);
        let rate = instantaneous_rate(
            state,
            theta_hat,
            kind,
            &frame,
            self.cfg.rate_params(),
            self.real.times_s[k],
            self.cb,
        )?;
        self.out.theta_true_deg.push(state.theta_deg);
        self.out.theta_hat_deg.push(theta_hat);
        self.out.frame_kinds.push(kind);
        self.out.rates.push(rate);
        Ok(())
    }
}

fn check_nonempty(real: &Realization) -> Result<()> {
    if real.is_empty() {
        return Err(Error::Empty("realization"));
    }
    Ok(())
}

/// Knows the true AoD and serves the nearest beam, but pays for a full sweep every frame.
pub fn track_oracle(real: &Realization, cb: &Codebook, cfg: &ScenarioConfig) -> Result<TrackResult> {
    check_nonempty(real)?;
    let mut rec = Recorder {
        cfg,
        cb,
        real,
        out: TrackResult::new(TrackerKind::Oracle, real.len()),
        probes: cfg.probes_per_frame,
    };
    for (k, s) in real.states.iter().enumerate() {
        rec.push(k, cb.nearest_angle(s.theta_deg), FrameKind::Initialization)?;
    }
    Ok(rec.out)
}

/// Particle filter probing one beam (the one nearest its estimate) per frame.
pub fn track_pf<R: Rng + ?Sized>(
    real: &Realization,
    cb: &Codebook,
    pf_cfg: &PfConfig,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<TrackResult> {
    check_nonempty(real)?;
    let mut rec = Recorder {
        cfg,
        cb,
        real,
        out: TrackResult::new(TrackerKind::Pf, real.len()),
        probes: 1,
    };
    let frame = cfg.frame_config(1);
    let period = real.frame_period_s;
    let spectrum = initial_sweep(&real.states[0], cb, &frame, cfg.noise_std, real.times_s[0], period, rng)?;
    let mut ps = pf_init(pf_cfg, &spectrum, cb, rng)?;
    let mut theta_hat = cb.angle(spectrum.main_index());
    for k in 0..real.len() {
        let kind = if k == 0 {
            FrameKind::Initialization
        } else {
            FrameKind::Secondary
        };
        rec.push(k, theta_hat, kind)?;
        let beam = cb.vector(cb.nearest_index(theta_hat));
        let t = probe_time(&frame, kind, real.times_s[k], period, 0, 1);
        let z = measure(cb.geometry(), &real.states[k], beam, cfg.noise_std, t, rng)?;
        let (next, est) = pf_step(ps, z, beam, pf_cfg, cfg.noise_std, cb.geometry(), rng)?;
        ps = next;
        if est.diverged {
            rec.out.divergences.push(k);
        }
        theta_hat = est.theta_hat_deg.clamp(cb.angle(0), cb.angle(cb.len() - 1));
    }
    Ok(rec.out)
}

/// Main-beam power collapse detector: fires when the mean of the last
/// `SHORT` magnitudes drops below `RATIO` times the median of the last `LONG`.
#[derive(Debug, Clone, Default)]
pub struct ReacquisitionTrigger {
    history: VecDeque<f64>,
}

impl ReacquisitionTrigger {
    pub const SHORT: usize = 3;
    pub const LONG: usize = 10;
    pub const RATIO: f64 = 0.25;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }

    /// Records `|z_m|` and reports whether the trigger fires.
    pub fn observe(&mut self, magnitude: f64) -> bool {
        self.history.push_back(magnitude);
        if self.history.len() > Self::LONG {
            self.history.pop_front();
        }
        if self.history.len() < Self::SHORT {
            return false;
        }
        let n = self.history.len();
        let short = self.history.iter().skip(n - Self::SHORT).sum::<f64>() / Self::SHORT as f64;
        let mut sorted: Vec<f64> = self.history.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        short < Self::RATIO * median
    }
}

/// Sliding-window RNN tracker with power-collapse re-acquisition.
///
/// A trigger raised by the probes of frame `k` schedules a full sweep in
/// frame `k + 1`, which is then charged Initialization overhead.
pub fn track_rnn<R: Rng + ?Sized>(
    real: &Realization,
    cb: &Codebook,
    net: &RnnNetwork,
    cfg: &ScenarioConfig,
    context_len: usize,
    rng: &mut R,
) -> Result<TrackResult> {
    check_nonempty(real)?;
    let l = cfg.half_width;
    let p = cfg.probes_per_frame;
    if net.input_dim() != 2 * l + 1 || net.output_dim() != 2 * l + 1 {
        return Err(Error::DimensionMismatch {
            expected: 2 * l + 1,
            actual: net.input_dim(),
        });
    }
    if context_len == 0 {
        return Err(invalid("context_len", "must be >= 1"));
    }
    let mut rec = Recorder {
        cfg,
        cb,
        real,
        out: TrackResult::new(TrackerKind::Rnn, real.len()),
        probes: p,
    };
    let frame = cfg.frame_config(p);
    let period = real.frame_period_s;
    let g = cb.len();

    let mut trigger = ReacquisitionTrigger::new();
    let mut context: VecDeque<FeatureWindow> = VecDeque::with_capacity(context_len);
    let mut running: Option<RunningSpectrum> = None;
    let mut m = 0usize;
    let mut sweep_now = true;
    for k in 0..real.len() {
        let state = &real.states[k];
        let kind = if sweep_now {
            let spec = initial_sweep(state, cb, &frame, cfg.noise_std, real.times_s[k], period, rng)?;
            m = spec.main_index();
            running = Some(RunningSpectrum::new(&spec));
            context.clear();
            trigger.reset();
            if k > 0 {
                rec.out.reacquisitions.push(k);
            }
            sweep_now = false;
            FrameKind::Initialization
        } else {
            FrameKind::Secondary
        };
        rec.push(k, cb.angle(m), kind)?;

        let spectrum = running.as_mut().expect("initialised by the first sweep");
        for (j, bin) in probe_bins(m, p, g).enumerate() {
            let t = probe_time(&frame, kind, real.times_s[k], period, j, p);
            let z = measure(cb.geometry(), state, cb.vector(bin), cfg.noise_std, t, rng)?;
            spectrum.update(bin, z)?;
        }
        if context.len() == context_len {
            context.pop_front();
        }
        context.push_back(spectrum.window(m, l)?);
        if trigger.observe(spectrum.value(m).norm()) {
            sweep_now = true;
            continue;
        }
        let window: Vec<FeatureWindow> = context.iter().cloned().collect();
        let offset = predict_offset(net, &window)?;
        m = (m as i64 + offset).clamp(0, g as i64 - 1) as usize;
    }
    Ok(rec.out)
}

/// Default evaluation segments over the 98-frame arc (0-based, half-open).
pub fn default_segments(frames: usize) -> Vec<Range<usize>> {
    let cut = |a: usize| a.min(frames);
    vec![0..cut(42), cut(42)..cut(59), cut(59)..frames]
}

/// The high-curvature stretch, frames 20 to 60 counted from 1.
pub fn high_curvature_frames(frames: usize) -> Range<usize> {
    19.min(frames)..60.min(frames)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerSummary {
    pub tracker: TrackerKind,
    pub runs: usize,
    pub mse_deg2: f64,
    pub mean_rate: f64,
    pub segment_mse_deg2: Vec<f64>,
    pub mean_theta_hat_deg: Vec<f64>,
    pub mean_rate_per_frame: Vec<f64>,
    pub reacquisitions: usize,
}

fn check_runs(results: &[&TrackResult]) -> Result<usize> {
    let first = results.first().ok_or(Error::Empty("results"))?;
    let n = first.len();
    if n == 0 {
        return Err(Error::Empty("frames"));
    }
    for r in results {
        if r.len() != n || r.rates.len() != n || r.theta_hat_deg.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: r.len(),
            });
        }
    }
    Ok(n)
}

/// Mean squared angle error over `frames`, pooled across runs.
pub fn mse_over(results: &[&TrackResult], frames: Range<usize>) -> Result<f64> {
    check_runs(results)?;
    if frames.is_empty() {
        return Err(Error::Empty("frame range"));
    }
    let total: f64 = results
        .iter()
        .map(|r| r.squared_errors().skip(frames.start).take(frames.len()).sum::<f64>())
        .sum();
    Ok(total / (results.len() * frames.len()) as f64)
}

pub fn mean_rate_over(results: &[&TrackResult], frames: Range<usize>) -> Result<f64> {
    check_runs(results)?;
    if frames.is_empty() {
        return Err(Error::Empty("frame range"));
    }
    let total: f64 = results
        .iter()
        .map(|r| r.rates[frames.clone()].iter().sum::<f64>())
        .sum();
    Ok(total / (results.len() * frames.len()) as f64)
}

/// Per-frame mean of a series across runs.
fn per_frame_mean(results: &[&TrackResult], pick: impl Fn(&TrackResult) -> &[f64]) -> Vec<f64> {
    let n = results[0].len();
    (0..n)
        .map(|k| results.iter().map(|r| pick(r)[k]).sum::<f64>() / results.len() as f64)
        .collect()
}

/// Per-frame average of grid estimates across runs, rounded back onto the grid.
pub fn binned_average(results: &[&TrackResult], cb: &Codebook) -> Result<Vec<f64>> {
    check_runs(results)?;
    Ok(per_frame_mean(results, |r| &r.theta_hat_deg)
        .into_iter()
        .map(|m| cb.nearest_angle(m.clamp(cb.angle(0), cb.angle(cb.len() - 1))))
        .collect())
}

pub fn evaluate(results: &[&TrackResult], segments: &[Range<usize>]) -> Result<TrackerSummary> {
    let n = check_runs(results)?;
    let tracker = results[0].tracker;
    if results.iter().any(|r| r.tracker != tracker) {
        return Err(invalid("results", "mixed trackers in one summary"));
    }
    Ok(TrackerSummary {
        tracker,
        runs: results.len(),
        mse_deg2: mse_over(results, 0..n)?,
        mean_rate: mean_rate_over(results, 0..n)?,
        segment_mse_deg2: segments
            .iter()
            .map(|s| mse_over(results, s.clone()))
            .collect::<Result<_>>()?,
        mean_theta_hat_deg: per_frame_mean(results, |r| &r.theta_hat_deg),
        mean_rate_per_frame: per_frame_mean(results, |r| &r.rates),
        reacquisitions: results.iter().map(|r| r.reacquisitions.len()).sum(),
    })
}

pub const TRACK_CSV_COLUMNS: [&str; 8] = [
    "realization",
    "frame",
    "tracker",
    "theta_true",
    "theta_hat",
    "rate",
    "frame_kind",
    "reacq_flag",
];

/// `# ` comment lines followed by one row per (realization, tracker, frame).
pub fn write_tracks_csv<W: Write>(
    mut out: W,
    rows: &[(usize, &TrackResult)],
    comments: &[String],
) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACK_CSV_COLUMNS)?;
    for (realization, r) in rows {
        for k in 0..r.len() {
            let reacq = r.reacquisitions.contains(&k) as u8;
            w.write_record([
                realization.to_string(),
                k.to_string(),
                r.tracker.as_str().to_string(),
                r.theta_true_deg[k].to_string(),
                r.theta_hat_deg[k].to_string(),
                r.rates[k].to_string(),
                r.frame_kinds[k].as_str().to_string(),
                reacq.to_string(),
            ])?;
        }
    }
    w.flush()
}

fn parse_tracker(s: &str) -> Option<TrackerKind> {
    [TrackerKind::Oracle, TrackerKind::Pf, TrackerKind::Rnn]
        .into_iter()
        .find(|k| k.as_str() == s)
}

fn parse_frame_kind(s: &str) -> Option<FrameKind> {
    [FrameKind::Initialization, FrameKind::Secondary]
        .into_iter()
        .find(|k| k.as_str() == s)
}

/// Reads a file written by [`write_tracks_csv`]. Rows come back grouped per
/// (realization, tracker) in order of first appearance. PF divergence frames
/// are not stored in the file and come back empty.
pub fn read_tracks_csv<R: std::io::Read>(input: R) -> Result<Vec<(usize, TrackResult)>> {
    let err = |m: String| Error::TrackFormat(m);
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.iter().ne(TRACK_CSV_COLUMNS) {
        return Err(err(format!("unexpected columns {headers:?}")));
    }
    let mut out: Vec<(usize, TrackResult)> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let bad = |what: &str| err(format!("row {}: bad {what}", line + 1));
        let realization: usize = rec[0].parse().map_err(|_| bad("realization"))?;
        let frame: usize = rec[1].parse().map_err(|_| bad("frame"))?;
        let tracker = parse_tracker(&rec[2]).ok_or_else(|| bad("tracker"))?;
        let num = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what));
        let (truth, hat, rate) = (num(3, "theta_true")?, num(4, "theta_hat")?, num(5, "rate")?);
        let kind = parse_frame_kind(&rec[6]).ok_or_else(|| bad("frame_kind"))?;
        let reacq = match &rec[7] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("reacq_flag")),
        };
        let idx = match out.iter().position(|(r, t)| *r == realization && t.tracker == tracker) {
            Some(i) => i,
            None => {
                out.push((realization, TrackResult::new(tracker, 0)));
                out.len() - 1
            }
        };
        let res = &mut out[idx].1;
        if frame != res.len() {
            return Err(bad("frame order"));
        }
        res.theta_true_deg.push(truth);
        res.theta_hat_deg.push(hat);
        res.rates.push(rate);
        res.frame_kinds.push(kind);
        if reacq {
            res.reacquisitions.push(frame);
        }
    }
    Ok(out)
}
