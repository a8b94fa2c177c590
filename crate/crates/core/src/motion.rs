//! Synthetic UE trajectories and their mapping onto per-frame LoS channel states.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{invalid, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const JUNCTION_TOLERANCE_M: f64 = 1e-6;

/// From `fraction` of the segment length onward the UE moves at `speed_mps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedChange {
    pub fraction: f64,
    pub speed_mps: f64,
}

impl SpeedChange {
    pub fn new(fraction: f64, speed_mps: f64) -> Self {
        Self { fraction, speed_mps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    /// Arc traversed from `start_angle_deg` to `end_angle_deg` (counterclockwise
    /// when the end angle is larger).
    CircularArc {
        center_m: [f64; 2],
        radius_m: f64,
        start_angle_deg: f64,
        end_angle_deg: f64,
        speed_profile: Vec<SpeedChange>,
    },
    Line {
        start_m: [f64; 2],
        end_m: [f64; 2],
        speed_profile: Vec<SpeedChange>,
    },
}

impl Segment {
    pub fn length_m(&self) -> f64 {
        match self {
            Segment::CircularArc {
                radius_m,
                start_angle_deg,
                end_angle_deg,
                ..
            } => radius_m * (end_angle_deg - start_angle_deg).abs().to_radians(),
            Segment::Line { start_m, end_m, .. } => distance(*start_m, *end_m),
        }
    }

    fn speed_profile(&self) -> &[SpeedChange] {
        match self {
            Segment::CircularArc { speed_profile, .. } | Segment::Line { speed_profile, .. } => speed_profile,
        }
    }

    /// Position after travelling `s` metres along the segment.
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        let len = self.length_m();
        let frac = if len > 0.0 { (s / len).clamp(0.0, 1.0) } else { 0.0 };
        match self {
            Segment::CircularArc {
                center_m,
                radius_m,
                start_angle_deg,
                end_angle_deg,
                ..
            } => {
                let a = (start_angle_deg + frac * (end_angle_deg - start_angle_deg)).to_radians();
                [center_m[0] + radius_m * a.cos(), center_m[1] + radius_m * a.sin()]
            }
            Segment::Line { start_m, end_m, .. } => [
                start_m[0] + frac * (end_m[0] - start_m[0]),
                start_m[1] + frac * (end_m[1] - start_m[1]),
            ],
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if let Segment::CircularArc {
            radius_m,
            start_angle_deg,
            end_angle_deg,
            center_m,
            ..
        } = self
        {
            if !(*radius_m > 0.0) || !radius_m.is_finite() {
                return Err(Error::InvalidTrajectory(format!(
                    "segment {index}: radius must be positive, got {radius_m}"
                )));
            }
            if !start_angle_deg.is_finite() || !end_angle_deg.is_finite() || !all_finite(center_m) {
                return Err(Error::InvalidTrajectory(format!("segment {index}: non-finite arc")));
            }
        }
        if let Segment::Line { start_m, end_m, .. } = self {
            if !all_finite(start_m) || !all_finite(end_m) {
                return Err(Error::InvalidTrajectory(format!("segment {index}: non-finite line")));
            }
        }
        if !(self.length_m() > 0.0) {
            return Err(Error::InvalidTrajectory(format!("segment {index} has zero length")));
        }
        let profile = self.speed_profile();
        if profile.is_empty() {
            return Err(Error::InvalidTrajectory(format!(
                "segment {index}: empty speed profile"
            )));
        }
        if profile[0].fraction != 0.0 {
            return Err(Error::InvalidTrajectory(format!(
                "segment {index}: speed profile must start at fraction 0"
            )));
        }
        for (k, change) in profile.iter().enumerate() {
            if !(0.0..=1.0).contains(&change.fraction) {
                return Err(Error::InvalidTrajectory(format!(
                    "segment {index}: fraction {} outside [0, 1]",
                    change.fraction
                )));
            }
            if !(change.speed_mps > 0.0) || !change.speed_mps.is_finite() {
                return Err(Error::InvalidTrajectory(format!(
                    "segment {index}: speed must be positive, got {}",
                    change.speed_mps
                )));
            }
            if k > 0 && change.fraction < profile[k - 1].fraction {
                return Err(Error::InvalidTrajectory(format!(
                    "segment {index}: fractions must be nondecreasing"
                )));
            }
        }
        Ok(())
    }
}

fn all_finite(p: &[f64; 2]) -> bool {
    p[0].is_finite() && p[1].is_finite()
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub frame_period_s: f64,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub positions_m: Vec<[f64; 2]>,
    pub times_s: Vec<f64>,
    pub frame_period_s: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.positions_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions_m.is_empty()
    }

    /// Same trajectory rotated by `angle_deg` about `pivot`.
    pub fn rotated_about(&self, pivot: [f64; 2], angle_deg: f64) -> Trajectory {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let positions_m = self
            .positions_m
            .iter()
            .map(|p| {
                let dx = p[0] - pivot[0];
                let dy = p[1] - pivot[1];
                [pivot[0] + c * dx - s * dy, pivot[1] + s * dx + c * dy]
            })
            .collect();
        Trajectory {
            positions_m,
            times_s: self.times_s.clone(),
            frame_period_s: self.frame_period_s,
        }
    }
}

/// A stretch of constant speed inside one segment.
struct Piece {
    segment: usize,
    s_start: f64,
    speed: f64,
    t_start: f64,
    t_end: f64,
}

/// Samples the UE position once per frame, walking each segment at its
/// piecewise-constant speed.
pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<Trajectory> {
    if !(spec.frame_period_s > 0.0) || !spec.frame_period_s.is_finite() {
        return Err(invalid(
            "frame_period_s",
            format!("must be positive, got {}", spec.frame_period_s),
        ));
    }
    if spec.segments.is_empty() {
        return Err(Error::InvalidTrajectory("no segments".into()));
    }
    for (i, seg) in spec.segments.iter().enumerate() {
        seg.validate(i)?;
    }
    for (i, pair) in spec.segments.windows(2).enumerate() {
        let end = pair[0].point_at(pair[0].length_m());
        let start = pair[1].point_at(0.0);
        let gap = distance(end, start);
        if gap > JUNCTION_TOLERANCE_M {
            return Err(Error::InvalidTrajectory(format!(
                "gap of {gap} m between segments {i} and {}",
                i + 1
            )));
        }
    }

    let mut pieces = Vec::new();
    let mut t = 0.0;
    for (si, seg) in spec.segments.iter().enumerate() {
        let len = seg.length_m();
        let profile = seg.speed_profile();
        for (k, change) in profile.iter().enumerate() {
            let f_end = profile.get(k + 1).map_or(1.0, |c| c.fraction);
            let dist = (f_end - change.fraction) * len;
            if dist <= 0.0 {
                continue;
            }
            let dt = dist / change.speed_mps;
            pieces.push(Piece {
                segment: si,
                s_start: change.fraction * len,
                speed: change.speed_mps,
                t_start: t,
                t_end: t + dt,
            });
            t += dt;
        }
    }
    let total = t;
    let dt = spec.frame_period_s;
    let frames = (total / dt + 1e-9).floor() as usize + 1;

    let mut positions_m = Vec::with_capacity(frames);
    let mut times_s = Vec::with_capacity(frames);
    let mut cursor = 0;
    for k in 0..frames {
        let tk = k as f64 * dt;
        while cursor + 1 < pieces.len() && tk > pieces[cursor].t_end {
            cursor += 1;
        }
        let piece = &pieces[cursor];
        let seg = &spec.segments[piece.segment];
        let s = piece.s_start + piece.speed * (tk - piece.t_start).min(piece.t_end - piece.t_start);
        positions_m.push(seg.point_at(s));
        times_s.push(tk);
    }
    Ok(Trajectory {
        positions_m,
        times_s,
        frame_period_s: dt,
    })
}

/// Large-scale link parameters used to turn positions into path gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub bs_position_m: [f64; 2],
    pub carrier_hz: f64,
    /// `|alpha|` at `ref_distance_m`.
    pub ref_gain: f64,
    pub ref_distance_m: f64,
    pub pathloss_exponent: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0) {
            return Err(invalid("carrier_hz", "must be positive"));
        }
        if !(self.ref_distance_m > 0.0) {
            return Err(invalid("ref_distance_m", "must be positive"));
        }
        if !(self.pathloss_exponent >= 0.0) {
            return Err(invalid("pathloss_exponent", "must be >= 0"));
        }
        if !(self.ref_gain > 0.0) {
            return Err(invalid("ref_gain", "must be positive"));
        }
        Ok(())
    }

    pub fn gain_at(&self, distance_m: f64) -> f64 {
        self.ref_gain * (self.ref_distance_m / distance_m).powf(self.pathloss_exponent / 2.0)
    }

    /// Broadside-relative bearing of `p` seen from the BS. The array lies
    /// along the x axis and broadside points toward +y.
    pub fn bearing_deg(&self, p: [f64; 2]) -> f64 {
        let dx = p[0] - self.bs_position_m[0];
        let dy = p[1] - self.bs_position_m[1];
        dx.atan2(dy).to_degrees()
    }
}

/// Per-frame LoS parameters along `traj`. `global_phase_rad` is the
/// realization's constant phase of `alpha`.
pub fn to_channel_states(traj: &Trajectory, budget: &LinkBudget, global_phase_rad: f64) -> Result<Vec<ChannelState>> {
    if traj.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    budget.validate()?;
    let ranges: Vec<f64> = traj
        .positions_m
        .iter()
        .map(|p| distance(*p, budget.bs_position_m))
        .collect();
    if let Some(k) = ranges.iter().position(|d| *d == 0.0) {
        return Err(Error::ZeroDistance(k));
    }
    let n = ranges.len();
    let dt = traj.frame_period_s;
    let range_rate = |k: usize| -> f64 {
        if n < 2 {
            0.0
        } else if k == 0 {
            (ranges[1] - ranges[0]) / dt
        } else if k == n - 1 {
            (ranges[n - 1] - ranges[n - 2]) / dt
        } else {
            (ranges[k + 1] - ranges[k - 1]) / (2.0 * dt)
        }
    };
    let phase = Complex64::from_polar(1.0, global_phase_rad.rem_euclid(2.0 * PI));
    (0..n)
        .map(|k| {
            let d = ranges[k];
            let alpha = phase * budget.gain_at(d);
            let doppler = -range_rate(k) * budget.carrier_hz / SPEED_OF_LIGHT;
            ChannelState::new(
                budget.bearing_deg(traj.positions_m[k]),
                alpha,
                doppler,
                d / SPEED_OF_LIGHT,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(start: [f64; 2], end: [f64; 2], profile: Vec<SpeedChange>) -> Segment {
        Segment::Line {
            start_m: start,
            end_m: end,
            speed_profile: profile,
        }
    }

    fn budget() -> LinkBudget {
        LinkBudget {
            bs_position_m: [0.0, 0.0],
            carrier_hz: 28e9,
            ref_gain: 1.0,
            ref_distance_m: 10.0,
            pathloss_exponent: 2.0,
        }
    }

    #[test]
    fn straight_line_at_unit_speed() {
        let spec = TrajectorySpec {
            frame_period_s: 1.0,
            segments: vec![line([0.0, 0.0], [10.0, 0.0], vec![SpeedChange::new(0.0, 1.0)])],
        };
        let traj = generate_trajectory(&spec).unwrap();
        assert_eq!(traj.len(), 11);
        for (k, p) in traj.positions_m.iter().enumerate() {
            assert!((p[0] - k as f64).abs() < 1e-12);
            assert_eq!(traj.times_s[k], k as f64);
        }
    }

    #[test]
    fn arc_stays_on_circle() {
        let spec = TrajectorySpec {
            frame_period_s: 0.1,
            segments: vec![Segment::CircularArc {
                center_m: [3.0, -2.0],
                radius_m: 70.0,
                start_angle_deg: 0.0,
                end_angle_deg: 360.0,
                speed_profile: vec![SpeedChange::new(0.0, 12.0)],
            }],
        };
        let traj = generate_trajectory(&spec).unwrap();
        assert!(traj.len() > 300);
        for p in &traj.positions_m {
            assert!((distance(*p, [3.0, -2.0]) - 70.0).abs() < 1e-9);
        }
    }

    #[test]
    fn speed_change_doubles_spacing() {
        // Arc-length bookkeeping: 10 m at 1 m/s, then 10 m at 2 m/s.
        let spec = TrajectorySpec {
            frame_period_s: 1.0,
            segments: vec![line(
                [0.0, 0.0],
                [20.0, 0.0],
                vec![SpeedChange::new(0.0, 1.0), SpeedChange::new(0.5, 2.0)],
            )],
        };
        let traj = generate_trajectory(&spec).unwrap();
        assert_eq!(traj.len(), 16);
        for (k, p) in traj.positions_m.iter().enumerate() {
            let s = if k <= 10 {
                k as f64
            } else {
                10.0 + 2.0 * (k as f64 - 10.0)
            };
            assert!((p[0] - s).abs() < 1e-9, "frame {k}: {} vs {s}", p[0]);
        }
        let steps: Vec<f64> = traj.positions_m.windows(2).map(|w| w[1][0] - w[0][0]).collect();
        assert!(steps[..10].iter().all(|s| (s - 1.0).abs() < 1e-9));
        assert!(steps[10..].iter().all(|s| (s - 2.0).abs() < 1e-9));
    }

    #[test]
    fn segments_join_continuously() {
        let spec = TrajectorySpec {
            frame_period_s: 0.5,
            segments: vec![
                line([0.0, 0.0], [5.0, 0.0], vec![SpeedChange::new(0.0, 1.0)]),
                line([5.0, 0.0], [5.0, 5.0], vec![SpeedChange::new(0.0, 1.0)]),
            ],
        };
        let traj = generate_trajectory(&spec).unwrap();
        assert_eq!(traj.len(), 21);
        assert!((traj.positions_m[10][0] - 5.0).abs() < 1e-12);
        assert!((traj.positions_m[20][1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_discontinuous_junction() {
        let spec = TrajectorySpec {
            frame_period_s: 1.0,
            segments: vec![
                line([0.0, 0.0], [5.0, 0.0], vec![SpeedChange::new(0.0, 1.0)]),
                line([5.0, 0.001], [5.0, 5.0], vec![SpeedChange::new(0.0, 1.0)]),
            ],
        };
        assert!(matches!(generate_trajectory(&spec), Err(Error::InvalidTrajectory(_))));
    }

    #[test]
    fn rejects_bad_profiles() {
        let bad = |profile: Vec<SpeedChange>| TrajectorySpec {
            frame_period_s: 1.0,
            segments: vec![line([0.0, 0.0], [5.0, 0.0], profile)],
        };
        assert!(generate_trajectory(&bad(vec![])).is_err());
        assert!(generate_trajectory(&bad(vec![SpeedChange::new(0.0, 0.0)])).is_err());
        assert!(generate_trajectory(&bad(vec![SpeedChange::new(0.2, 1.0)])).is_err());
        assert!(generate_trajectory(&bad(vec![
            SpeedChange::new(0.0, 1.0),
            SpeedChange::new(0.6, 1.0),
            SpeedChange::new(0.4, 1.0)
        ]))
        .is_err());
        let arc = TrajectorySpec {
            frame_period_s: 1.0,
            segments: vec![Segment::CircularArc {
                center_m: [0.0, 0.0],
                radius_m: 0.0,
                start_angle_deg: 0.0,
                end_angle_deg: 90.0,
                speed_profile: vec![SpeedChange::new(0.0, 1.0)],
            }],
        };
        assert!(generate_trajectory(&arc).is_err());
    }

    fn trajectory(points: Vec<[f64; 2]>, dt: f64) -> Trajectory {
        let times_s = (0..points.len()).map(|k| k as f64 * dt).collect();
        Trajectory {
            positions_m: points,
            times_s,
            frame_period_s: dt,
        }
    }

    #[test]
    fn broadside_bearing_is_zero() {
        let traj = trajectory(vec![[0.0, 5.0], [0.0, 50.0], [0.0, 500.0]], 1.0);
        for s in to_channel_states(&traj, &budget(), 0.3).unwrap() {
            assert!(s.theta_deg.abs() < 1e-12);
        }
    }

    #[test]
    fn bearing_sign_follows_x_offset() {
        let traj = trajectory(vec![[10.0, 10.0], [-10.0, 10.0]], 1.0);
        let s = to_channel_states(&traj, &budget(), 0.0).unwrap();
        assert!((s[0].theta_deg - 45.0).abs() < 1e-12);
        assert!((s[1].theta_deg + 45.0).abs() < 1e-12);
    }

    #[test]
    fn circling_the_bs_has_no_doppler() {
        let points = (0..40)
            .map(|k| {
                let a = (-60.0 + 3.0 * k as f64).to_radians();
                [30.0 * a.sin(), 30.0 * a.cos()]
            })
            .collect();
        let traj = trajectory(points, 0.1);
        for s in to_channel_states(&traj, &budget(), 0.0).unwrap() {
            assert!(s.doppler_hz.abs() < 1e-6);
            assert!((s.delay_s - 30.0 / SPEED_OF_LIGHT).abs() < 1e-18);
        }
    }

    #[test]
    fn radial_approach_doppler() {
        let points = (0..10).map(|k| [0.0, 100.0 - 1.5 * k as f64]).collect();
        let traj = trajectory(points, 0.1);
        let want = 15.0 * 28e9 / SPEED_OF_LIGHT;
        for s in to_channel_states(&traj, &budget(), 0.0).unwrap() {
            assert!((s.doppler_hz - want).abs() < 1e-6);
        }
        assert!((want - 1400.0).abs() < 2.0);
    }

    #[test]
    fn rejects_ue_at_bs() {
        let traj = trajectory(vec![[1.0, 1.0], [0.0, 0.0]], 1.0);
        assert_eq!(to_channel_states(&traj, &budget(), 0.0), Err(Error::ZeroDistance(1)));
    }

    #[test]
    fn rotation_preserves_range() {
        let traj = trajectory(vec![[3.0, 4.0], [6.0, 8.0]], 1.0);
        let r = traj.rotated_about([0.0, 0.0], 17.0);
        for (a, b) in traj.positions_m.iter().zip(&r.positions_m) {
            assert!((distance(*a, [0.0, 0.0]) - distance(*b, [0.0, 0.0])).abs() < 1e-12);
        }
        let s0 = to_channel_states(&traj, &budget(), 0.0).unwrap();
        let s1 = to_channel_states(&r, &budget(), 0.0).unwrap();
        // Positive rotation is counterclockwise, which lowers the bearing.
        assert!((s0[0].theta_deg - s1[0].theta_deg - 17.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn gain_nonincreasing_in_distance(d1 in 0.1f64..1000.0, d2 in 0.1f64..1000.0, exp in 0.0f64..4.0) {
            let b = LinkBudget { pathloss_exponent: exp, ..budget() };
            let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(b.gain_at(near) >= b.gain_at(far));
        }
    }
}
