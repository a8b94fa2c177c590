//! Sliding-window features and one-hot labels for the recurrent tracker.
//!
//! The running spectrum starts as the initial beam sweep and is refreshed
//! each frame only at the bins probed around the main beam; the other bins
//! keep their last measured value.

use std::io::{Read, Write};
use std::ops::Range;

use num_complex::Complex64;

use crate::channel::PseudoSpectrum;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub values: Vec<f64>,
    pub center_grid_index: usize,
    pub half_width: usize,
}

impl FeatureWindow {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One-hot vector over the `2L+1` window positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    hot: usize,
    len: usize,
}

impl LabelVector {
    pub fn new(hot: usize, len: usize) -> Result<Self> {
        if hot >= len {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: hot,
            });
        }
        Ok(Self { hot, len })
    }

    pub fn position(&self) -> usize {
        self.hot
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len];
        v[self.hot] = 1.0;
        v
    }

    /// Signed grid offset encoded by the label.
    pub fn offset(&self) -> i64 {
        self.hot as i64 - (self.len as i64 - 1) / 2
    }
}

/// Max-normalised magnitudes over bins `[m - L, m + L]`, zero-padded outside the grid.
pub fn window_from_magnitudes(magnitudes: &[f64], m: usize, half_width: usize) -> Result<FeatureWindow> {
    let g = magnitudes.len();
    if half_width >= g {
        return Err(invalid(
            "half_width",
            format!("L = {half_width} must be below the grid size {g}"),
        ));
    }
    if m >= g {
        return Err(invalid("main_index", format!("{m} outside grid of {g}")));
    }
    let len = 2 * half_width + 1;
    let mut values = vec![0.0; len];
    for (j, v) in values.iter_mut().enumerate() {
        let bin = m as i64 + j as i64 - half_width as i64;
        if (0..g as i64).contains(&bin) {
            *v = magnitudes[bin as usize];
        }
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 1.0 };
    values.iter_mut().for_each(|v| *v *= scale);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("spectrum", "non-finite magnitude in window"));
    }
    Ok(FeatureWindow {
        values,
        center_grid_index: m,
        half_width,
    })
}

pub fn extract_window(spectrum: &PseudoSpectrum, m: usize, half_width: usize) -> Result<FeatureWindow> {
    window_from_magnitudes(&spectrum.magnitudes(), m, half_width)
}

/// One-hot target for a main-beam move from `m_now` to `m_next`, clamped to the window edge.
pub fn make_label(m_now: usize, m_next: usize, half_width: usize) -> LabelVector {
    let d = m_next as i64 - m_now as i64;
    let l = half_width as i64;
    let pos = if d.abs() <= l { l + d } else { l + d.signum() * l };
    LabelVector {
        hot: pos as usize,
        len: 2 * half_width + 1,
    }
}

/// The `p` grid bins nearest `m` (ties toward the lower index), shifted inward at the grid edges.
pub fn probe_bins(m: usize, probes: usize, grid: usize) -> Range<usize> {
    let probes = probes.min(grid);
    let start = (m as i64 - (probes / 2) as i64).clamp(0, (grid - probes) as i64) as usize;
    start..start + probes
}

/// Persistent copy of the pseudo-spectrum, refreshed bin by bin.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningSpectrum {
    values: Vec<Complex64>,
    magnitudes: Vec<f64>,
}

impl RunningSpectrum {
    pub fn new(initial: &PseudoSpectrum) -> Self {
        Self {
            values: initial.values().to_vec(),
            magnitudes: initial.magnitudes(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn update(&mut self, bin: usize, z: Complex64) -> Result<()> {
        if bin >= self.values.len() {
            return Err(invalid("bin", format!("{bin} outside grid of {}", self.values.len())));
        }
        self.values[bin] = z;
        self.magnitudes[bin] = z.norm();
        Ok(())
    }

    pub fn window(&self, m: usize, half_width: usize) -> Result<FeatureWindow> {
        window_from_magnitudes(&self.magnitudes, m, half_width)
    }

    pub fn value(&self, bin: usize) -> Complex64 {
        self.values[bin]
    }
}

/// What the UE observed in one frame of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    /// Codebook index nearest the true angle.
    pub true_index: usize,
    /// Beam the probes were centered on; the window is cut around it and the
    /// label points from it to the next frame's `true_index`.
    pub beam_index: usize,
    /// Secondary probes `(bin, measurement)` taken around `beam_index`.
    pub probes: Vec<(usize, Complex64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRun {
    pub initial: PseudoSpectrum,
    pub frames: Vec<FrameObservation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub features: Vec<FeatureWindow>,
    pub labels: Vec<LabelVector>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sequences: Vec<Sequence>,
    pub half_width: usize,
    pub probes_per_frame: usize,
}

impl Dataset {
    pub fn window_len(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn pair_count(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }
}

/// Feature/label pairs for every frame that has a successor.
pub fn generate_dataset(runs: &[MeasurementRun], half_width: usize, probes: usize) -> Result<Dataset> {
    let window = 2 * half_width + 1;
    if probes > window {
        return Err(invalid(
            "probes_per_frame",
            format!("{probes} probes exceed the window of {window} bins"),
        ));
    }
    let mut sequences = Vec::with_capacity(runs.len());
    for run in runs {
        if run.frames.len() < 2 {
            return Err(invalid("run", "each run needs at least two frames"));
        }
        let mut spectrum = RunningSpectrum::new(&run.initial);
        let k_max = run.frames.len() - 1;
        let mut features = Vec::with_capacity(k_max);
        let mut labels = Vec::with_capacity(k_max);
        for k in 0..k_max {
            let frame = &run.frames[k];
            if frame.probes.len() != probes {
                return Err(Error::DimensionMismatch {
                    expected: probes,
                    actual: frame.probes.len(),
                });
            }
            for &(bin, z) in &frame.probes {
                spectrum.update(bin, z)?;
            }
            features.push(spectrum.window(frame.beam_index, half_width)?);
            labels.push(make_label(frame.beam_index, run.frames[k + 1].true_index, half_width));
        }
        sequences.push(Sequence { features, labels });
    }
    Ok(Dataset {
        sequences,
        half_width,
        probes_per_frame: probes,
    })
}

/// Column names of the flat dataset CSV.
pub fn dataset_csv_header(half_width: usize) -> Vec<String> {
    let n = 2 * half_width + 1;
    let mut cols = vec![
        "realization".to_string(),
        "frame".to_string(),
        "center_index".to_string(),
    ];
    cols.extend((0..n).map(|j| format!("f{j}")));
    cols.extend((0..n).map(|j| format!("y{j}")));
    cols
}

/// Writes `# ` comment lines, then one row per (realization, frame).
pub fn write_dataset_csv<W: Write>(mut out: W, data: &Dataset, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(
        out,
        "# half_width={} probes_per_frame={}",
        data.half_width, data.probes_per_frame
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(dataset_csv_header(data.half_width))?;
    for (r, seq) in data.sequences.iter().enumerate() {
        for (k, (f, y)) in seq.features.iter().zip(&seq.labels).enumerate() {
            let mut row = vec![r.to_string(), k.to_string(), f.center_grid_index.to_string()];
            row.extend(f.values.iter().map(|v| v.to_string()));
            row.extend(y.values().iter().map(|v| (*v as u8).to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()
}

pub fn read_dataset_csv<R: Read>(mut input: R) -> Result<Dataset> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::DatasetFormat(e.to_string()))?;
    let probes_per_frame = text
        .lines()
        .filter(|l| l.starts_with('#'))
        .find_map(|l| {
            l.split_whitespace()
                .find_map(|tok| tok.strip_prefix("probes_per_frame="))
                .and_then(|v| v.parse().ok())
        })
        .ok_or_else(|| Error::DatasetFormat("missing probes_per_frame comment".into()))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::DatasetFormat(e.to_string()))?
        .clone();
    if headers.len() < 6 || (headers.len() - 3) % 2 != 0 {
        return Err(Error::DatasetFormat(format!(
            "unexpected column count {}",
            headers.len()
        )));
    }
    let n = (headers.len() - 3) / 2;
    let half_width = (n - 1) / 2;
    let mut sequences: Vec<Sequence> = Vec::new();
    let parse_err = |e: &dyn std::fmt::Display| Error::DatasetFormat(e.to_string());
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(&e))?;
        let r: usize = rec[0].parse().map_err(|e| parse_err(&e))?;
        let center: usize = rec[2].parse().map_err(|e| parse_err(&e))?;
        let values = (0..n)
            .map(|j| rec[3 + j].parse::<f64>().map_err(|e| parse_err(&e)))
            .collect::<Result<Vec<_>>>()?;
        let ys = (0..n)
            .map(|j| rec[3 + n + j].parse::<u8>().map_err(|e| parse_err(&e)))
            .collect::<Result<Vec<_>>>()?;
        if ys.iter().filter(|y| **y == 1).count() != 1 || ys.iter().any(|y| *y > 1) {
            return Err(Error::DatasetFormat("label is not one-hot".into()));
        }
        let hot = ys.iter().position(|y| *y == 1).unwrap_or(0);
        while sequences.len() <= r {
            sequences.push(Sequence {
                features: Vec::new(),
                labels: Vec::new(),
            });
        }
        sequences[r].features.push(FeatureWindow {
            values,
            center_grid_index: center,
            half_width,
        });
        sequences[r].labels.push(LabelVector::new(hot, n)?);
    }
    Ok(Dataset {
        sequences,
        half_width,
        probes_per_frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spectrum(mags: &[f64]) -> PseudoSpectrum {
        PseudoSpectrum::from_values(mags.iter().map(|m| Complex64::new(*m, 0.0)).collect()).unwrap()
    }

    /// Direct transcription of the labelling rule with 1-based positions.
    fn reference_label(d: i64, l: i64) -> Vec<u8> {
        let mut label = vec![0u8; (2 * l + 1) as usize];
        let position = if d.abs() <= l {
            l + 1 + d
        } else {
            l + 1 + d.signum() * l
        };
        label[(position - 1) as usize] = 1;
        label
    }

    #[test]
    fn window_centered_mid_grid() {
        let mags: Vec<f64> = (0..11).map(|i| i as f64 + 1.0).collect();
        let w = extract_window(&spectrum(&mags), 5, 2).unwrap();
        let want: Vec<f64> = [4.0, 5.0, 6.0, 7.0, 8.0].iter().map(|v| v / 8.0).collect();
        assert_eq!(w.values, want);
        assert_eq!(w.center_grid_index, 5);
    }

    #[test]
    fn window_pads_at_grid_edge() {
        let mags = [2.0, 4.0, 1.0, 9.0, 9.0];
        let w = extract_window(&spectrum(&mags), 0, 2).unwrap();
        assert_eq!(w.values, vec![0.0, 0.0, 0.5, 1.0, 0.25]);
    }

    #[test]
    fn flat_spectrum_normalizes_to_one() {
        let w = extract_window(&spectrum(&[3.0; 9]), 4, 3).unwrap();
        assert!(w.values.iter().all(|v| *v == 1.0));
        let z = window_from_magnitudes(&[0.0; 9], 4, 3).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn window_rejects_wide_half_width() {
        assert!(extract_window(&spectrum(&[1.0; 5]), 2, 5).is_err());
    }

    #[test]
    fn labels_follow_examples() {
        assert_eq!(make_label(40, 40, 8).position(), 8);
        assert_eq!(make_label(40, 41, 2).values(), vec![0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(make_label(40, 33, 2).values(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(make_label(10, 30, 3).position(), 6);
        assert_eq!(make_label(10, 12, 3).offset(), 2);
    }

    #[test]
    fn labels_match_reference_exhaustively() {
        for l in 1..=4i64 {
            for d in -3 * l..=3 * l {
                let base = 100usize;
                let got = make_label(base, (base as i64 + d) as usize, l as usize);
                let want: Vec<f64> = reference_label(d, l).iter().map(|v| *v as f64).collect();
                assert_eq!(got.values(), want, "L={l} d={d}");
            }
        }
    }

    #[test]
    fn probe_bins_center_and_edges() {
        assert_eq!(probe_bins(50, 1, 181), 50..51);
        assert_eq!(probe_bins(50, 3, 181), 49..52);
        assert_eq!(probe_bins(50, 2, 181), 49..51);
        assert_eq!(probe_bins(0, 3, 181), 0..3);
        assert_eq!(probe_bins(180, 3, 181), 178..181);
    }

    fn static_run(frames: usize, index: usize, probes: usize) -> MeasurementRun {
        // Noiseless Dirichlet-like profile peaking at `index`.
        let g = 41;
        let profile = |bin: usize| 1.0 / (1.0 + (bin as f64 - index as f64).powi(2));
        let initial = PseudoSpectrum::from_values((0..g).map(|b| Complex64::new(profile(b), 0.0)).collect()).unwrap();
        let frames = (0..frames)
            .map(|_| FrameObservation {
                true_index: index,
                beam_index: index,
                probes: probe_bins(index, probes, g)
                    .map(|b| (b, Complex64::new(profile(b), 0.0)))
                    .collect(),
            })
            .collect();
        MeasurementRun { initial, frames }
    }

    #[test]
    fn two_frames_give_one_pair() {
        let d = generate_dataset(&[static_run(2, 20, 1)], 4, 1).unwrap();
        assert_eq!(d.sequences.len(), 1);
        assert_eq!(d.pair_count(), 1);
    }

    #[test]
    fn static_ue_labels_are_centered() {
        let d = generate_dataset(&[static_run(30, 20, 3), static_run(12, 7, 3)], 4, 3).unwrap();
        for seq in &d.sequences {
            for (f, y) in seq.features.iter().zip(&seq.labels) {
                assert_eq!(y.position(), 4);
                let peak = f
                    .values
                    .iter()
                    .enumerate()
                    .fold((0, f64::MIN), |a, (i, v)| if *v > a.1 { (i, *v) } else { a });
                assert_eq!(peak.0, 4);
            }
        }
    }

    #[test]
    fn dataset_rejects_bad_inputs() {
        assert!(generate_dataset(&[static_run(5, 20, 7)], 2, 7).is_err());
        assert!(generate_dataset(&[static_run(1, 20, 1)], 2, 1).is_err());
        assert!(generate_dataset(&[static_run(5, 20, 3)], 2, 1).is_err());
    }

    #[test]
    fn off_center_beam_shifts_window_and_label() {
        let mut run = static_run(3, 20, 3);
        run.frames[0].beam_index = 19;
        run.frames[0].probes = probe_bins(19, 3, 41).map(|b| (b, Complex64::new(1.0, 0.0))).collect();
        let d = generate_dataset(&[run], 4, 3).unwrap();
        assert_eq!(d.sequences[0].features[0].center_grid_index, 19);
        assert_eq!(d.sequences[0].labels[0].offset(), 1);
        assert_eq!(d.sequences[0].labels[1].offset(), 0);
    }

    #[test]
    fn stale_bins_keep_previous_measurements() {
        let initial = spectrum(&[1.0; 10]);
        let frames = vec![
            FrameObservation {
                true_index: 4,
                beam_index: 4,
                probes: vec![(4, Complex64::new(5.0, 0.0))],
            },
            FrameObservation {
                true_index: 5,
                beam_index: 5,
                probes: vec![(5, Complex64::new(10.0, 0.0))],
            },
            FrameObservation {
                true_index: 5,
                beam_index: 5,
                probes: vec![(5, Complex64::new(10.0, 0.0))],
            },
        ];
        let d = generate_dataset(&[MeasurementRun { initial, frames }], 2, 1).unwrap();
        let second = &d.sequences[0].features[1].values;
        assert_eq!(second, &vec![0.1, 0.5, 1.0, 0.1, 0.1]);
        assert_eq!(d.sequences[0].labels[0].offset(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let d = generate_dataset(&[static_run(6, 20, 3), static_run(4, 3, 3)], 3, 3).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &d, &["seed=1".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# seed=1\n"));
        let back = read_dataset_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    proptest! {
        #[test]
        fn labels_are_one_hot(m_now in 0usize..500, m_next in 0usize..500, l in 0usize..20) {
            let y = make_label(m_now, m_next, l);
            let v = y.values();
            prop_assert_eq!(v.len(), 2 * l + 1);
            prop_assert_eq!(v.iter().sum::<f64>(), 1.0);
            prop_assert!(y.position() <= 2 * l);
        }

        #[test]
        fn window_values_in_unit_interval(mags in proptest::collection::vec(0.0f64..100.0, 5..60), m_seed in 0usize..1000, l in 0usize..4) {
            let m = m_seed % mags.len();
            let w = window_from_magnitudes(&mags, m, l).unwrap();
            prop_assert_eq!(w.len(), 2 * l + 1);
            prop_assert!(w.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
