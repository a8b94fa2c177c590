//! Experiment driver behind the `beamtrack` binary.
//!
//! An experiment is one TOML file holding the scenario, PF and training
//! settings, an output directory and an optional sweep over `(L, p)` cells.
//! Every artifact opens with a `# beamtrack seed=.. train_seed=.. config_hash=..`
//! line. The hash is SHA-256 over the canonical re-serialization of the
//! effective config, with `output_dir` blanked so that the same experiment
//! written to two directories carries the same hash.

use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use beamtrack_core::dataset::write_dataset_csv;
use beamtrack_core::experiment::{summarize, track_all, train_model};
use beamtrack_core::rnn::{read_model, write_model};
use beamtrack_core::scenario::training_dataset;
use beamtrack_core::tracking::{high_curvature_frames, mean_rate_over, mse_over, read_tracks_csv, write_tracks_csv};
use beamtrack_core::{PfConfig, RnnNetwork, ScenarioConfig, TrackResult, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCell {
    pub half_width: usize,
    pub probes_per_frame: usize,
}

impl fmt::Display for SweepCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}_p{}", self.half_width, self.probes_per_frame)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    /// Cells to run; empty means the scenario's own `(half_width, probes_per_frame)`.
    pub sweep: Vec<SweepCell>,
    pub scenario: ScenarioConfig,
    pub pf: PfConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            sweep: Vec::new(),
            scenario: ScenarioConfig::default(),
            pf: PfConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Parse,
    Validation,
    Divergence,
    Io,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Parse => 3,
            FailureKind::Validation => 4,
            FailureKind::Divergence => 5,
            FailureKind::Io => 6,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: FailureKind,
    pub message: String,
}

impl CliError {
    fn new(kind: FailureKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(FailureKind::Io, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<beamtrack_core::Error> for CliError {
    fn from(e: beamtrack_core::Error) -> Self {
        use beamtrack_core::Error as E;
        let kind = match e {
            E::Diverged { .. } | E::NonFiniteActivation { .. } => FailureKind::Divergence,
            E::ModelFormat(_) | E::DatasetFormat(_) | E::TrackFormat(_) => FailureKind::Parse,
            _ => FailureKind::Validation,
        };
        Self::new(kind, e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::new(FailureKind::Parse, format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config always serializes")
    }

    /// Reads and parses a config file; I/O trouble here counts as a parse failure.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::new(FailureKind::Parse, format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn cells(&self) -> Vec<SweepCell> {
        if self.sweep.is_empty() {
            vec![SweepCell {
                half_width: self.scenario.half_width,
                probes_per_frame: self.scenario.probes_per_frame,
            }]
        } else {
            self.sweep.clone()
        }
    }

    pub fn scenario_for(&self, cell: SweepCell) -> ScenarioConfig {
        ScenarioConfig {
            half_width: cell.half_width,
            probes_per_frame: cell.probes_per_frame,
            ..self.scenario.clone()
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.scenario.validate()?;
        self.pf.validate()?;
        self.train.validate()?;
        for cell in self.cells() {
            self.scenario_for(cell)
                .validate()
                .map_err(|e| CliError::new(FailureKind::Validation, format!("sweep cell {cell}: {e}")))?;
        }
        Ok(())
    }

    /// Sets the scenario and training seeds together.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        Sha256::digest(canonical.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn header(&self) -> String {
        format!(
            "beamtrack seed={} train_seed={} config_hash={}",
            self.scenario.seed,
            self.train.seed,
            self.hash()
        )
    }
}

pub fn dataset_path(dir: &Path, cell: SweepCell) -> PathBuf {
    dir.join(format!("dataset_{cell}.csv"))
}

pub fn model_path(dir: &Path, cell: SweepCell) -> PathBuf {
    dir.join(format!("model_{cell}.txt"))
}

pub fn loss_path(dir: &Path, cell: SweepCell) -> PathBuf {
    dir.join(format!("loss_{cell}.csv"))
}

pub fn tracks_path(dir: &Path, cell: SweepCell) -> PathBuf {
    dir.join(format!("tracks_{cell}.csv"))
}

pub fn report_path(dir: &Path) -> PathBuf {
    dir.join("report.csv")
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>, path: &Path) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::io(path, e))?;
    Ok(buf)
}

/// Training dataset of every cell.
pub fn generate(cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    cfg.validate()?;
    let mut written = Vec::new();
    for cell in cfg.cells() {
        let data = training_dataset(&cfg.scenario_for(cell))?;
        let path = dataset_path(&cfg.output_dir, cell);
        let bytes = buffer(|b| write_dataset_csv(b, &data, &[cfg.header()]), &path)?;
        write_file(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// Model file and per-epoch loss trace of every cell.
pub fn train(cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    cfg.validate()?;
    let mut written = Vec::new();
    for cell in cfg.cells() {
        let (net, report) = train_model(&cfg.scenario_for(cell), &cfg.train)?;
        let path = model_path(&cfg.output_dir, cell);
        let comments = [
            cfg.header(),
            format!("cell={cell} context_len={}", cfg.train.context_len),
        ];
        let bytes = buffer(|b| write_model(b, &net, &comments), &path)?;
        write_file(&path, &bytes)?;
        written.push(path);

        let path = loss_path(&cfg.output_dir, cell);
        let mut text = format!("# {}\nepoch,loss\n", cfg.header());
        for (epoch, loss) in report.epoch_losses.iter().enumerate() {
            text.push_str(&format!("{epoch},{loss}\n"));
        }
        write_file(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_model(path: &Path) -> CliResult<RnnNetwork> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(read_model(BufReader::new(file))?)
}

/// Per-frame tracks of every cell. The RNN uses `model` when given (single
/// cell only), else the cell's model file in the output directory.
pub fn track(cfg: &ExperimentConfig, model: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    cfg.validate()?;
    let cells = cfg.cells();
    if model.is_some() && cells.len() != 1 {
        return Err(CliError::new(
            FailureKind::Validation,
            "--model needs a config with exactly one cell",
        ));
    }
    let mut written = Vec::new();
    for cell in cells {
        let source = model.map_or_else(|| model_path(&cfg.output_dir, cell), Path::to_path_buf);
        let net = load_model(&source).map_err(|e| match e.kind {
            FailureKind::Io => CliError::new(
                FailureKind::Io,
                format!("{e} (run `beamtrack train` first or pass --model)"),
            ),
            _ => e,
        })?;
        let rows = track_all(&cfg.scenario_for(cell), &cfg.pf, Some((&net, cfg.train.context_len)))?;
        let refs: Vec<(usize, &TrackResult)> = rows.iter().map(|(i, r)| (*i, r)).collect();
        let path = tracks_path(&cfg.output_dir, cell);
        let comments = [cfg.header(), format!("cell={cell}")];
        let bytes = buffer(|b| write_tracks_csv(b, &refs, &comments), &path)?;
        write_file(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

pub const REPORT_COLUMNS: [&str; 13] = [
    "tracker",
    "half_width",
    "window_len",
    "probes_per_frame",
    "runs",
    "mse_deg2",
    "mean_rate",
    "high_curvature_mse_deg2",
    "high_curvature_rate",
    "segment1_mse_deg2",
    "segment2_mse_deg2",
    "segment3_mse_deg2",
    "reacquisitions",
];

/// One row per (tracker, L, p), read back from the tracks files.
pub fn report(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    cfg.validate()?;
    let mut text = format!("# {}\n{}\n", cfg.header(), REPORT_COLUMNS.join(","));
    for cell in cfg.cells() {
        let path = tracks_path(&cfg.output_dir, cell);
        let file = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
        let rows = read_tracks_csv(BufReader::new(file))?;
        for summary in summarize(&rows)? {
            let runs: Vec<&TrackResult> = rows
                .iter()
                .map(|(_, r)| r)
                .filter(|r| r.tracker == summary.tracker)
                .collect();
            let hc = high_curvature_frames(runs[0].len());
            let mut fields = vec![
                summary.tracker.as_str().to_string(),
                cell.half_width.to_string(),
                (2 * cell.half_width + 1).to_string(),
                cell.probes_per_frame.to_string(),
                summary.runs.to_string(),
                summary.mse_deg2.to_string(),
                summary.mean_rate.to_string(),
                mse_over(&runs, hc.clone())?.to_string(),
                mean_rate_over(&runs, hc)?.to_string(),
            ];
            let mut segs: Vec<String> = summary.segment_mse_deg2.iter().map(f64::to_string).collect();
            segs.resize(3, String::new());
            fields.extend(segs);
            fields.push(summary.reacquisitions.to_string());
            text.push_str(&fields.join(","));
            text.push('\n');
        }
    }
    let path = report_path(&cfg.output_dir);
    write_file(&path, text.as_bytes())?;
    Ok(path)
}
