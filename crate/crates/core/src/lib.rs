//! Millimetre-wave beam tracking: LoS channel simulation, a particle-filter
//! baseline and a sliding-window recurrent tracker.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod framing;
pub mod motion;
pub mod particle_filter;
pub mod rnn;
pub mod scenario;
pub mod tracking;

pub use channel::{ArrayGeometry, ChannelState, Codebook, PseudoSpectrum};
pub use dataset::{Dataset, FeatureWindow, LabelVector};
pub use error::{Error, Result};
pub use framing::{FrameConfig, FrameKind, RateParams};
pub use motion::{LinkBudget, Segment, SpeedChange, Trajectory, TrajectorySpec};
pub use particle_filter::{ParticleSet, PfConfig, PfEstimate};
pub use rnn::{RnnNetwork, TrainConfig, TrainReport};
pub use scenario::{Realization, ScenarioConfig};
pub use tracking::{TrackResult, TrackerKind, TrackerSummary};
