//! Fixtures shared by the criterion benches.

use beamtrack_core::dataset::Dataset;
use beamtrack_core::scenario::{stream_rng, training_dataset, Stream};
use beamtrack_core::{ChannelState, Codebook, RnnNetwork, ScenarioConfig};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(sub: u64) -> ChaCha8Rng {
    stream_rng(0, Stream::Tracking, 0, sub)
}

pub fn default_codebook() -> Codebook {
    ScenarioConfig::default().codebook().unwrap()
}

pub fn channel(theta_deg: f64) -> ChannelState {
    ChannelState::new(theta_deg, Complex64::new(1.5, -0.4), 900.0, 3e-7).unwrap()
}

/// A network sized for half width `l` with `hidden` units per LSTM.
pub fn network(l: usize, hidden: usize) -> RnnNetwork {
    RnnNetwork::for_window(l, hidden, &mut rng(7))
}

/// `steps` random windows of length `2l + 1`.
pub fn windows(l: usize, steps: usize) -> Vec<Vec<f64>> {
    let mut r = rng(8);
    (0..steps)
        .map(|_| (0..2 * l + 1).map(|_| r.random_range(0.0..1.0)).collect())
        .collect()
}

/// Training data from a single training realization of the default scenario.
pub fn small_dataset() -> Dataset {
    training_dataset(&ScenarioConfig {
        train_realizations: 1,
        ..ScenarioConfig::default()
    })
    .unwrap()
}
