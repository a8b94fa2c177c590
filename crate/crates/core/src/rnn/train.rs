use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward, bce_loss_values, forward_trace, RnnNetwork};
use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub context_len: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub grad_clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            context_len: 8,
            hidden_dim: 16,
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 30,
            batch_size: 8,
            grad_clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.context_len == 0 {
            return Err(invalid("train.context_len", "must be >= 1"));
        }
        if self.hidden_dim == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("train", "hidden_dim, epochs and batch_size must be positive"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(invalid("train.learning_rate", "must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("train.momentum", "must lie in [0, 1)"));
        }
        if !(self.grad_clip_norm > 0.0) {
            return Err(invalid("train.grad_clip_norm", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-sample loss of each epoch, measured while training.
    pub epoch_losses: Vec<f64>,
    pub samples_per_epoch: usize,
}

/// `(sequence, last frame)` of every rolling context in the dataset.
fn context_index(data: &Dataset) -> Vec<(usize, usize)> {
    data.sequences
        .iter()
        .enumerate()
        .flat_map(|(s, seq)| (0..seq.len()).map(move |t| (s, t)))
        .collect()
}

/// Momentum gradient descent with global-norm clipping over shuffled rolling contexts.
pub fn train<R: Rng + ?Sized>(
    mut net: RnnNetwork,
    data: &Dataset,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(RnnNetwork, TrainReport)> {
    cfg.validate()?;
    net.validate()?;
    if net.input_dim() != data.window_len() || net.output_dim() != data.window_len() {
        return Err(Error::DimensionMismatch {
            expected: data.window_len(),
            actual: net.input_dim(),
        });
    }
    let mut order = context_index(data);
    if order.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let targets: Vec<Vec<Vec<f64>>> = data
        .sequences
        .iter()
        .map(|s| s.labels.iter().map(|l| l.values()).collect())
        .collect();

    let mut velocity = net.zeros_like();
    let mut grads = net.zeros_like();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            for t in grads.tensors_mut() {
                t.iter_mut().for_each(|v| *v = 0.0);
            }
            for &(s, t) in batch {
                let seq = &data.sequences[s];
                let start = (t + 1).saturating_sub(cfg.context_len);
                let inputs: Vec<&[f64]> = seq.features[start..=t].iter().map(|f| f.values.as_slice()).collect();
                let cache = forward_trace(&net, &inputs)?;
                let loss = bce_loss_values(&cache.probs, &targets[s][t])?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch, loss });
                }
                total += loss;
                backward(&net, &cache, &targets[s][t], &mut grads);
            }
            apply_update(&mut net, &mut velocity, &mut grads, batch.len(), cfg);
        }
        let mean = total / order.len() as f64;
        if !mean.is_finite() || net.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        epoch_losses.push(mean);
    }
    Ok((
        net,
        TrainReport {
            epoch_losses,
            samples_per_epoch: order.len(),
        },
    ))
}

fn apply_update(
    net: &mut RnnNetwork,
    velocity: &mut RnnNetwork,
    grads: &mut RnnNetwork,
    batch: usize,
    cfg: &TrainConfig,
) {
    let scale = 1.0 / batch as f64;
    let norm = grads
        .tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|g| (g * scale).powi(2))
        .sum::<f64>()
        .sqrt();
    let clip = if norm > cfg.grad_clip_norm {
        cfg.grad_clip_norm / norm
    } else {
        1.0
    };
    let step = cfg.learning_rate * scale * clip;
    for ((p, v), g) in net
        .tensors_mut()
        .into_iter()
        .zip(velocity.tensors_mut())
        .zip(grads.tensors())
    {
        for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
            *v = cfg.momentum * *v - step * g;
            *p += *v;
        }
    }
}

/// Fraction of contexts whose predicted offset lies within `tolerance` bins of the label.
pub fn label_accuracy(net: &RnnNetwork, data: &Dataset, context_len: usize, tolerance: i64) -> Result<f64> {
    let mut hits = 0usize;
    let mut count = 0usize;
    for seq in &data.sequences {
        for t in 0..seq.len() {
            let start = (t + 1).saturating_sub(context_len);
            let inputs: Vec<&[f64]> = seq.features[start..=t].iter().map(|f| f.values.as_slice()).collect();
            let probs = forward_trace(net, &inputs)?.probs;
            let off = super::network::offset_from_probs(&probs);
            if (off - seq.labels[t].offset()).abs() <= tolerance {
                hits += 1;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("dataset"));
    }
    Ok(hits as f64 / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureWindow, LabelVector, Sequence};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_pair(half_width: usize) -> Dataset {
        let n = 2 * half_width + 1;
        let values = (0..n)
            .map(|j| 1.0 / (1.0 + (j as f64 - half_width as f64 - 1.0).powi(2)))
            .collect();
        Dataset {
            sequences: vec![Sequence {
                features: vec![FeatureWindow {
                    values,
                    center_grid_index: 40,
                    half_width,
                }],
                labels: vec![LabelVector::new(half_width + 1, n).unwrap()],
            }],
            half_width,
            probes_per_frame: 1,
        }
    }

    #[test]
    fn single_pair_overfits() {
        let data = single_pair(8);
        // One sample gives 200 updates in total; at lr 1e-2 the saturating
        // sigmoid tails leave the summed loss near 0.5.
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 1,
            learning_rate: 0.3,
            ..TrainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let net = RnnNetwork::for_window(8, cfg.hidden_dim, &mut rng);
        let (_, report) = train(net, &data, &cfg, &mut rng).unwrap();
        let last = *report.epoch_losses.last().unwrap();
        assert!(last < 0.01, "final loss {last}");
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_untouched() {
        let data = single_pair(3);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            hidden_dim: 6,
            epochs: 3,
            ..TrainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = RnnNetwork::for_window(3, cfg.hidden_dim, &mut rng);
        let (trained, _) = train(net.clone(), &data, &cfg, &mut rng).unwrap();
        assert_eq!(trained, net);
    }

    #[test]
    fn training_is_reproducible() {
        let data = single_pair(3);
        let cfg = TrainConfig {
            hidden_dim: 5,
            epochs: 4,
            ..TrainConfig::default()
        };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let net = RnnNetwork::for_window(3, cfg.hidden_dim, &mut rng);
            train(net, &data, &cfg, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn mismatched_window_rejected() {
        let data = single_pair(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = RnnNetwork::for_window(4, 4, &mut rng);
        assert!(train(net, &data, &TrainConfig::default(), &mut rng).is_err());
        let bad = TrainConfig {
            context_len: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
