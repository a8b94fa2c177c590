use rand::Rng;

use super::lstm::{gemv_acc, gemv_t_acc, lstm_backward, lstm_forward, outer_acc, sigmoid, LstmCache, LstmParams};
use crate::dataset::{FeatureWindow, LabelVector};
use crate::error::{Error, Result};

const PROB_CLAMP: f64 = 1e-12;

/// LSTM → biLSTM → dense → sigmoid classifier over window positions.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnNetwork {
    pub lstm1: LstmParams,
    pub bilstm_fwd: LstmParams,
    pub bilstm_bwd: LstmParams,
    /// `output × (fwd.hidden + bwd.hidden)`, row-major.
    pub dense_weights: Vec<f64>,
    pub dense_bias: Vec<f64>,
}

impl RnnNetwork {
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Self {
            lstm1: LstmParams::zeros(input_dim, hidden_dim),
            bilstm_fwd: LstmParams::zeros(hidden_dim, hidden_dim),
            bilstm_bwd: LstmParams::zeros(hidden_dim, hidden_dim),
            dense_weights: vec![0.0; output_dim * 2 * hidden_dim],
            dense_bias: vec![0.0; output_dim],
        }
    }

    pub fn random<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        let lstm1 = LstmParams::random(input_dim, hidden_dim, rng);
        let bilstm_fwd = LstmParams::random(hidden_dim, hidden_dim, rng);
        let bilstm_bwd = LstmParams::random(hidden_dim, hidden_dim, rng);
        let bound = 1.0 / ((2 * hidden_dim) as f64).sqrt();
        let dense_weights = (0..output_dim * 2 * hidden_dim)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self {
            lstm1,
            bilstm_fwd,
            bilstm_bwd,
            dense_weights,
            dense_bias: vec![0.0; output_dim],
        }
    }

    /// Square network over `2L+1` window positions.
    pub fn for_window<R: Rng + ?Sized>(half_width: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let n = 2 * half_width + 1;
        Self::random(n, hidden_dim, n, rng)
    }

    pub fn input_dim(&self) -> usize {
        self.lstm1.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.dense_bias.len()
    }

    pub fn half_width(&self) -> usize {
        (self.output_dim().saturating_sub(1)) / 2
    }

    pub fn validate(&self) -> Result<()> {
        self.lstm1.validate()?;
        self.bilstm_fwd.validate()?;
        self.bilstm_bwd.validate()?;
        for lay in [&self.bilstm_fwd, &self.bilstm_bwd] {
            if lay.input_dim != self.lstm1.hidden_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.lstm1.hidden_dim,
                    actual: lay.input_dim,
                });
            }
        }
        let concat = self.bilstm_fwd.hidden_dim + self.bilstm_bwd.hidden_dim;
        if self.dense_weights.len() != self.output_dim() * concat {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim() * concat,
                actual: self.dense_weights.len(),
            });
        }
        if self.output_dim() == 0 {
            return Err(Error::Empty("dense layer"));
        }
        if self
            .dense_weights
            .iter()
            .chain(&self.dense_bias)
            .any(|v| !v.is_finite())
        {
            return Err(Error::ModelFormat("non-finite dense parameter".into()));
        }
        Ok(())
    }

    /// Every parameter tensor in declaration order.
    pub fn tensors(&self) -> [&[f64]; 11] {
        [
            &self.lstm1.w,
            &self.lstm1.u,
            &self.lstm1.b,
            &self.bilstm_fwd.w,
            &self.bilstm_fwd.u,
            &self.bilstm_fwd.b,
            &self.bilstm_bwd.w,
            &self.bilstm_bwd.u,
            &self.bilstm_bwd.b,
            &self.dense_weights,
            &self.dense_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 11] {
        [
            &mut self.lstm1.w,
            &mut self.lstm1.u,
            &mut self.lstm1.b,
            &mut self.bilstm_fwd.w,
            &mut self.bilstm_fwd.u,
            &mut self.bilstm_fwd.b,
            &mut self.bilstm_bwd.w,
            &mut self.bilstm_bwd.u,
            &mut self.bilstm_bwd.b,
            &mut self.dense_weights,
            &mut self.dense_bias,
        ]
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Intermediates of one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    lstm1: LstmCache,
    fwd: LstmCache,
    bwd: LstmCache,
    concat: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Forward pass over raw input vectors; returns the final-step probabilities.
///
/// Only the last concatenated biLSTM state reaches the dense layer, and the
/// backward direction at that step has consumed just the last input, so the
/// backward LSTM is run for a single step.
pub fn forward_trace(net: &RnnNetwork, inputs: &[&[f64]]) -> Result<ForwardCache> {
    if inputs.is_empty() {
        return Err(Error::Empty("context"));
    }
    let h = net.lstm1.hidden_dim;
    let (h1, c1) = lstm_forward(&net.lstm1, inputs, &vec![0.0; h], &vec![0.0; h], "lstm1")?;
    let h1_refs: Vec<&[f64]> = h1.iter().map(Vec::as_slice).collect();
    let hf_dim = net.bilstm_fwd.hidden_dim;
    let hb_dim = net.bilstm_bwd.hidden_dim;
    let (hf, cf) = lstm_forward(
        &net.bilstm_fwd,
        &h1_refs,
        &vec![0.0; hf_dim],
        &vec![0.0; hf_dim],
        "bilstm_fwd",
    )?;
    let last = &h1_refs[h1_refs.len() - 1..];
    let (hb, cb) = lstm_forward(
        &net.bilstm_bwd,
        last,
        &vec![0.0; hb_dim],
        &vec![0.0; hb_dim],
        "bilstm_bwd",
    )?;
    let mut concat = hf[hf.len() - 1].clone();
    concat.extend_from_slice(&hb[0]);
    let mut logits = net.dense_bias.clone();
    gemv_acc(&net.dense_weights, &concat, &mut logits);
    let probs = logits.iter().map(|z| sigmoid(*z)).collect();
    Ok(ForwardCache {
        lstm1: c1,
        fwd: cf,
        bwd: cb,
        concat,
        probs,
    })
}

pub fn network_forward(net: &RnnNetwork, windows: &[FeatureWindow]) -> Result<Vec<f64>> {
    let refs: Vec<&[f64]> = windows.iter().map(|w| w.values.as_slice()).collect();
    Ok(forward_trace(net, &refs)?.probs)
}

/// Summed elementwise binary cross-entropy against a 0/1 target.
pub fn bce_loss_values(probs: &[f64], target: &[f64]) -> Result<f64> {
    if probs.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            actual: probs.len(),
        });
    }
    Ok(probs
        .iter()
        .zip(target)
        .map(|(p, y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum())
}

pub fn bce_loss(probs: &[f64], label: &LabelVector) -> Result<f64> {
    bce_loss_values(probs, &label.values())
}

/// Accumulates the BCE gradient for `target` into `grads`.
///
/// Sigmoid and cross-entropy combine into `p − y` on each logit.
pub fn backward(net: &RnnNetwork, cache: &ForwardCache, target: &[f64], grads: &mut RnnNetwork) {
    let dlogit: Vec<f64> = cache.probs.iter().zip(target).map(|(p, y)| p - y).collect();
    outer_acc(&mut grads.dense_weights, &dlogit, &cache.concat);
    grads.dense_bias.iter_mut().zip(&dlogit).for_each(|(g, d)| *g += d);
    let mut dconcat = vec![0.0; cache.concat.len()];
    gemv_t_acc(&net.dense_weights, &dlogit, &mut dconcat);

    let hf_dim = net.bilstm_fwd.hidden_dim;
    let t_len = cache.fwd.len();
    let mut dhf = vec![vec![0.0; hf_dim]; t_len];
    dhf[t_len - 1].copy_from_slice(&dconcat[..hf_dim]);
    let dhb = vec![dconcat[hf_dim..].to_vec()];

    let mut dh1 = lstm_backward(&net.bilstm_fwd, &cache.fwd, &dhf, &mut grads.bilstm_fwd);
    let dh1_last = lstm_backward(&net.bilstm_bwd, &cache.bwd, &dhb, &mut grads.bilstm_bwd);
    dh1[t_len - 1].iter_mut().zip(&dh1_last[0]).for_each(|(a, b)| *a += b);
    lstm_backward(&net.lstm1, &cache.lstm1, &dh1, &mut grads.lstm1);
}

/// Offset encoded by a probability vector; ties go to the smaller correction,
/// then to the negative side.
pub fn offset_from_probs(probs: &[f64]) -> i64 {
    let l = (probs.len() as i64 - 1) / 2;
    let mut best = 0i64;
    let mut best_p = probs[l as usize];
    for k in 1..=l {
        for off in [-k, k] {
            let p = probs[(l + off) as usize];
            if p > best_p {
                best = off;
                best_p = p;
            }
        }
    }
    best
}

pub fn predict_offset(net: &RnnNetwork, context: &[FeatureWindow]) -> Result<i64> {
    Ok(offset_from_probs(&network_forward(net, context)?))
}
