use rand::Rng;

use crate::error::{Error, Result};

/// Standard LSTM cell with a forget gate.
///
/// Gate blocks are stacked `i, f, o, g` along the rows: `w` is `4H × In`,
/// `u` is `4H × H`, `b` is `4H`, all row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

pub const GATE_NAMES: [&str; 4] = ["i", "f", "o", "g"];

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w: vec![0.0; 4 * hidden_dim * input_dim],
            u: vec![0.0; 4 * hidden_dim * hidden_dim],
            b: vec![0.0; 4 * hidden_dim],
        }
    }

    /// Uniform in `±1/sqrt(fan_in)` per matrix, forget bias at 1.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        let bw = 1.0 / (input_dim.max(1) as f64).sqrt();
        let bu = 1.0 / (hidden_dim.max(1) as f64).sqrt();
        p.w.iter_mut().for_each(|x| *x = rng.random_range(-bw..=bw));
        p.u.iter_mut().for_each(|x| *x = rng.random_range(-bu..=bu));
        p.b[hidden_dim..2 * hidden_dim].iter_mut().for_each(|x| *x = 1.0);
        p
    }

    pub fn validate(&self) -> Result<()> {
        let (h, i) = (self.hidden_dim, self.input_dim);
        for (actual, expected) in [
            (self.w.len(), 4 * h * i),
            (self.u.len(), 4 * h * h),
            (self.b.len(), 4 * h),
        ] {
            if actual != expected {
                return Err(Error::DimensionMismatch { expected, actual });
            }
        }
        if h == 0 || i == 0 {
            return Err(Error::Empty("lstm dimensions"));
        }
        if self.w.iter().chain(&self.u).chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::ModelFormat("non-finite LSTM parameter".into()));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += m · v` for a row-major `rows × v.len()` matrix.
#[inline]
pub(crate) fn gemv_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (row, o) in m.chunks_exact(cols).zip(out.iter_mut()) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += mᵀ · v`.
#[inline]
pub(crate) fn gemv_t_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (row, s) in m.chunks_exact(cols).zip(v) {
        if *s != 0.0 {
            out.iter_mut().zip(row).for_each(|(o, a)| *o += a * s);
        }
    }
}

/// `m += a ⊗ b`.
#[inline]
pub(crate) fn outer_acc(m: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (row, s) in m.chunks_exact_mut(cols).zip(a) {
        if *s != 0.0 {
            row.iter_mut().zip(b).for_each(|(o, x)| *o += s * x);
        }
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates, stacked like the parameters.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: Vec<StepCache>,
}

impl LstmCache {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Runs the cell over `inputs` from `(h0, c0)` and returns every hidden state.
pub fn lstm_forward(
    params: &LstmParams,
    inputs: &[&[f64]],
    h0: &[f64],
    c0: &[f64],
    layer: &'static str,
) -> Result<(Vec<Vec<f64>>, LstmCache)> {
    let hd = params.hidden_dim;
    if h0.len() != hd || c0.len() != hd {
        return Err(Error::DimensionMismatch {
            expected: hd,
            actual: h0.len().min(c0.len()),
        });
    }
    let mut h = h0.to_vec();
    let mut c = c0.to_vec();
    let mut hs = Vec::with_capacity(inputs.len());
    let mut steps = Vec::with_capacity(inputs.len());
    for (t, x) in inputs.iter().enumerate() {
        if x.len() != params.input_dim {
            return Err(Error::DimensionMismatch {
                expected: params.input_dim,
                actual: x.len(),
            });
        }
        let mut a = params.b.clone();
        gemv_acc(&params.w, x, &mut a);
        gemv_acc(&params.u, &h, &mut a);
        for (k, v) in a.iter_mut().enumerate() {
            *v = if k < 3 * hd { sigmoid(*v) } else { v.tanh() };
        }
        let c_prev = std::mem::take(&mut c);
        let h_prev = std::mem::take(&mut h);
        c = (0..hd).map(|j| a[hd + j] * c_prev[j] + a[j] * a[3 * hd + j]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        h = (0..hd).map(|j| a[2 * hd + j] * tanh_c[j]).collect();
        if h.iter().chain(&c).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteActivation { layer, step: t });
        }
        hs.push(h.clone());
        steps.push(StepCache {
            x: x.to_vec(),
            h_prev,
            c_prev,
            gates: a,
            tanh_c,
        });
    }
    Ok((hs, LstmCache { steps }))
}

/// BPTT through one cell. `dh[t]` is the loss gradient on output `h_t` from
/// above; gradients are accumulated into `grads`, and the gradient on each
/// input is returned.
pub fn lstm_backward(params: &LstmParams, cache: &LstmCache, dh: &[Vec<f64>], grads: &mut LstmParams) -> Vec<Vec<f64>> {
    let hd = params.hidden_dim;
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut dxs = vec![Vec::new(); cache.steps.len()];
    let mut da = vec![0.0; 4 * hd];
    for (t, s) in cache.steps.iter().enumerate().rev() {
        let g = &s.gates;
        for j in 0..hd {
            let dh_j = dh[t][j] + dh_next[j];
            let (i, f, o, gg) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
            let tc = s.tanh_c[j];
            let dc = dc_next[j] + dh_j * o * (1.0 - tc * tc);
            da[j] = dc * gg * i * (1.0 - i);
            da[hd + j] = dc * s.c_prev[j] * f * (1.0 - f);
            da[2 * hd + j] = dh_j * tc * o * (1.0 - o);
            da[3 * hd + j] = dc * i * (1.0 - gg * gg);
            dc_next[j] = dc * f;
        }
        outer_acc(&mut grads.w, &da, &s.x);
        outer_acc(&mut grads.u, &da, &s.h_prev);
        grads.b.iter_mut().zip(&da).for_each(|(b, d)| *b += d);
        let mut dx = vec![0.0; params.input_dim];
        gemv_t_acc(&params.w, &da, &mut dx);
        dxs[t] = dx;
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        gemv_t_acc(&params.u, &da, &mut dh_next);
    }
    dxs
}
