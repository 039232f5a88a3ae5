//! Two-layer `Linear - Tanh - Linear` networks with hand-derived gradients,
//! Adam and a step learning-rate schedule.
//!
//! The architecture is fixed, so the second-order term needed by the WGAN
//! gradient penalty is written out in closed form instead of going through a
//! general autodiff engine.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rational approximation of `tanh` (max abs error below 3e-8), several
/// times cheaper than the libm call and used for every activation.
#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    let x = x.clamp(-9.0, 9.0);
    let x2 = x * x;
    let mut p = -2.760_768_477_423_55e-16;
    p = p * x2 + 2.000_187_904_824_77e-13;
    p = p * x2 - 8.604_671_522_137_35e-11;
    p = p * x2 + 5.122_297_090_371_14e-8;
    p = p * x2 + 1.485_722_357_179_79e-5;
    p = p * x2 + 6.372_619_288_754_36e-4;
    p = p * x2 + 4.893_524_558_917_86e-3;
    let mut q = 1.198_258_394_667_02e-6;
    q = q * x2 + 1.185_347_056_866_54e-4;
    q = q * x2 + 2.268_434_632_439_00e-3;
    q = q * x2 + 4.893_525_185_543_85e-3;
    x * p / q
}

/// `out = W2 tanh(W1 x + b1) + b2`, parameters stored flat as
/// `[W1 (hidden x in, row-major), b1, W2 (out x hidden), b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    in_dim: usize,
    hidden: usize,
    out_dim: usize,
    params: Vec<f64>,
}

/// Hidden activations of the last forward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize) -> Result<Self> {
        if in_dim == 0 || hidden == 0 || out_dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "layer sizes must be positive ({in_dim}, {hidden}, {out_dim})"
            )));
        }
        let n = hidden * in_dim + hidden + out_dim * hidden + out_dim;
        Ok(Self {
            in_dim,
            hidden,
            out_dim,
            params: vec![0.0; n],
        })
    }

    /// Uniform `±1/sqrt(fan_in)` initialisation for every weight and bias.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(in_dim, hidden, out_dim)?;
        let b1 = 1.0 / (in_dim as f64).sqrt();
        let b2 = 1.0 / (hidden as f64).sqrt();
        let split = hidden * in_dim + hidden;
        for (i, p) in net.params.iter_mut().enumerate() {
            let bound = if i < split { b1 } else { b2 };
            *p = rng.random_range(-bound..=bound);
        }
        Ok(net)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.in_dim;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.out_dim * self.hidden;
        (b1, w2, b2)
    }

    /// Set the layers explicitly; mostly useful for hand-built test networks.
    pub fn set_layers(&mut self, w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64]) -> Result<()> {
        let (o_b1, o_w2, o_b2) = self.offsets();
        let lens = [o_b1, self.hidden, self.out_dim * self.hidden, self.out_dim];
        for (given, want) in [w1.len(), b1.len(), w2.len(), b2.len()].into_iter().zip(lens) {
            if given != want {
                return Err(Error::DimensionMismatch {
                    expected: want,
                    got: given,
                });
            }
        }
        self.params[..o_b1].copy_from_slice(w1);
        self.params[o_b1..o_w2].copy_from_slice(b1);
        self.params[o_w2..o_b2].copy_from_slice(w2);
        self.params[o_b2..].copy_from_slice(b2);
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut trace = Trace::default();
        self.forward_trace(x, &mut trace);
        Ok(trace.output)
    }

    /// Scalar output of a single-output network. Panics on wrong input size.
    #[inline]
    pub fn forward_scalar(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        debug_assert_eq!(self.out_dim, 1);
        let (o_b1, o_w2, o_b2) = self.offsets();
        let (w1, rest) = self.params.split_at(o_b1);
        let b1 = &rest[..self.hidden];
        let w2 = &self.params[o_w2..o_b2];
        let mut out = self.params[o_b2];
        for k in 0..self.hidden {
            let row = &w1[k * self.in_dim..(k + 1) * self.in_dim];
            let a = b1[k] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            let h = tanh(a);
            hidden[k] = h;
            out += w2[k] * h;
        }
        out
    }

    /// Forward pass keeping the hidden activations for [`Mlp::backward`].
    /// Input size is the caller's responsibility.
    pub fn forward_trace(&self, x: &[f64], trace: &mut Trace) {
        let (o_b1, o_w2, o_b2) = self.offsets();
        trace.hidden.resize(self.hidden, 0.0);
        trace.output.clear();
        let w1 = &self.params[..o_b1];
        let b1 = &self.params[o_b1..o_w2];
        for k in 0..self.hidden {
            let row = &w1[k * self.in_dim..(k + 1) * self.in_dim];
            let a = b1[k] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            trace.hidden[k] = tanh(a);
        }
        let w2 = &self.params[o_w2..o_b2];
        let b2 = &self.params[o_b2..];
        for o in 0..self.out_dim {
            let row = &w2[o * self.hidden..(o + 1) * self.hidden];
            trace
                .output
                .push(b2[o] + row.iter().zip(&trace.hidden).map(|(w, h)| w * h).sum::<f64>());
        }
    }

    /// Accumulate `d loss / d params` into `grads` given `d loss / d output`.
    /// If `grad_input` is given, `d loss / d x` is accumulated into it too.
    pub fn backward(
        &self,
        x: &[f64],
        trace: &Trace,
        grad_output: &[f64],
        grads: &mut [f64],
        mut grad_input: Option<&mut [f64]>,
    ) {
        let (o_b1, o_w2, o_b2) = self.offsets();
        let w1 = &self.params[..o_b1];
        let w2 = &self.params[o_w2..o_b2];
        let (g_w1, rest) = grads.split_at_mut(o_b1);
        let (g_b1, rest) = rest.split_at_mut(self.hidden);
        let (g_w2, g_b2) = rest.split_at_mut(self.out_dim * self.hidden);
        for (o, &g) in grad_output.iter().enumerate() {
            g_b2[o] += g;
            for k in 0..self.hidden {
                g_w2[o * self.hidden + k] += g * trace.hidden[k];
            }
        }
        for k in 0..self.hidden {
            let mut dh = 0.0;
            for (o, &g) in grad_output.iter().enumerate() {
                dh += g * w2[o * self.hidden + k];
            }
            let h = trace.hidden[k];
            let da = dh * (1.0 - h * h);
            if da == 0.0 {
                continue;
            }
            g_b1[k] += da;
            let row = &mut g_w1[k * self.in_dim..(k + 1) * self.in_dim];
            for (g, &v) in row.iter_mut().zip(x) {
                *g += da * v;
            }
            if let Some(gi) = grad_input.as_deref_mut() {
                let wrow = &w1[k * self.in_dim..(k + 1) * self.in_dim];
                for (g, &w) in gi.iter_mut().zip(wrow) {
                    *g += da * w;
                }
            }
        }
    }

    /// Gradient of the scalar output with respect to the input,
    /// `W2 diag(1 - tanh^2(W1 x + b1)) W1`.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.out_dim != 1 {
            return Err(Error::InvalidArgument(
                "input gradient needs a scalar-output network".into(),
            ));
        }
        self.check_input(x)?;
        let mut trace = Trace::default();
        self.forward_trace(x, &mut trace);
        let mut g = vec![0.0; self.in_dim];
        let mut scratch = vec![0.0; self.params.len()];
        self.backward(x, &trace, &[1.0], &mut scratch, Some(&mut g));
        Ok(g)
    }

    /// Penalty `lambda (|grad_x D(x)| - 1)^2` at `x`, the gradient norm taken
    /// over the first `n_wrt` input coordinates only (the remaining inputs
    /// are conditioning). `scale * d penalty / d params` is accumulated into
    /// `grads`; the unscaled penalty is returned.
    pub fn penalty_at(
        &self,
        x: &[f64],
        n_wrt: usize,
        lambda: f64,
        scale: f64,
        grads: &mut [f64],
        hidden: &mut Vec<f64>,
    ) -> f64 {
        debug_assert_eq!(self.out_dim, 1);
        let (o_b1, o_w2, _) = self.offsets();
        let w1 = &self.params[..o_b1];
        let b1 = &self.params[o_b1..o_w2];
        let v = &self.params[o_w2..o_w2 + self.hidden];
        hidden.resize(self.hidden, 0.0);
        let mut g = [0.0f64; 8];
        let mut g_vec;
        let g: &mut [f64] = if n_wrt <= g.len() {
            &mut g[..n_wrt]
        } else {
            g_vec = vec![0.0; n_wrt];
            &mut g_vec
        };
        for k in 0..self.hidden {
            let row = &w1[k * self.in_dim..(k + 1) * self.in_dim];
            let t = tanh(b1[k] + row.iter().zip(x).map(|(w, xv)| w * xv).sum::<f64>());
            hidden[k] = t;
            let vs = v[k] * (1.0 - t * t);
            for (gj, w) in g.iter_mut().zip(row) {
                *gj += vs * w;
            }
        }
        let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        let penalty = lambda * (norm - 1.0).powi(2);
        if norm == 0.0 || scale == 0.0 {
            return penalty;
        }
        // r = d penalty / d g
        let coef = scale * 2.0 * lambda * (norm - 1.0) / norm;
        for gj in g.iter_mut() {
            *gj *= coef;
        }
        let r = &*g;
        let (g_w1, rest) = grads.split_at_mut(o_b1);
        let (g_b1, rest) = rest.split_at_mut(self.hidden);
        let g_v = &mut rest[..self.hidden];
        for k in 0..self.hidden {
            let t = hidden[k];
            let s = 1.0 - t * t;
            let row = &w1[k * self.in_dim..(k + 1) * self.in_dim];
            let proj: f64 = r.iter().zip(row).map(|(a, b)| a * b).sum();
            g_v[k] += s * proj;
            let q = v[k] * proj * (-2.0 * t * s);
            g_b1[k] += q;
            let grow = &mut g_w1[k * self.in_dim..(k + 1) * self.in_dim];
            for (j, gw) in grow.iter_mut().enumerate() {
                *gw += q * x[j];
                if j < n_wrt {
                    *gw += v[k] * s * r[j];
                }
            }
        }
        penalty
    }
}

/// WGAN-GP penalty at a random interpolate of `real` and `fake`.
///
/// The critic sees `[x, cond]`; the gradient norm is taken with respect to
/// `x` only. Returns the penalty and its gradient with respect to every
/// critic parameter.
pub fn gradient_penalty<R: Rng + ?Sized>(
    disc: &Mlp,
    real: &[f64],
    fake: &[f64],
    cond: &[f64],
    lambda: f64,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    if real.len() != fake.len() {
        return Err(Error::DimensionMismatch {
            expected: real.len(),
            got: fake.len(),
        });
    }
    if disc.out_dim() != 1 {
        return Err(Error::InvalidArgument("critic must have a scalar output".into()));
    }
    let u: f64 = rng.random();
    let mut input: Vec<f64> = real
        .iter()
        .zip(fake)
        .map(|(r, f)| u * r + (1.0 - u) * f)
        .collect();
    input.extend_from_slice(cond);
    disc.check_input(&input)?;
    let mut grads = vec![0.0; disc.num_params()];
    let mut hidden = Vec::new();
    let p = disc.penalty_at(&input, real.len(), lambda, 1.0, &mut grads, &mut hidden);
    Ok((p, grads))
}

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                got: params.len().min(grads.len()),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient component {i} is {}",
                grads[i]
            )));
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// `lr(epoch) = base_lr * gamma^floor(epoch / step_epochs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLrSchedule {
    pub base_lr: f64,
    pub gamma: f64,
    pub step_epochs: usize,
}

impl StepLrSchedule {
    pub fn new(base_lr: f64, gamma: f64, step_epochs: usize) -> Result<Self> {
        if !(base_lr > 0.0 && gamma > 0.0 && step_epochs > 0) {
            return Err(Error::InvalidArgument("invalid step schedule".into()));
        }
        Ok(Self {
            base_lr,
            gamma,
            step_epochs,
        })
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        self.base_lr * self.gamma.powi((epoch / self.step_epochs) as i32)
    }
}
