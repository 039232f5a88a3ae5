use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GaussianPosterior;
use crate::error::{Error, Result};
use crate::statdist::GroundTruthSet;

/// Lower bound on the fitted noise variance.
pub const MIN_NOISE_VAR: f64 = 1e-6;
const JITTERS: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

const RESTARTS: usize = 5;
const RESTART_STEPS: usize = 40;
const REFINE_STEPS: usize = 80;
const ASCENT_LR: f64 = 0.1;

/// RBF kernel `signal_var * exp(-|x - x'|^2 / (2 lengthscale^2))` plus
/// `noise_var` on the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub lengthscale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl GpHyper {
    fn validate(&self) -> Result<()> {
        let ok = [self.lengthscale, self.signal_var, self.noise_var]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid GP hyperparameters {self:?}")))
        }
    }

    fn to_log(self) -> [f64; 3] {
        [self.lengthscale.ln(), self.signal_var.ln(), self.noise_var.ln()]
    }

    fn from_log(p: [f64; 3]) -> Self {
        Self {
            lengthscale: p[0].exp(),
            signal_var: p[1].exp(),
            noise_var: p[2].exp(),
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn signal_matrix(x: &[Vec<f64>], h: &GpHyper) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    let mut d = DMatrix::zeros(n, n);
    let inv = 1.0 / (2.0 * h.lengthscale * h.lengthscale);
    for i in 0..n {
        for j in 0..=i {
            let dist = sq_dist(&x[i], &x[j]);
            let v = h.signal_var * (-dist * inv).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    (k, d)
}

/// Cholesky factor of `k + (noise + jitter) I`, escalating the jitter up to
/// 1e-6 before giving up.
fn factor(k: &DMatrix<f64>, noise: f64) -> Result<(DMatrix<f64>, f64)> {
    for jitter in JITTERS {
        let mut a = k.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += noise + jitter;
        }
        if let Some(c) = a.cholesky() {
            return Ok((c.l(), jitter));
        }
    }
    Err(Error::Cholesky(format!(
        "kernel matrix of size {} not positive definite (noise {noise})",
        k.nrows()
    )))
}

/// Solve `L z = b` in place for lower-triangular `L`.
fn forward_subst(l: &DMatrix<f64>, b: &mut [f64]) {
    for i in 0..b.len() {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * b[j];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Log marginal likelihood and its gradient with respect to
/// `(ln lengthscale, ln signal_var, ln noise_var)`.
pub fn log_marginal_likelihood(x: &[Vec<f64>], y: &[f64], h: &GpHyper) -> Result<(f64, [f64; 3])> {
    h.validate()?;
    let n = x.len();
    let (kf, d) = signal_matrix(x, h);
    let (l, _) = factor(&kf, h.noise_var)?;
    let chol = nalgebra::Cholesky::pack_dirty(l.clone());
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let log_det: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let lml = -0.5 * yv.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let k_inv = chol.inverse();
    let inv_l2 = 1.0 / (h.lengthscale * h.lengthscale);
    let mut grad = [0.0; 3];
    for i in 0..n {
        for j in 0..n {
            let w = alpha[i] * alpha[j] - k_inv[(i, j)];
            grad[0] += w * kf[(i, j)] * d[(i, j)] * inv_l2;
            grad[1] += w * kf[(i, j)];
        }
        grad[2] += (alpha[i] * alpha[i] - k_inv[(i, i)]) * h.noise_var;
    }
    for g in &mut grad {
        *g *= 0.5;
    }
    Ok((lml, grad))
}

/// Zero-mean Gaussian-process regression on per-sample means.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    x: Vec<Vec<f64>>,
    hyper: GpHyper,
    l: DMatrix<f64>,
    alpha: Vec<f64>,
}

impl GpSurrogate {
    /// Condition on `(x, y)` with fixed hyperparameters.
    pub fn with_hyper(x: Vec<Vec<f64>>, y: Vec<f64>, hyper: GpHyper) -> Result<Self> {
        hyper.validate()?;
        if x.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        let (kf, _) = signal_matrix(&x, &hyper);
        let (l, _) = factor(&kf, hyper.noise_var)?;
        let mut alpha = y;
        forward_subst(&l, &mut alpha);
        // back substitution with L^T
        for i in (0..alpha.len()).rev() {
            let mut s = alpha[i];
            for j in i + 1..alpha.len() {
                s -= l[(j, i)] * alpha[j];
            }
            alpha[i] = s / l[(i, i)];
        }
        Ok(Self { x, hyper, l, alpha })
    }

    /// Fit to the per-sample means of `m`, choosing hyperparameters by
    /// multi-start gradient ascent of the log marginal likelihood.
    pub fn fit(m: &GroundTruthSet) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        let x: Vec<Vec<f64>> = m.entries().iter().map(|e| e.theta.clone()).collect();
        let y: Vec<f64> = m.entries().iter().map(|e| e.mean()).collect();
        let hyper = optimise_hyper(&x, &y);
        Self::with_hyper(x, y, hyper)
    }

    pub fn hyper(&self) -> GpHyper {
        self.hyper
    }

    /// Predictive mean and standard deviation, observation noise included.
    pub fn predict(&self, theta: &[f64]) -> GaussianPosterior {
        let h = &self.hyper;
        let inv = 1.0 / (2.0 * h.lengthscale * h.lengthscale);
        let mut k: Vec<f64> = self
            .x
            .iter()
            .map(|xi| h.signal_var * (-sq_dist(xi, theta) * inv).exp())
            .collect();
        let mean = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        forward_subst(&self.l, &mut k);
        let explained: f64 = k.iter().map(|v| v * v).sum();
        let var = h.noise_var + (h.signal_var - explained).max(0.0);
        GaussianPosterior {
            mean,
            std: var.sqrt(),
        }
    }
}

fn optimise_hyper(x: &[Vec<f64>], y: &[f64]) -> GpHyper {
    let dim = x[0].len();
    let spread = (0..dim)
        .map(|j| {
            let (lo, hi) = x
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[j]), hi.max(p[j])));
            hi - lo
        })
        .fold(0.0, f64::max);
    let spread = if spread > 0.0 { spread } else { 1.0 };
    let power = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).max(1e-6);
    let lo = [(1e-3 * spread).ln(), (1e-6 * power).ln(), MIN_NOISE_VAR.ln()];
    let hi = [(1e3 * spread).ln(), (1e6 * power).ln(), (10.0 * power).ln().max(MIN_NOISE_VAR.ln())];
    let clamp = |p: &mut [f64; 3]| {
        for i in 0..3 {
            p[i] = p[i].clamp(lo[i], hi[i]);
        }
    };
    let objective = |p: &[f64; 3]| log_marginal_likelihood(x, y, &GpHyper::from_log(*p)).ok();

    let mut best: Option<([f64; 3], f64)> = None;
    let fractions = [0.05, 0.1, 0.25, 0.5, 1.0];
    for &frac in fractions.iter().take(RESTARTS) {
        let mut p = GpHyper {
            lengthscale: frac * spread,
            signal_var: power,
            noise_var: (1e-4 * power).max(MIN_NOISE_VAR),
        }
        .to_log();
        clamp(&mut p);
        if let Some((p, v)) = ascend(p, RESTART_STEPS, &objective, &clamp) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((p, v));
            }
        }
    }
    let start = best.map(|b| b.0).unwrap_or_else(|| {
        let mut p = GpHyper {
            lengthscale: 0.25 * spread,
            signal_var: power,
            noise_var: (1e-2 * power).max(MIN_NOISE_VAR),
        }
        .to_log();
        clamp(&mut p);
        p
    });
    let p = ascend(start, REFINE_STEPS, &objective, &clamp)
        .map(|r| r.0)
        .unwrap_or(start);
    GpHyper::from_log(p)
}

/// Adam ascent in log-parameter space; returns the best point visited.
fn ascend(
    mut p: [f64; 3],
    steps: usize,
    objective: &impl Fn(&[f64; 3]) -> Option<(f64, [f64; 3])>,
    clamp: &impl Fn(&mut [f64; 3]),
) -> Option<([f64; 3], f64)> {
    let mut m = [0.0; 3];
    let mut v = [0.0; 3];
    let mut best: Option<([f64; 3], f64)> = None;
    for t in 1..=steps {
        let Some((val, grad)) = objective(&p) else {
            break;
        };
        if !val.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            break;
        }
        if best.is_none_or(|(_, b)| val > b) {
            best = Some((p, val));
        }
        for i in 0..3 {
            m[i] = 0.9 * m[i] + 0.1 * grad[i];
            v[i] = 0.999 * v[i] + 0.001 * grad[i] * grad[i];
            let mh = m[i] / (1.0 - 0.9f64.powi(t as i32));
            let vh = v[i] / (1.0 - 0.999f64.powi(t as i32));
            p[i] += ASCENT_LR * mh / (vh.sqrt() + 1e-8);
        }
        clamp(&mut p);
    }
    best
}
