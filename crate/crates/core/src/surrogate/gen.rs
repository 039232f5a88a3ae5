use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{batches_per_epoch, Normalizer, PairData, ResponseScaling};
use crate::design::SearchSpace;
use crate::error::{Error, Result};
use crate::neural::{tanh, AdamState, Mlp, StepLrSchedule, Trace};
use crate::statdist::GroundTruthSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenTrainer {
    /// Conditional WGAN with gradient penalty.
    Wgan,
    /// Direct minimisation of the sample energy distance per θ; no critic.
    Energy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub critic_iters: usize,
    pub lambda_gp: f64,
    /// Constant Adam learning rate of the first fit.
    pub lr: f64,
    /// From the second outer iteration on, keep the previous weights and
    /// follow `warm_schedule` instead of the constant rate.
    pub warm_start: bool,
    pub warm_schedule: StepLrSchedule,
    pub batch_size: usize,
    pub max_batches_per_epoch: usize,
    /// Generated draws per θ in one energy-trainer step.
    pub energy_draws: usize,
    /// Adam `(beta1, beta2)` for generator and critic.
    pub adam_betas: (f64, f64),
    /// Critic learning rate as a multiple of the generator's.
    pub critic_lr_scale: f64,
    pub response_scaling: ResponseScaling,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            latent_dim: 10,
            hidden: 64,
            epochs: 100,
            critic_iters: 5,
            lambda_gp: 1.0,
            lr: 1e-3,
            warm_start: true,
            warm_schedule: StepLrSchedule {
                base_lr: 1e-1,
                gamma: 1e-1,
                step_epochs: 30,
            },
            batch_size: 64,
            max_batches_per_epoch: 8,
            energy_draws: 16,
            adam_betas: (0.9, 0.999),
            critic_lr_scale: 1.0,
            response_scaling: ResponseScaling::Asinh { rel_width: 1e-4 },
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::Config("generator sizes must be positive".into()));
        }
        if self.critic_iters == 0 || self.max_batches_per_epoch == 0 || self.energy_draws < 2 {
            return Err(Error::Config("invalid generator training schedule".into()));
        }
        if !(self.lr > 0.0 && self.lambda_gp >= 0.0 && self.critic_lr_scale > 0.0) {
            return Err(Error::Config("invalid generator learning rate or penalty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Fitted {
    generator: Mlp,
    critic: Option<Mlp>,
    norm: Normalizer,
}

/// Conditional generator `G(z, θ)` producing response draws at any θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeSurrogate {
    trainer: GenTrainer,
    cfg: GenConfig,
    space: SearchSpace,
    fitted: Option<Fitted>,
}

/// Latent draws shared across many θ, with their first-layer projection
/// precomputed.
#[derive(Debug, Clone)]
pub struct LatentBatch {
    /// `n x hidden`, row-major
    projected: Vec<f64>,
    n: usize,
}

impl LatentBatch {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

impl GenerativeSurrogate {
    pub fn new(space: SearchSpace, trainer: GenTrainer, cfg: GenConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            trainer,
            cfg,
            space,
            fitted: None,
        })
    }

    pub fn trainer(&self) -> GenTrainer {
        self.trainer
    }

    pub fn config(&self) -> &GenConfig {
        &self.cfg
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    pub fn generator(&self) -> Option<&Mlp> {
        self.fitted.as_ref().map(|f| &f.generator)
    }

    pub fn normalizer(&self) -> Option<&Normalizer> {
        self.fitted.as_ref().map(|f| &f.norm)
    }

    /// Fit on the ground-truth set. `outer_iter` is the 1-based iteration of
    /// the optimisation loop and selects between a fresh start and a warm
    /// start. A diverging fit is retried once from a fresh initialisation.
    pub fn fit<R: Rng + ?Sized>(
        &mut self,
        m: &GroundTruthSet,
        outer_iter: usize,
        rng: &mut R,
    ) -> Result<()> {
        if m.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        let norm = Normalizer::fit_with(&self.space, m, self.cfg.response_scaling)?;
        let data = PairData::new(&norm, m);
        let warm = self.cfg.warm_start && outer_iter >= 2 && self.fitted.is_some();
        let start = if warm {
            let prev = self.fitted.as_ref().expect("checked above");
            Some((prev.generator.clone(), prev.critic.clone()))
        } else {
            None
        };
        let result = match self.train(&data, start, rng) {
            Ok(nets) => Ok(nets),
            Err(Error::Diverged(_)) | Err(Error::NonFinite(_)) => self.train(&data, None, rng),
            Err(e) => Err(e),
        };
        let (generator, critic) = result.map_err(|e| Error::Diverged(e.to_string()))?;
        self.fitted = Some(Fitted {
            generator,
            critic,
            norm,
        });
        Ok(())
    }

    fn train<R: Rng + ?Sized>(
        &self,
        data: &PairData,
        start: Option<(Mlp, Option<Mlp>)>,
        rng: &mut R,
    ) -> Result<(Mlp, Option<Mlp>)> {
        let dim = self.space.dim();
        let warm = start.is_some();
        let (mut generator, critic) = match start {
            Some(nets) => nets,
            None => (
                Mlp::init(self.cfg.latent_dim + dim, self.cfg.hidden, 1, rng)?,
                None,
            ),
        };
        let lr_at = |epoch: usize| {
            if warm {
                self.cfg.warm_schedule.lr(epoch)
            } else {
                self.cfg.lr
            }
        };
        match self.trainer {
            GenTrainer::Wgan => {
                let mut critic = match critic {
                    Some(c) => c,
                    None => Mlp::init(1 + dim, self.cfg.hidden, 1, rng)?,
                };
                WganTrainer::new(&self.cfg, data, &generator, &critic).run(
                    &mut generator,
                    &mut critic,
                    lr_at,
                    rng,
                )?;
                Ok((generator, Some(critic)))
            }
            GenTrainer::Energy => {
                EnergyTrainer::new(&self.cfg, data, &generator).run(&mut generator, lr_at, rng)?;
                Ok((generator, None))
            }
        }
    }

    fn fitted(&self) -> Result<&Fitted> {
        self.fitted.as_ref().ok_or(Error::NotFitted)
    }

    /// `n` independent draws from the predicted response at `theta`.
    pub fn sample<R: Rng + ?Sized>(&self, theta: &[f64], n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let batch = self.latent_batch(n, rng)?;
        let mut out = Vec::with_capacity(n);
        self.sample_with(&batch, theta, &mut out)?;
        Ok(out)
    }

    /// Draw `n` latent vectors to be reused for every θ passed to
    /// [`GenerativeSurrogate::sample_with`].
    pub fn latent_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<LatentBatch> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be >= 1".into()));
        }
        let f = self.fitted()?;
        let g = &f.generator;
        let (h, inp, lat) = (g.hidden_dim(), g.in_dim(), self.cfg.latent_dim);
        let w1 = &g.params()[..h * inp];
        let mut projected = vec![0.0; n * h];
        let mut z = vec![0.0; lat];
        for row in projected.chunks_exact_mut(h) {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            for (k, out) in row.iter_mut().enumerate() {
                let wrow = &w1[k * inp..k * inp + lat];
                *out = wrow.iter().zip(&z).map(|(a, b)| a * b).sum();
            }
        }
        Ok(LatentBatch { projected, n })
    }

    /// Generate one draw per latent vector of `batch` at `theta`, in
    /// response units, appended to `out`.
    pub fn sample_with(&self, batch: &LatentBatch, theta: &[f64], out: &mut Vec<f64>) -> Result<()> {
        let f = self.fitted()?;
        if theta.len() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                got: theta.len(),
            });
        }
        let g = &f.generator;
        let (h, inp, lat) = (g.hidden_dim(), g.in_dim(), self.cfg.latent_dim);
        let p = g.params();
        let u = f.norm.theta(theta);
        let mut shift = vec![0.0; h];
        for (k, s) in shift.iter_mut().enumerate() {
            let wrow = &p[k * inp + lat..(k + 1) * inp];
            *s = p[h * inp + k] + wrow.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
        }
        let w2 = &p[h * inp + h..h * inp + 2 * h];
        let b2 = p[h * inp + 2 * h];
        for row in batch.projected.chunks_exact(h) {
            let mut y = b2;
            for k in 0..h {
                y += w2[k] * tanh(row[k] + shift[k]);
            }
            out.push(f.norm.y_inv(y));
        }
        Ok(())
    }
}

fn check_finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged(format!("{what} became {v}")))
    }
}

fn check_params(net: &Mlp, what: &str) -> Result<()> {
    if net.params().iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged(format!("{what} parameters are not finite")))
    }
}

fn adam(net: &Mlp, (beta1, beta2): (f64, f64)) -> AdamState {
    let mut a = AdamState::new(net.num_params());
    a.beta1 = beta1;
    a.beta2 = beta2;
    a
}

fn adam_step(adam: &mut AdamState, net: &mut Mlp, grads: &[f64], lr: f64) -> Result<()> {
    adam.step(net.params_mut(), grads, lr)
        .map_err(|e| Error::Diverged(e.to_string()))
}

struct WganTrainer<'a> {
    cfg: &'a GenConfig,
    data: &'a PairData,
    g_in: Vec<f64>,
    d_in: Vec<f64>,
    g_trace: Trace,
    d_trace: Trace,
    hidden: Vec<f64>,
    g_grads: Vec<f64>,
    d_grads: Vec<f64>,
    d_scratch: Vec<f64>,
    d_dx: Vec<f64>,
}

impl<'a> WganTrainer<'a> {
    fn new(cfg: &'a GenConfig, data: &'a PairData, g: &Mlp, d: &Mlp) -> Self {
        Self {
            cfg,
            data,
            g_in: vec![0.0; g.in_dim()],
            d_in: vec![0.0; d.in_dim()],
            g_trace: Trace::default(),
            d_trace: Trace::default(),
            hidden: vec![0.0; cfg.hidden],
            g_grads: vec![0.0; g.num_params()],
            d_grads: vec![0.0; d.num_params()],
            d_scratch: vec![0.0; d.num_params()],
            d_dx: vec![0.0; d.in_dim()],
        }
    }

    fn run<R: Rng + ?Sized>(
        &mut self,
        generator: &mut Mlp,
        critic: &mut Mlp,
        lr_at: impl Fn(usize) -> f64,
        rng: &mut R,
    ) -> Result<()> {
        let mut g_adam = adam(generator, self.cfg.adam_betas);
        let mut d_adam = adam(critic, self.cfg.adam_betas);
        let batches =
            batches_per_epoch(self.data.pairs.len(), self.cfg.batch_size, self.cfg.max_batches_per_epoch);
        for epoch in 0..self.cfg.epochs {
            let lr = lr_at(epoch);
            for _ in 0..batches {
                for _ in 0..self.cfg.critic_iters {
                    let loss = self.critic_grads(generator, critic, rng);
                    check_finite(loss, "critic loss")?;
                    adam_step(&mut d_adam, critic, &self.d_grads, lr * self.cfg.critic_lr_scale)?;
                }
                let loss = self.generator_grads(generator, critic, rng);
                check_finite(loss, "generator loss")?;
                adam_step(&mut g_adam, generator, &self.g_grads, lr)?;
            }
        }
        check_params(generator, "generator")?;
        check_params(critic, "critic")
    }

    /// Fill `g_in` with `[z, θ]` and return the generated value.
    fn generate<R: Rng + ?Sized>(&mut self, generator: &Mlp, theta: &[f64], rng: &mut R) -> f64 {
        let lat = self.cfg.latent_dim;
        for v in &mut self.g_in[..lat] {
            *v = StandardNormal.sample(rng);
        }
        self.g_in[lat..].copy_from_slice(theta);
        generator.forward_trace(&self.g_in, &mut self.g_trace);
        self.g_trace.output[0]
    }

    /// Gradients of `E[D(fake)] - E[D(real)] + penalty` into `d_grads`.
    fn critic_grads<R: Rng + ?Sized>(&mut self, generator: &Mlp, critic: &Mlp, rng: &mut R) -> f64 {
        self.d_grads.fill(0.0);
        let b = self.cfg.batch_size;
        let scale = 1.0 / b as f64;
        let mut loss = 0.0;
        for _ in 0..b {
            let (ti, real) = self.data.pairs[rng.random_range(0..self.data.pairs.len())];
            let theta = &self.data.thetas[ti];
            let fake = self.generate(generator, theta, rng);
            self.d_in[1..].copy_from_slice(theta);

            self.d_in[0] = real;
            critic.forward_trace(&self.d_in, &mut self.d_trace);
            loss -= scale * self.d_trace.output[0];
            critic.backward(&self.d_in, &self.d_trace, &[-scale], &mut self.d_grads, None);

            self.d_in[0] = fake;
            critic.forward_trace(&self.d_in, &mut self.d_trace);
            loss += scale * self.d_trace.output[0];
            critic.backward(&self.d_in, &self.d_trace, &[scale], &mut self.d_grads, None);

            let u: f64 = rng.random();
            self.d_in[0] = u * real + (1.0 - u) * fake;
            loss += scale
                * critic.penalty_at(
                    &self.d_in,
                    1,
                    self.cfg.lambda_gp,
                    scale,
                    &mut self.d_grads,
                    &mut self.hidden,
                );
        }
        loss
    }

    /// Gradients of `-E[D(G(z, θ), θ)]` into `g_grads`.
    fn generator_grads<R: Rng + ?Sized>(&mut self, generator: &Mlp, critic: &Mlp, rng: &mut R) -> f64 {
        self.g_grads.fill(0.0);
        let b = self.cfg.batch_size;
        let scale = 1.0 / b as f64;
        let mut loss = 0.0;
        for _ in 0..b {
            let (ti, _) = self.data.pairs[rng.random_range(0..self.data.pairs.len())];
            let theta = &self.data.thetas[ti];
            let fake = self.generate(generator, theta, rng);
            self.d_in[0] = fake;
            self.d_in[1..].copy_from_slice(theta);
            critic.forward_trace(&self.d_in, &mut self.d_trace);
            loss -= scale * self.d_trace.output[0];
            // only the input gradient is wanted; parameter grads go to scratch
            self.d_dx.fill(0.0);
            critic.backward(
                &self.d_in,
                &self.d_trace,
                &[-scale],
                &mut self.d_scratch,
                Some(&mut self.d_dx),
            );
            generator.backward(&self.g_in, &self.g_trace, &self.d_dx[..1], &mut self.g_grads, None);
        }
        loss
    }
}

struct EnergyTrainer<'a> {
    cfg: &'a GenConfig,
    data: &'a PairData,
    sorted_real: Vec<Vec<f64>>,
    g_in: Vec<f64>,
    traces: Vec<Trace>,
    inputs: Vec<Vec<f64>>,
    grads: Vec<f64>,
}

impl<'a> EnergyTrainer<'a> {
    fn new(cfg: &'a GenConfig, data: &'a PairData, g: &Mlp) -> Self {
        let sorted_real = data
            .samples
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.sort_by(f64::total_cmp);
                s
            })
            .collect();
        Self {
            cfg,
            data,
            sorted_real,
            g_in: vec![0.0; g.in_dim()],
            traces: vec![Trace::default(); cfg.energy_draws],
            inputs: vec![vec![0.0; g.in_dim()]; cfg.energy_draws],
            grads: vec![0.0; g.num_params()],
        }
    }

    fn run<R: Rng + ?Sized>(
        &mut self,
        generator: &mut Mlp,
        lr_at: impl Fn(usize) -> f64,
        rng: &mut R,
    ) -> Result<()> {
        let mut adam = AdamState::new(generator.num_params());
        let k = self.cfg.energy_draws;
        let thetas_per_step = (self.cfg.batch_size / k).max(1);
        let batches =
            batches_per_epoch(self.data.pairs.len(), self.cfg.batch_size, self.cfg.max_batches_per_epoch);
        for epoch in 0..self.cfg.epochs {
            let lr = lr_at(epoch);
            for _ in 0..batches {
                self.grads.fill(0.0);
                let mut loss = 0.0;
                for _ in 0..thetas_per_step {
                    let ti = rng.random_range(0..self.data.thetas.len());
                    loss += self.theta_grads(generator, ti, 1.0 / thetas_per_step as f64, rng);
                }
                check_finite(loss, "energy loss")?;
                adam_step(&mut adam, generator, &self.grads, lr)?;
            }
        }
        check_params(generator, "generator")
    }

    /// Accumulate `scale * d D^2(real, generated) / d params` for one θ.
    fn theta_grads<R: Rng + ?Sized>(&mut self, generator: &Mlp, ti: usize, scale: f64, rng: &mut R) -> f64 {
        let k = self.cfg.energy_draws;
        let lat = self.cfg.latent_dim;
        let theta = &self.data.thetas[ti];
        let real = &self.sorted_real[ti];
        let n = real.len() as f64;
        let mut ys = vec![0.0; k];
        for i in 0..k {
            for v in &mut self.g_in[..lat] {
                *v = StandardNormal.sample(rng);
            }
            self.g_in[lat..].copy_from_slice(theta);
            self.inputs[i].copy_from_slice(&self.g_in);
            generator.forward_trace(&self.inputs[i], &mut self.traces[i]);
            ys[i] = self.traces[i].output[0];
        }
        let kf = k as f64;
        let mut cross = 0.0;
        let mut within = 0.0;
        for i in 0..k {
            let y = ys[i];
            let below = real.partition_point(|&x| x < y) as f64;
            let above = (real.len() - real.partition_point(|&x| x <= y)) as f64;
            let mut sign_within = 0.0;
            for (j, &y2) in ys.iter().enumerate() {
                if j != i {
                    sign_within += sign(y - y2);
                    within += (y - y2).abs();
                }
            }
            cross += real.iter().map(|x| (x - y).abs()).sum::<f64>();
            let d = 2.0 / (n * kf) * (below - above) - 2.0 / (kf * (kf - 1.0)) * sign_within;
            generator.backward(&self.inputs[i], &self.traces[i], &[scale * d], &mut self.grads, None);
        }
        let real_within = within_u(real);
        scale * (2.0 * cross / (n * kf) - within / (kf * (kf - 1.0)) - real_within)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn within_u(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let s: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| x * (2.0 * k as f64 - nf + 1.0))
        .sum();
    2.0 * s / (nf * (nf - 1.0))
}
