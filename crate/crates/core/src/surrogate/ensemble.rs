use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{batches_per_epoch, GaussianPosterior, Normalizer, PairData};
use crate::design::SearchSpace;
use crate::error::{Error, Result};
use crate::neural::{AdamState, Mlp, StepLrSchedule, Trace};
use crate::statdist::GroundTruthSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub members: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub schedule: StepLrSchedule,
    pub batch_size: usize,
    pub max_batches_per_epoch: usize,
    /// Train every member from the same seed (a degenerate ensemble).
    pub identical_members: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            members: 10,
            hidden: 16,
            epochs: 100,
            schedule: StepLrSchedule {
                base_lr: 1e-1,
                gamma: 1e-1,
                step_epochs: 6,
            },
            batch_size: 64,
            max_batches_per_epoch: 8,
            identical_members: false,
        }
    }
}

/// Independently seeded regressors on raw `(θ, x)` pairs; their spread is
/// the predictive uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSurrogate {
    members: Vec<Mlp>,
    norm: Normalizer,
}

impl EnsembleSurrogate {
    pub fn fit<R: Rng + ?Sized>(
        space: &SearchSpace,
        m: &GroundTruthSet,
        cfg: &EnsembleConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        if cfg.members == 0 || cfg.hidden == 0 || cfg.batch_size == 0 {
            return Err(Error::Config("ensemble sizes must be positive".into()));
        }
        let norm = Normalizer::fit(space, m)?;
        let data = PairData::new(&norm, m);
        let shared: u64 = rng.random();
        let seeds: Vec<u64> = (0..cfg.members)
            .map(|_| if cfg.identical_members { shared } else { rng.random() })
            .collect();
        let mut members = Vec::with_capacity(cfg.members);
        for seed in seeds {
            let member = train_member(&data, space.dim(), cfg, seed).or_else(|_| {
                train_member(&data, space.dim(), cfg, seed.wrapping_add(0x9e37_79b9))
            })?;
            members.push(member);
        }
        Ok(Self { members, norm })
    }

    pub fn members(&self) -> &[Mlp] {
        &self.members
    }

    /// Mean and population standard deviation of the member predictions.
    pub fn predict(&self, theta: &[f64]) -> GaussianPosterior {
        let u = self.norm.theta(theta);
        let mut hidden = vec![0.0; self.members[0].hidden_dim()];
        let preds: Vec<f64> = self
            .members
            .iter()
            .map(|net| self.norm.y_inv(net.forward_scalar(&u, &mut hidden)))
            .collect();
        let n = preds.len() as f64;
        // shift by the first member so identical members give exactly zero
        let p0 = preds[0];
        let shift = preds.iter().map(|p| p - p0).sum::<f64>() / n;
        let var = preds.iter().map(|p| (p - p0 - shift).powi(2)).sum::<f64>() / n;
        GaussianPosterior {
            mean: p0 + shift,
            std: var.sqrt(),
        }
    }
}

fn train_member(data: &PairData, dim: usize, cfg: &EnsembleConfig, seed: u64) -> Result<Mlp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::init(dim, cfg.hidden, 1, &mut rng)?;
    let mut adam = AdamState::new(net.num_params());
    let mut grads = vec![0.0; net.num_params()];
    let mut trace = Trace::default();
    let batches = batches_per_epoch(data.pairs.len(), cfg.batch_size, cfg.max_batches_per_epoch);
    let scale = 1.0 / cfg.batch_size as f64;
    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.lr(epoch);
        for _ in 0..batches {
            grads.fill(0.0);
            let mut loss = 0.0;
            for _ in 0..cfg.batch_size {
                let (ti, y) = data.pairs[rng.random_range(0..data.pairs.len())];
                let x = &data.thetas[ti];
                net.forward_trace(x, &mut trace);
                let r = trace.output[0] - y;
                loss += scale * r * r;
                net.backward(x, &trace, &[2.0 * scale * r], &mut grads, None);
            }
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("ensemble member loss {loss}")));
            }
            adam.step(net.params_mut(), &grads, lr)
                .map_err(|e| Error::Diverged(e.to_string()))?;
        }
    }
    Ok(net)
}
