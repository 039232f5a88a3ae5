//! Outer optimisation loops: the generative Wasserstein-uncertainty loop
//! and the Gaussian-posterior baselines (EGO and LCB), sharing stopping
//! rules and history recording.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{ei_gaussian, ei_mc, lcb, wu_regret, AcquisitionConfig, AcquisitionKind};
use crate::blackbox::BlackBoxSpec;
use crate::design::{build_candidates, lhs_init, CandidateKind, CandidateSet};
use crate::error::{Error, Result};
use crate::statdist::{same_point, GroundTruthSet, SortedSample};
use crate::surrogate::{
    EnsembleConfig, EnsembleSurrogate, GaussianPosterior, GenConfig, GenTrainer,
    GenerativeSurrogate, GpSurrogate, SurrogateKind,
};

pub const DEFAULT_BUDGET: usize = 100;
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Independent random streams of one run.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Candidates = 1,
    Init = 2,
    Simulator = 3,
    Surrogate = 4,
    Acquisition = 5,
}

fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub kind: CandidateKind,
    /// Points per axis for a grid, total count for a fixed LHS set.
    pub size: usize,
}

impl CandidateConfig {
    /// 101 x 101 grid in two dimensions, 101^2 fixed LHS points otherwise.
    pub fn default_for(dim: usize) -> Self {
        if dim == 2 {
            Self {
                kind: CandidateKind::Grid2D,
                size: 101,
            }
        } else {
            Self {
                kind: CandidateKind::LhsFixed,
                size: 101 * 101,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub blackbox: BlackBoxSpec,
    pub n_init: usize,
    pub n_sample: usize,
    pub candidates: CandidateConfig,
    pub acquisition: AcquisitionConfig,
    pub surrogate: SurrogateKind,
    /// Simulator calls allowed after the initial design.
    pub budget: usize,
    /// Radius of an ε-solution in parameter space.
    pub epsilon: f64,
    /// Stop as soon as an ε-solution has been evaluated.
    pub stop_at_solution: bool,
    pub seed: u64,
    pub gen: GenConfig,
    pub ensemble: EnsembleConfig,
}

impl RunConfig {
    pub fn new(blackbox: BlackBoxSpec, surrogate: SurrogateKind, acquisition: AcquisitionConfig) -> Self {
        let candidates = CandidateConfig::default_for(blackbox.dim());
        Self {
            blackbox,
            n_init: 4,
            n_sample: 100,
            candidates,
            acquisition,
            surrogate,
            budget: DEFAULT_BUDGET,
            epsilon: DEFAULT_EPSILON,
            stop_at_solution: true,
            seed: 0,
            gen: GenConfig::default(),
            ensemble: EnsembleConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.acquisition.validate()?;
        self.gen.validate()?;
        if self.n_init == 0 || self.n_sample == 0 {
            return Err(Error::Config("n_init and n_sample must be >= 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        let generative = self.surrogate.is_generative();
        let ok = match self.acquisition.kind {
            AcquisitionKind::WuRegret | AcquisitionKind::EiMc => generative,
            AcquisitionKind::Lcb | AcquisitionKind::EiGaussian => !generative,
        };
        if !ok {
            return Err(Error::Config(format!(
                "acquisition {:?} is not available with surrogate {}",
                self.acquisition.kind, self.surrogate
            )));
        }
        Ok(())
    }
}

/// One loop iteration: the chosen point and what the model said about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub theta: Vec<f64>,
    /// Surrogate objective estimate at `theta`.
    pub predicted: f64,
    /// Wasserstein uncertainty or posterior standard deviation at `theta`.
    pub uncertainty: f64,
    pub acquisition: f64,
    /// Mean of the simulator response obtained at `theta`.
    pub observed_mean: f64,
    /// Distance to the optimum of the best evaluated point so far.
    pub best_distance: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    EpsSolved { iteration: usize },
    BudgetExhausted,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub blackbox: String,
    pub method: String,
    pub seed: u64,
    pub budget: usize,
    pub init_thetas: Vec<Vec<f64>>,
    /// Best distance to the optimum over the initial design.
    pub init_distance: f64,
    pub iterations: Vec<IterationRecord>,
    pub status: RunStatus,
}

impl RunRecord {
    /// Running-minimum distance: entry 0 after the initial design, entry `k`
    /// after the `k`-th simulator call of the loop.
    pub fn distance_series(&self) -> Vec<f64> {
        std::iter::once(self.init_distance)
            .chain(self.iterations.iter().map(|r| r.best_distance))
            .collect()
    }

    /// Running-minimum distance after `k` loop calls, carrying the last
    /// value forward for runs that stopped early.
    pub fn distance_at(&self, k: usize) -> f64 {
        let series = self.distance_series();
        series[k.min(series.len() - 1)]
    }

    pub fn solved(&self) -> bool {
        matches!(self.status, RunStatus::EpsSolved { .. })
    }

    /// All evaluated points in evaluation order.
    pub fn evaluated(&self) -> Vec<Vec<f64>> {
        self.init_thetas
            .iter()
            .cloned()
            .chain(self.iterations.iter().map(|r| r.theta.clone()))
            .collect()
    }

    /// JSON with wall-clock fields zeroed; identical for identical
    /// `(config, seed)`.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        for it in &mut copy.iterations {
            it.elapsed_s = 0.0;
        }
        serde_json::to_string(&copy).expect("record serialises")
    }
}

/// Index of the first evaluated point lying within `epsilon` of an optimum.
pub fn check_eps_solution(blackbox: &BlackBoxSpec, evaluated: &[Vec<f64>], epsilon: f64) -> Option<usize> {
    evaluated.iter().position(|t| {
        blackbox
            .distance_to_optimum(t)
            .map(|d| d <= epsilon)
            .unwrap_or(false)
    })
}

/// Lowest-index argmin of `f_hat - kappa * sigma` over the candidates that
/// are not excluded.
pub fn argmin_regret(f_hat: &[f64], sigma: &[f64], kappa: f64, excluded: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..f_hat.len() {
        if excluded.get(i).copied().unwrap_or(false) {
            continue;
        }
        let r = wu_regret(f_hat[i], sigma[i], kappa);
        if best.is_none_or(|(_, b)| r < b) {
            best = Some((i, r));
        }
    }
    best.map(|b| b.0)
}

/// Candidate picked by one acquisition pass.
#[derive(Debug, Clone, Copy)]
struct Choice {
    index: usize,
    predicted: f64,
    uncertainty: f64,
    score: f64,
}

struct Loop<'a> {
    cfg: &'a RunConfig,
    candidates: CandidateSet,
    excluded: Vec<bool>,
    m: GroundTruthSet,
    sim_rng: ChaCha8Rng,
    record: RunRecord,
    best_distance: f64,
}

impl<'a> Loop<'a> {
    fn init(cfg: &'a RunConfig, method: String) -> Result<Self> {
        cfg.validate()?;
        let space = &cfg.blackbox.space;
        let candidates = build_candidates(
            space,
            cfg.candidates.kind,
            cfg.candidates.size,
            &mut stream(cfg.seed, Stream::Candidates),
        )?;
        let init = lhs_init(space, cfg.n_init, &mut stream(cfg.seed, Stream::Init));
        let mut sim_rng = stream(cfg.seed, Stream::Simulator);
        let mut m = GroundTruthSet::new();
        for theta in &init {
            m.push(cfg.blackbox.simulate(theta, cfg.n_sample, &mut sim_rng)?)?;
        }
        let excluded = candidates
            .points
            .iter()
            .map(|c| init.iter().any(|t| same_point(c, t)))
            .collect();
        let best_distance = init
            .iter()
            .map(|t| cfg.blackbox.distance_to_optimum(t))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let status = if best_distance <= cfg.epsilon {
            RunStatus::EpsSolved { iteration: 0 }
        } else {
            RunStatus::BudgetExhausted
        };
        let record = RunRecord {
            blackbox: cfg.blackbox.name(),
            method,
            seed: cfg.seed,
            budget: cfg.budget,
            init_thetas: init,
            init_distance: best_distance,
            iterations: Vec::new(),
            status,
        };
        Ok(Self {
            cfg,
            candidates,
            excluded,
            m,
            sim_rng,
            record,
            best_distance,
        })
    }

    fn done(&self) -> bool {
        self.cfg.stop_at_solution && self.record.solved()
    }

    /// Simulate the chosen candidate and log the iteration.
    fn commit(&mut self, iteration: usize, choice: Choice, started: Instant) -> Result<()> {
        let theta = self.candidates.points[choice.index].clone();
        self.excluded[choice.index] = true;
        let sample = self
            .cfg
            .blackbox
            .simulate(&theta, self.cfg.n_sample, &mut self.sim_rng)?;
        let observed_mean = sample.mean();
        self.m.push(sample)?;
        let d = self.cfg.blackbox.distance_to_optimum(&theta)?;
        self.best_distance = self.best_distance.min(d);
        if d <= self.cfg.epsilon && !self.record.solved() {
            self.record.status = RunStatus::EpsSolved { iteration };
        }
        self.record.iterations.push(IterationRecord {
            iteration,
            theta,
            predicted: choice.predicted,
            uncertainty: choice.uncertainty,
            acquisition: choice.score,
            observed_mean,
            best_distance: self.best_distance,
            elapsed_s: started.elapsed().as_secs_f64(),
        });
        Ok(())
    }

    fn fail(mut self, err: Error) -> RunRecord {
        self.record.status = RunStatus::Failed {
            reason: err.to_string(),
        };
        self.record
    }

    fn run(mut self, mut choose: impl FnMut(&mut Self, usize) -> Result<Choice>) -> RunRecord {
        for iteration in 1..=self.cfg.budget {
            if self.done() {
                break;
            }
            let started = Instant::now();
            let choice = match choose(&mut self, iteration).or_else(|_| choose(&mut self, iteration)) {
                Ok(c) => c,
                Err(e) => return self.fail(e),
            };
            if let Err(e) = self.commit(iteration, choice, started) {
                return self.fail(e);
            }
        }
        self.record
    }
}

fn method_name(cfg: &RunConfig) -> String {
    let acq = match cfg.acquisition.kind {
        AcquisitionKind::WuRegret => "wugo",
        AcquisitionKind::Lcb => "lcb",
        AcquisitionKind::EiMc | AcquisitionKind::EiGaussian => "ego",
    };
    let sur = match cfg.surrogate {
        SurrogateKind::WganGp => "wgan",
        SurrogateKind::EnergyGen => "energy",
        SurrogateKind::Gp => "gp",
        SurrogateKind::DeepEnsemble => "de",
    };
    format!("{acq}_{sur}")
}

/// Run whichever loop the configured surrogate calls for.
pub fn run(cfg: &RunConfig) -> Result<RunRecord> {
    if cfg.surrogate.is_generative() {
        run_wugo(cfg)
    } else {
        run_baseline(cfg)
    }
}

/// Generative-surrogate loop: fit `G` on the ground truths, score every
/// unevaluated candidate by `mean(G(θ)) - kappa * min_M D(μ, G(θ))`, simulate
/// the minimiser and repeat.
pub fn run_wugo(cfg: &RunConfig) -> Result<RunRecord> {
    if !cfg.surrogate.is_generative() {
        return Err(Error::Config(format!("{} is not a generative surrogate", cfg.surrogate)));
    }
    let trainer = match cfg.surrogate {
        SurrogateKind::EnergyGen => GenTrainer::Energy,
        _ => GenTrainer::Wgan,
    };
    let lp = Loop::init(cfg, method_name(cfg))?;
    let mut gen = GenerativeSurrogate::new(cfg.blackbox.space.clone(), trainer, cfg.gen.clone())?;
    let mut fit_rng = stream(cfg.seed, Stream::Surrogate);
    let mut acq_rng = stream(cfg.seed, Stream::Acquisition);
    Ok(lp.run(|lp, iteration| {
        gen.fit(&lp.m, iteration, &mut fit_rng)?;
        score_generative(lp, &gen, &mut acq_rng)
    }))
}

fn score_generative(lp: &Loop<'_>, gen: &GenerativeSurrogate, rng: &mut ChaCha8Rng) -> Result<Choice> {
    let acq = &lp.cfg.acquisition;
    let kappa = acq.kappa;
    let n = match acq.kind {
        AcquisitionKind::EiMc => acq.mc_samples,
        _ => lp.cfg.n_sample,
    };
    let batch = gen.latent_batch(n, rng)?;
    let f_min = lp.m.best_mean().ok_or(Error::EmptyGroundTruth)?;
    let mut buf = Vec::with_capacity(n);
    let mut best: Option<Choice> = None;
    for (i, theta) in lp.candidates.points.iter().enumerate() {
        if lp.excluded[i] {
            continue;
        }
        buf.clear();
        gen.sample_with(&batch, theta, &mut buf)?;
        let f_hat = buf.iter().sum::<f64>() / n as f64;
        if !f_hat.is_finite() {
            return Err(Error::NonFinite(format!("generated mean at {theta:?}")));
        }
        match acq.kind {
            AcquisitionKind::EiMc => {
                let ei = ei_mc(&buf, f_min)?;
                if best.is_none_or(|b| ei > b.score) {
                    best = Some(Choice {
                        index: i,
                        predicted: f_hat,
                        uncertainty: f64::NAN,
                        score: ei,
                    });
                }
            }
            _ => {
                if let Some(b) = best {
                    if kappa == 0.0 && f_hat >= b.score {
                        continue;
                    }
                    if kappa > 0.0 {
                        // prune with a bound built from mean and spread only
                        let mad = buf.iter().map(|v| (v - f_hat).abs()).sum::<f64>() / n as f64;
                        let ub = lp.m.uncertainty_summary_bound(f_hat, mad)?;
                        if wu_regret(f_hat, ub * (1.0 + 1e-9), kappa) >= b.score {
                            continue;
                        }
                    }
                }
                let sigma = if kappa > 0.0 {
                    lp.m.nearest(&SortedSample::new(&buf)?)?.1
                } else {
                    0.0
                };
                let r = wu_regret(f_hat, sigma, kappa);
                if best.is_none_or(|b| r < b.score) {
                    best = Some(Choice {
                        index: i,
                        predicted: f_hat,
                        uncertainty: sigma,
                        score: r,
                    });
                }
            }
        }
    }
    let mut choice = best.ok_or_else(|| Error::InvalidArgument("no candidates left".into()))?;
    if choice.uncertainty.is_nan() || (kappa == 0.0 && acq.kind == AcquisitionKind::WuRegret) {
        buf.clear();
        gen.sample_with(&batch, &lp.candidates.points[choice.index], &mut buf)?;
        choice.uncertainty = lp.m.nearest(&SortedSample::new(&buf)?)?.1;
    }
    Ok(choice)
}

/// EGO or LCB over a Gaussian-posterior surrogate (GP or deep ensemble).
pub fn run_baseline(cfg: &RunConfig) -> Result<RunRecord> {
    if cfg.surrogate.is_generative() {
        return Err(Error::Config(format!("{} is not a posterior surrogate", cfg.surrogate)));
    }
    let lp = Loop::init(cfg, method_name(cfg))?;
    let mut fit_rng = stream(cfg.seed, Stream::Surrogate);
    Ok(lp.run(|lp, _| {
        let predict: Box<dyn Fn(&[f64]) -> GaussianPosterior> = match lp.cfg.surrogate {
            SurrogateKind::Gp => {
                let gp = GpSurrogate::fit(&lp.m)?;
                Box::new(move |t| gp.predict(t))
            }
            _ => {
                let de = EnsembleSurrogate::fit(&lp.cfg.blackbox.space, &lp.m, &lp.cfg.ensemble, &mut fit_rng)?;
                Box::new(move |t| de.predict(t))
            }
        };
        score_posterior(lp, predict.as_ref())
    }))
}

fn score_posterior(lp: &Loop<'_>, predict: &dyn Fn(&[f64]) -> GaussianPosterior) -> Result<Choice> {
    let acq = &lp.cfg.acquisition;
    let f_min = lp.m.best_mean().ok_or(Error::EmptyGroundTruth)?;
    let mut best: Option<Choice> = None;
    for (i, theta) in lp.candidates.points.iter().enumerate() {
        if lp.excluded[i] {
            continue;
        }
        let post = predict(theta);
        if !(post.mean.is_finite() && post.std.is_finite()) {
            return Err(Error::NonFinite(format!("posterior at {theta:?}")));
        }
        // scores are oriented so that larger is better
        let (score, better) = match acq.kind {
            AcquisitionKind::Lcb => {
                let r = lcb(&post, acq.kappa);
                (r, best.is_none_or(|b| r < b.score))
            }
            _ => {
                let ei = ei_gaussian(&post, f_min);
                (ei, best.is_none_or(|b| ei > b.score))
            }
        };
        if better {
            best = Some(Choice {
                index: i,
                predicted: post.mean,
                uncertainty: post.std,
                score,
            });
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no candidates left".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_check_examples() {
        let camel = BlackBoxSpec::three_hump_camel();
        assert_eq!(check_eps_solution(&camel, &[], 0.1), None);
        assert_eq!(
            check_eps_solution(&camel, &[vec![3.0, 3.0], vec![0.0, 0.0]], 0.1),
            Some(1)
        );
        assert_eq!(check_eps_solution(&camel, &[vec![0.05, 0.05]], 0.1), Some(0));
        assert_eq!(check_eps_solution(&camel, &[vec![0.1, 0.1]], 0.1), None);
    }

    #[test]
    fn zero_uncertainty_reduces_to_argmin_of_mean() {
        let f = [3.0, -1.0, 2.0, -1.0, 0.5];
        let s = [0.0; 5];
        assert_eq!(argmin_regret(&f, &s, 2.0, &[false; 5]), Some(1));
        assert_eq!(argmin_regret(&f, &s, 2.0, &[false, true, false, false, false]), Some(3));
        assert_eq!(argmin_regret(&f, &[0.0, 0.0, 5.0, 0.0, 0.0], 2.0, &[false; 5]), Some(2));
        assert_eq!(argmin_regret(&f, &s, 2.0, &[true; 5]), None);
    }

    #[test]
    fn config_validation() {
        let camel = BlackBoxSpec::three_hump_camel();
        let bad = RunConfig::new(
            camel.clone(),
            SurrogateKind::Gp,
            AcquisitionConfig::new(AcquisitionKind::WuRegret),
        );
        assert!(bad.validate().is_err());
        let mut cfg = RunConfig::new(camel, SurrogateKind::Gp, AcquisitionConfig::new(AcquisitionKind::Lcb));
        assert!(cfg.validate().is_ok());
        cfg.epsilon = 0.0;
        assert!(cfg.validate().is_err());
    }
}
