//! Surrogates fitted on the ground-truth set: a conditional generative
//! model (adversarial or energy-score trained), Gaussian-process regression
//! and a deep ensemble.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::SearchSpace;
use crate::error::{Error, Result};
use crate::statdist::GroundTruthSet;

mod ensemble;
mod gen;
mod gp;

pub use ensemble::{EnsembleConfig, EnsembleSurrogate};
pub use gen::{GenConfig, GenTrainer, GenerativeSurrogate, LatentBatch};
pub use gp::{log_marginal_likelihood, GpHyper, GpSurrogate};

/// Gaussian predictive distribution at one design point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPosterior {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurrogateKind {
    WganGp,
    EnergyGen,
    Gp,
    DeepEnsemble,
}

impl SurrogateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::WganGp => "wgan_gp",
            Self::EnergyGen => "energy_gen",
            Self::Gp => "gp",
            Self::DeepEnsemble => "deep_ensemble",
        }
    }

    pub fn is_generative(&self) -> bool {
        matches!(self, Self::WganGp | Self::EnergyGen)
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wgan_gp" => Ok(Self::WganGp),
            "energy_gen" => Ok(Self::EnergyGen),
            "gp" => Ok(Self::Gp),
            "deep_ensemble" | "de" => Ok(Self::DeepEnsemble),
            _ => Err(Error::UnknownName {
                kind: "surrogate",
                name: s.into(),
            }),
        }
    }
}

/// How responses are mapped before standardisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ResponseScaling {
    /// Identity.
    Linear,
    /// `asinh((y - min y) / w)` with `w = rel_width * std(y)`: linear within
    /// `w` of the best observed value, logarithmic far above it.
    Asinh { rel_width: f64 },
}

/// Maps θ onto `[-1, 1]^m` and responses through `scaling`, then
/// standardises with the global mean and std over every value in the
/// ground-truth set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub space: SearchSpace,
    pub scaling: ResponseScaling,
    pub y_shift: f64,
    pub y_width: f64,
    pub y_mean: f64,
    pub y_std: f64,
}

/// Transformed values beyond this are clamped before inversion.
const MAX_ASINH: f64 = 40.0;

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 && std.is_finite() { std } else { 1.0 })
}

impl Normalizer {
    /// Linear standardisation.
    pub fn fit(space: &SearchSpace, m: &GroundTruthSet) -> Result<Self> {
        Self::fit_with(space, m, ResponseScaling::Linear)
    }

    pub fn fit_with(space: &SearchSpace, m: &GroundTruthSet, scaling: ResponseScaling) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        let raw: Vec<f64> = m.entries().iter().flat_map(|e| e.values.iter().copied()).collect();
        let (raw_mean, raw_std) = mean_std(&raw);
        if !raw_mean.is_finite() {
            return Err(Error::NonFinite("response mean".into()));
        }
        let mut norm = Self {
            space: space.clone(),
            scaling,
            y_shift: 0.0,
            y_width: 1.0,
            y_mean: raw_mean,
            y_std: raw_std,
        };
        if let ResponseScaling::Asinh { rel_width } = scaling {
            if !(rel_width > 0.0 && rel_width.is_finite()) {
                return Err(Error::Config(format!("asinh width must be > 0, got {rel_width}")));
            }
            norm.y_shift = raw.iter().copied().fold(f64::INFINITY, f64::min);
            norm.y_width = rel_width * raw_std;
            let t: Vec<f64> = raw.iter().map(|&y| norm.forward(y)).collect();
            (norm.y_mean, norm.y_std) = mean_std(&t);
        }
        Ok(norm)
    }

    fn forward(&self, y: f64) -> f64 {
        match self.scaling {
            ResponseScaling::Linear => y,
            ResponseScaling::Asinh { .. } => ((y - self.y_shift) / self.y_width).asinh(),
        }
    }

    pub fn theta(&self, theta: &[f64]) -> Vec<f64> {
        self.space.to_unit(theta)
    }

    pub fn y(&self, y: f64) -> f64 {
        (self.forward(y) - self.y_mean) / self.y_std
    }

    pub fn y_inv(&self, z: f64) -> f64 {
        let t = z * self.y_std + self.y_mean;
        match self.scaling {
            ResponseScaling::Linear => t,
            ResponseScaling::Asinh { .. } => {
                self.y_shift + self.y_width * t.clamp(-MAX_ASINH, MAX_ASINH).sinh()
            }
        }
    }
}

/// Flattened `(normalised θ, standardised response)` training pairs.
#[derive(Debug, Clone)]
pub(crate) struct PairData {
    pub thetas: Vec<Vec<f64>>,
    /// `(theta index, standardised value)`
    pub pairs: Vec<(usize, f64)>,
    /// per-theta standardised samples
    pub samples: Vec<Vec<f64>>,
}

impl PairData {
    pub fn new(norm: &Normalizer, m: &GroundTruthSet) -> Self {
        let thetas: Vec<Vec<f64>> = m.entries().iter().map(|e| norm.theta(&e.theta)).collect();
        let samples: Vec<Vec<f64>> = m
            .entries()
            .iter()
            .map(|e| e.values.iter().map(|&v| norm.y(v)).collect())
            .collect();
        let pairs = samples
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&v| (i, v)))
            .collect();
        Self {
            thetas,
            pairs,
            samples,
        }
    }
}

/// Minibatches per epoch: one pass over the pairs, capped.
pub(crate) fn batches_per_epoch(n_pairs: usize, batch: usize, cap: usize) -> usize {
    n_pairs.div_ceil(batch).clamp(1, cap.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::ResponseSample;

    #[test]
    fn normalisation_round_trip() {
        let space = SearchSpace::new(vec![(-5.0, 5.0); 2]).unwrap();
        let mut m = GroundTruthSet::new();
        m.push(ResponseSample::new(vec![0.0, 1.0], vec![1.0, 2.0, 3.0]).unwrap())
            .unwrap();
        m.push(ResponseSample::new(vec![2.0, 1.0], vec![10.0, 11.0]).unwrap())
            .unwrap();
        let n = Normalizer::fit(&space, &m).unwrap();
        let a = Normalizer::fit_with(&space, &m, ResponseScaling::Asinh { rel_width: 1e-3 }).unwrap();
        for y in [-3.0, 0.0, 1.0, 2.5, 11.0, 1e4] {
            assert!((a.y_inv(a.y(y)) - y).abs() <= 1e-12 * y.abs().max(1.0), "{y}");
        }
        assert!(a.y(1.0) < a.y(1.5) && a.y(1.5) < a.y(11.0));
        for y in [-1e3, -1.5, 0.0, 2.25, 7e4] {
            assert!((n.y_inv(n.y(y)) - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        assert!(n.y_std > 0.0);
        let u = n.theta(&[5.0, -5.0]);
        assert_eq!(u, vec![1.0, -1.0]);

        let mut constant = GroundTruthSet::new();
        constant
            .push(ResponseSample::new(vec![0.0, 0.0], vec![4.0; 5]).unwrap())
            .unwrap();
        assert_eq!(Normalizer::fit(&space, &constant).unwrap().y_std, 1.0);
        assert!(Normalizer::fit(&space, &GroundTruthSet::new()).is_err());
    }

    #[test]
    fn kind_names() {
        for k in [
            SurrogateKind::WganGp,
            SurrogateKind::EnergyGen,
            SurrogateKind::Gp,
            SurrogateKind::DeepEnsemble,
        ] {
            assert_eq!(k.as_str().parse::<SurrogateKind>().unwrap(), k);
        }
        assert!("bnn".parse::<SurrogateKind>().is_err());
    }
}
