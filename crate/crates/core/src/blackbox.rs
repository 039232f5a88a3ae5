//! Synthetic stochastic black boxes.
//!
//! Every function is observed through Gaussian noise around its closed-form
//! value. Lévi is the exception: each observation picks one of two variance
//! regimes with a fair coin, so its response is bimodal in shape.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::SearchSpace;
use crate::error::{Error, Result};

/// Nominal observation variance for the Gaussian-noise black boxes.
pub const DEFAULT_NOISE_VARIANCE: f64 = 1e-2;

/// Location of every coordinate of the Styblinski-Tang minimiser.
pub const STYBLINSKI_TANG_ARGMIN: f64 = -2.903534;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionId {
    ThreeHumpCamel,
    Ackley,
    Levi,
    Himmelblau,
    Rosenbrock(usize),
    StyblinskiTang(usize),
    /// `sum x_i^2`, a smooth bowl for smoke tests.
    Sphere(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    GaussianFixed { variance: f64 },
    /// Per-observation Bernoulli(0.5) switch between two variance regimes
    /// driven by `sin^2(3 pi theta_2)`.
    LeviMixture,
}

/// One stochastic observation batch: `values` are i.i.d. responses at `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSample {
    pub theta: Vec<f64>,
    pub values: Vec<f64>,
}

impl ResponseSample {
    pub fn new(theta: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("response value {v}")));
        }
        Ok(Self { theta, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// A closed-form objective together with its feasible box, known minimisers
/// and observation noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackBoxSpec {
    pub id: FunctionId,
    pub space: SearchSpace,
    pub optima: Vec<Vec<f64>>,
    pub noise: NoiseModel,
}

impl BlackBoxSpec {
    pub fn three_hump_camel() -> Self {
        Self::gaussian(FunctionId::ThreeHumpCamel, square(-5.0, 5.0, 2), vec![vec![0.0, 0.0]])
    }

    pub fn ackley() -> Self {
        Self::gaussian(FunctionId::Ackley, square(-5.0, 5.0, 2), vec![vec![0.0, 0.0]])
    }

    pub fn levi() -> Self {
        Self {
            id: FunctionId::Levi,
            space: square(-4.0, 6.0, 2),
            optima: vec![vec![1.0, 1.0]],
            noise: NoiseModel::LeviMixture,
        }
    }

    /// Himmelblau has four global minimisers, all with value zero.
    pub fn himmelblau() -> Self {
        Self::gaussian(
            FunctionId::Himmelblau,
            square(-5.0, 5.0, 2),
            vec![
                vec![3.0, 2.0],
                vec![-2.805118, 3.131312],
                vec![-3.779310, -3.283186],
                vec![3.584428, -1.848126],
            ],
        )
    }

    pub fn rosenbrock(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument("rosenbrock needs dim >= 2".into()));
        }
        Ok(Self::gaussian(
            FunctionId::Rosenbrock(dim),
            square(-2.0, 2.0, dim),
            vec![vec![1.0; dim]],
        ))
    }

    pub fn styblinski_tang(dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidArgument("styblinski-tang needs dim >= 1".into()));
        }
        Ok(Self::gaussian(
            FunctionId::StyblinskiTang(dim),
            square(-5.0, 5.0, dim),
            vec![vec![STYBLINSKI_TANG_ARGMIN; dim]],
        ))
    }

    pub fn sphere(dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidArgument("sphere needs dim >= 1".into()));
        }
        Ok(Self::gaussian(FunctionId::Sphere(dim), square(-5.0, 5.0, dim), vec![vec![0.0; dim]]))
    }

    fn gaussian(id: FunctionId, space: SearchSpace, optima: Vec<Vec<f64>>) -> Self {
        Self {
            id,
            space,
            optima,
            noise: NoiseModel::GaussianFixed {
                variance: DEFAULT_NOISE_VARIANCE,
            },
        }
    }

    /// Replace the observation noise, rejecting non-positive variances.
    pub fn with_noise(mut self, noise: NoiseModel) -> Result<Self> {
        if let NoiseModel::GaussianFixed { variance } = noise {
            if !(variance > 0.0 && variance.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "noise variance must be positive, got {variance}"
                )));
            }
        }
        self.noise = noise;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn name(&self) -> String {
        match self.id {
            FunctionId::ThreeHumpCamel => "three_hump_camel".into(),
            FunctionId::Ackley => "ackley".into(),
            FunctionId::Levi => "levi".into(),
            FunctionId::Himmelblau => "himmelblau".into(),
            FunctionId::Rosenbrock(q) => format!("rosenbrock{q}"),
            FunctionId::StyblinskiTang(q) => format!("styblinski_tang{q}"),
            FunctionId::Sphere(q) => format!("sphere{q}"),
        }
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        if !self.space.contains(theta) {
            return Err(Error::OutOfBounds(theta.to_vec()));
        }
        Ok(())
    }

    /// Noise-free objective value. Points outside the box are rejected, the
    /// feasible region cannot be relaxed.
    pub fn eval_mean(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        Ok(objective(self.id, theta))
    }

    /// Draw `n` noisy observations at `theta`.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        theta: &[f64],
        n: usize,
        rng: &mut R,
    ) -> Result<ResponseSample> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be >= 1".into()));
        }
        let mean = self.eval_mean(theta)?;
        let values = match self.noise {
            NoiseModel::GaussianFixed { variance } => {
                let sd = variance.sqrt();
                (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        mean + sd * z
                    })
                    .collect()
            }
            NoiseModel::LeviMixture => (0..n)
                .map(|_| {
                    let beta = rng.random_bool(0.5);
                    let z: f64 = StandardNormal.sample(rng);
                    mean + levi_variance(theta[1], beta).sqrt() * z
                })
                .collect(),
        };
        ResponseSample::new(theta.to_vec(), values)
    }

    /// Euclidean distance from `theta` to the nearest known minimiser.
    pub fn distance_to_optimum(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        Ok(self
            .optima
            .iter()
            .map(|opt| euclidean(opt, theta))
            .fold(f64::INFINITY, f64::min))
    }
}

impl fmt::Display for BlackBoxSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for BlackBoxSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownName {
            kind: "black box",
            name: s.to_string(),
        };
        match s {
            "three_hump_camel" => Ok(Self::three_hump_camel()),
            "ackley" => Ok(Self::ackley()),
            "levi" => Ok(Self::levi()),
            "himmelblau" => Ok(Self::himmelblau()),
            _ => {
                if let Some(q) = s.strip_prefix("rosenbrock") {
                    Self::rosenbrock(q.parse().map_err(|_| unknown())?)
                } else if let Some(q) = s.strip_prefix("styblinski_tang") {
                    Self::styblinski_tang(q.parse().map_err(|_| unknown())?)
                } else if let Some(q) = s.strip_prefix("sphere") {
                    Self::sphere(q.parse().map_err(|_| unknown())?)
                } else {
                    Err(unknown())
                }
            }
        }
    }
}

/// Variance of one Lévi observation given the regime flag `beta`.
pub fn levi_variance(theta2: f64, beta: bool) -> f64 {
    let s2 = (3.0 * PI * theta2).sin().powi(2);
    if beta {
        (4.0 - 3.0 * s2) / 100.0
    } else {
        (0.1 + 3.0 * s2) / 100.0
    }
}

fn objective(id: FunctionId, t: &[f64]) -> f64 {
    match id {
        FunctionId::ThreeHumpCamel => {
            let (x, y) = (t[0], t[1]);
            2.0 * x * x - 1.05 * x.powi(4) + x.powi(6) / 6.0 + x * y + y * y
        }
        FunctionId::Ackley => {
            let (x, y) = (t[0], t[1]);
            -20.0 * (-0.2 * (0.5 * (x * x + y * y)).sqrt()).exp()
                - (0.5 * ((2.0 * PI * x).cos() + (2.0 * PI * y).cos())).exp()
                + E
                + 20.0
        }
        FunctionId::Levi => {
            let (x, y) = (t[0], t[1]);
            (3.0 * PI * x).sin().powi(2)
                + (x - 1.0).powi(2) * (1.0 + (3.0 * PI * y).sin().powi(2))
                + (y - 1.0).powi(2) * (1.0 + (2.0 * PI * y).sin().powi(2))
        }
        FunctionId::Himmelblau => {
            let (x, y) = (t[0], t[1]);
            (x * x + y - 11.0).powi(2) + (x + y * y - 7.0).powi(2)
        }
        FunctionId::Rosenbrock(_) => t
            .windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum(),
        FunctionId::StyblinskiTang(_) => {
            0.5 * t
                .iter()
                .map(|&x| x.powi(4) - 16.0 * x * x + 5.0 * x)
                .sum::<f64>()
        }
        FunctionId::Sphere(_) => t.iter().map(|x| x * x).sum(),
    }
}

fn square(lo: f64, hi: f64, dim: usize) -> SearchSpace {
    SearchSpace::new(vec![(lo, hi); dim]).expect("static bounds are valid")
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}
