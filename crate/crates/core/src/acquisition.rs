//! Acquisition functions scored over the candidate set.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surrogate::GaussianPosterior;

/// Exploration weight used unless configured otherwise.
pub const DEFAULT_KAPPA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcquisitionKind {
    WuRegret,
    Lcb,
    EiMc,
    EiGaussian,
}

impl FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wu" | "wu_regret" => Ok(Self::WuRegret),
            "lcb" => Ok(Self::Lcb),
            "ei_mc" => Ok(Self::EiMc),
            "ei" | "ei_gaussian" => Ok(Self::EiGaussian),
            _ => Err(Error::UnknownName {
                kind: "acquisition",
                name: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub kind: AcquisitionKind,
    pub kappa: f64,
    pub mc_samples: usize,
}

impl AcquisitionConfig {
    pub fn new(kind: AcquisitionKind) -> Self {
        Self {
            kind,
            kappa: DEFAULT_KAPPA,
            mc_samples: 1000,
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::Config(format!("kappa must be finite and >= 0, got {}", self.kappa)));
        }
        if self.kind == AcquisitionKind::EiMc && self.mc_samples == 0 {
            return Err(Error::Config("EI Monte-Carlo needs at least one sample".into()));
        }
        Ok(())
    }
}

/// Regret `f_hat - kappa * sigma_w`, minimised over candidates.
pub fn wu_regret(f_hat: f64, sigma_w: f64, kappa: f64) -> f64 {
    debug_assert!(sigma_w >= 0.0);
    f_hat - kappa * sigma_w
}

/// Lower confidence bound `mean - kappa * std`, minimised over candidates.
pub fn lcb(post: &GaussianPosterior, kappa: f64) -> f64 {
    post.mean - kappa * post.std
}

/// Monte-Carlo expected improvement over `f_min`.
pub fn ei_mc(sample: &[f64], f_min: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(sample.iter().map(|x| (f_min - x).max(0.0)).sum::<f64>() / sample.len() as f64)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF via `erfc`, accurate far into the lower tail.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Closed-form expected improvement under a Gaussian predictive.
pub fn ei_gaussian(post: &GaussianPosterior, f_min: f64) -> f64 {
    let gap = f_min - post.mean;
    if post.std <= 0.0 {
        return gap.max(0.0);
    }
    let z = gap / post.std;
    let ei = if z < -5.0 {
        // z Phi(z) + phi(z) cancels badly here; use phi(z) * (1 - R(z)|z|)
        // with the Mills ratio R(z) = Phi(z) / phi(z) from a continued fraction
        let a = -z;
        post.std * norm_pdf(z) * (1.0 - a * mills_ratio(a))
    } else {
        post.std * (z * norm_cdf(z) + norm_pdf(z))
    };
    ei.max(0.0)
}

/// Mills ratio `(1 - Phi(a)) / phi(a)` for large positive `a`, by Lentz's
/// continued fraction.
fn mills_ratio(a: f64) -> f64 {
    // R(a) = 1/(a + 1/(a + 2/(a + 3/(a + ...))))
    let mut f = a;
    for k in (1..=60).rev() {
        f = a + k as f64 / f;
    }
    1.0 / f
}
