//! Search-space geometry, Latin hypercube designs and candidate sets.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_m, hi_m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    bounds: Vec<(f64, f64)>,
}

impl SearchSpace {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidArgument("search space needs dim >= 1".into()));
        }
        for &(lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!("invalid interval [{lo}, {hi}]")));
            }
        }
        Ok(Self { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(&self.bounds)
                .all(|(&x, &(lo, hi))| x >= lo && x <= hi)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }

    /// Affine map of the box onto `[-1, 1]^m`.
    pub fn to_unit(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.bounds)
            .map(|(&x, &(lo, hi))| 2.0 * (x - lo) / (hi - lo) - 1.0)
            .collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| lo + (v + 1.0) * 0.5 * (hi - lo))
            .collect()
    }
}

/// Latin hypercube design of `n` points: on every axis each of the `n`
/// equal-width strata holds exactly one point, placed uniformly inside it.
pub fn lhs_init<R: Rng + ?Sized>(space: &SearchSpace, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::with_capacity(space.dim()); n];
    let mut strata: Vec<usize> = (0..n).collect();
    for &(lo, hi) in space.bounds() {
        strata.shuffle(rng);
        let width = (hi - lo) / n as f64;
        for (point, &k) in points.iter_mut().zip(&strata) {
            let x = lo + width * (k as f64 + rng.random::<f64>());
            point.push(x.min(hi));
        }
    }
    points
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateKind {
    /// Regular lattice with `size` points per axis, endpoints included.
    Grid2D,
    /// `size` Latin hypercube points drawn once per run.
    LhsFixed,
}

impl FromStr for CandidateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid2d" | "grid" => Ok(Self::Grid2D),
            "lhs" | "lhs_fixed" => Ok(Self::LhsFixed),
            _ => Err(Error::UnknownName {
                kind: "candidate kind",
                name: s.into(),
            }),
        }
    }
}

/// Candidate configurations scanned by direct search. The order is fixed, so
/// index order doubles as the tie-breaker in every argmin/argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub points: Vec<Vec<f64>>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `size` is points per axis for [`CandidateKind::Grid2D`] and the total
/// count for [`CandidateKind::LhsFixed`].
pub fn build_candidates<R: Rng + ?Sized>(
    space: &SearchSpace,
    kind: CandidateKind,
    size: usize,
    rng: &mut R,
) -> Result<CandidateSet> {
    match kind {
        CandidateKind::Grid2D => {
            if space.dim() != 2 {
                return Err(Error::InvalidArgument(format!(
                    "grid candidates need a 2-d space, got dim {}",
                    space.dim()
                )));
            }
            if size < 2 {
                return Err(Error::InvalidArgument("grid needs >= 2 points per axis".into()));
            }
            let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
                let steps = (size - 1) as f64;
                (0..size)
                    .map(|i| lo + (hi - lo) * i as f64 / steps)
                    .collect()
            };
            let xs = axis(space.bounds()[0]);
            let ys = axis(space.bounds()[1]);
            // axis 0 varies fastest
            let points = ys
                .iter()
                .flat_map(|&y| xs.iter().map(move |&x| vec![x, y]))
                .collect();
            Ok(CandidateSet { points })
        }
        CandidateKind::LhsFixed => {
            if size == 0 {
                return Err(Error::InvalidArgument("empty candidate set".into()));
            }
            Ok(CandidateSet {
                points: lhs_init(space, size, rng),
            })
        }
    }
}
