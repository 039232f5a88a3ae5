//! Energy distance between univariate samples and the Wasserstein
//! uncertainty of a predicted response against the ground-truth set.
//!
//! For one-dimensional responses every term of
//! `D^2 = 2 E|X - Y| - E|X - X'| - E|Y - Y'|` reduces to sums over sorted
//! samples, so a distance costs `O(n_a + n_b)` once both sides are sorted.
//! Within-sample terms are U-statistics (diagonal excluded); the resulting
//! `D^2` can dip below zero and is clamped before the square root.

use std::cmp::Ordering;

use crate::blackbox::ResponseSample;
use crate::error::{Error, Result};

/// A sample kept in ascending order with its within-sample sum cached.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
    sum: f64,
    /// `sum_{i != j} |x_i - x_j|`
    within: f64,
    /// mean absolute deviation from the mean
    mad: f64,
}

impl SortedSample {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample value".into()));
        }
        let mut values = values.to_vec();
        values.sort_by(f64::total_cmp);
        Ok(Self::from_sorted(values))
    }

    fn from_sorted(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mut within = 0.0;
        for (k, &x) in values.iter().enumerate() {
            within += x * (2.0 * k as f64 - n + 1.0);
        }
        let sum: f64 = values.iter().sum();
        let mad = mean_abs_dev(&values, sum / n);
        Self {
            values,
            sum,
            within: 2.0 * within,
            mad,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.values.len() as f64
    }

    pub fn mad(&self) -> f64 {
        self.mad
    }

    /// U-statistic estimate of `E|X - X'|`; zero for a single observation.
    fn within_mean(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            0.0
        } else {
            self.within / (n * (n - 1)) as f64
        }
    }

    /// Squared energy distance, clamped at zero.
    pub fn energy_distance_sq(&self, other: &SortedSample) -> f64 {
        // fixed operand order keeps the result bitwise symmetric
        let (a, b) = if canonical_cmp(self, other) == Ordering::Greater {
            (other, self)
        } else {
            (self, other)
        };
        let cross = cross_sum(&a.values, &b.values, b.sum) / (a.len() * b.len()) as f64;
        let d2 = 2.0 * cross - a.within_mean() - b.within_mean();
        d2.max(0.0)
    }

    pub fn energy_distance(&self, other: &SortedSample) -> f64 {
        self.energy_distance_sq(other).sqrt()
    }
}

fn mean_abs_dev(values: &[f64], mean: f64) -> f64 {
    values.iter().map(|v| (v - mean).abs()).sum::<f64>() / values.len() as f64
}

/// Upper bound on the energy distance from location summaries alone:
/// `D^2 <= 2 E|X - Y| <= 2 (|mean_a - mean_b| + mad_a + mad_b)`.
pub fn energy_distance_bound(mean_a: f64, mad_a: f64, mean_b: f64, mad_b: f64) -> f64 {
    (2.0 * ((mean_a - mean_b).abs() + mad_a + mad_b)).sqrt()
}

fn canonical_cmp(a: &SortedSample, b: &SortedSample) -> Ordering {
    a.values.len().cmp(&b.values.len()).then_with(|| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// `sum_i sum_j |a_i - b_j|` for ascending `a`, `b`.
fn cross_sum(a: &[f64], b: &[f64], b_total: f64) -> f64 {
    let m = b.len() as f64;
    let mut j = 0;
    let mut below = 0.0;
    let mut acc = 0.0;
    for &x in a {
        while j < b.len() && b[j] <= x {
            below += b[j];
            j += 1;
        }
        let c = j as f64;
        acc += (x * c - below) + ((b_total - below) - x * (m - c));
    }
    acc
}

/// Energy distance `D` between two samples (see the module docs).
pub fn energy_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(SortedSample::new(a)?.energy_distance(&SortedSample::new(b)?))
}

/// Responses observed so far, each paired with its sorted form.
#[derive(Debug, Clone, Default)]
pub struct GroundTruthSet {
    entries: Vec<ResponseSample>,
    sorted: Vec<SortedSample>,
}

/// L-infinity tolerance under which two design points are the same point.
pub const THETA_TOLERANCE: f64 = 1e-9;

impl GroundTruthSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a sample; its θ must differ from every stored θ.
    pub fn push(&mut self, sample: ResponseSample) -> Result<()> {
        if let Some(first) = self.entries.first() {
            if first.theta.len() != sample.theta.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.theta.len(),
                    got: sample.theta.len(),
                });
            }
        }
        if self.contains_theta(&sample.theta) {
            return Err(Error::DuplicatePoint(sample.theta));
        }
        self.sorted.push(SortedSample::new(&sample.values)?);
        self.entries.push(sample);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ResponseSample] {
        &self.entries
    }

    pub fn sorted(&self) -> &[SortedSample] {
        &self.sorted
    }

    pub fn contains_theta(&self, theta: &[f64]) -> bool {
        self.entries.iter().any(|e| same_point(&e.theta, theta))
    }

    /// Smallest per-sample mean, the incumbent objective estimate.
    pub fn best_mean(&self) -> Option<f64> {
        self.sorted.iter().map(SortedSample::mean).reduce(f64::min)
    }

    /// Minimum energy distance from `nu` to any stored sample, with the index
    /// of the earliest minimiser.
    pub fn nearest(&self, nu: &SortedSample) -> Result<(usize, f64)> {
        if self.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        let mut best = (0, f64::INFINITY);
        for (i, s) in self.sorted.iter().enumerate() {
            let d2 = s.energy_distance_sq(nu);
            if d2 < best.1 {
                best = (i, d2);
                if d2 == 0.0 {
                    break;
                }
            }
        }
        Ok((best.0, best.1.sqrt()))
    }

    /// Wasserstein uncertainty of a predicted sample, estimated through the
    /// energy distance to the closest known response.
    pub fn wasserstein_uncertainty(&self, nu: &[f64]) -> Result<f64> {
        let nu = SortedSample::new(nu)?;
        Ok(self.nearest(&nu)?.1)
    }

    /// Upper bound on the uncertainty of a sample known only through its
    /// mean and mean absolute deviation (see [`energy_distance_bound`]).
    pub fn uncertainty_summary_bound(&self, mean: f64, mad: f64) -> Result<f64> {
        self.sorted
            .iter()
            .map(|s| energy_distance_bound(mean, mad, s.mean(), s.mad()))
            .reduce(f64::min)
            .ok_or(Error::EmptyGroundTruth)
    }

    /// Cheap upper bound on the uncertainty: the distance to the stored
    /// sample whose mean is closest to the mean of `nu`.
    pub fn uncertainty_upper_bound(&self, nu: &SortedSample) -> Result<f64> {
        let target = nu.mean();
        let idx = self
            .sorted
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (a.mean() - target)
                    .abs()
                    .total_cmp(&(b.mean() - target).abs())
            })
            .map(|(i, _)| i)
            .ok_or(Error::EmptyGroundTruth)?;
        Ok(self.sorted[idx].energy_distance(nu))
    }
}

pub(crate) fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= THETA_TOLERANCE)
}
