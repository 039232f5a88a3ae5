//! Energy distance between samples and the Wasserstein uncertainty of a
//! candidate distribution against a set of observed samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wugo::blackbox::ResponseSample;
use wugo::statdist::{energy_distance, GroundTruthSet};

fn normal(mu: f64, sd: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = Normal::new(mu, sd).unwrap();
    (0..n).map(|_| d.sample(rng)).collect()
}

/// Returns `(shift, distance to N(0, 1), uncertainty against the set)` per shift.
pub fn run_example(seed: u64) -> wugo::Result<Vec<(f64, f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reference = normal(0.0, 1.0, 500, &mut rng);
    let mut m = GroundTruthSet::new();
    m.push(ResponseSample::new(vec![0.0], reference.clone())?)?;
    m.push(ResponseSample::new(vec![1.0], normal(4.0, 0.5, 500, &mut rng))?)?;
    let mut out = Vec::new();
    for shift in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let nu = normal(shift, 1.0, 500, &mut rng);
        out.push((shift, energy_distance(&nu, &reference)?, m.wasserstein_uncertainty(&nu)?));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> wugo::Result<()> {
    println!("shift  D(nu, N(0,1))  sigma_W(nu)");
    for (s, d, u) in run_example(1)? {
        println!("{s:5.1}  {d:13.4}  {u:11.4}");
    }
    Ok(())
}
