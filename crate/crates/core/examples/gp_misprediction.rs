//! A Gaussian process sees only sample means, so it reports the same
//! predictive spread whether the simulator is quiet or very noisy. The
//! generative surrogate learns the response distribution itself.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wugo::blackbox::ResponseSample;
use wugo::design::SearchSpace;
use wugo::statdist::GroundTruthSet;
use wugo::surrogate::{GenConfig, GenTrainer, GenerativeSurrogate, GpSurrogate, ResponseScaling};

pub struct Spread {
    pub theta: f64,
    pub true_std: f64,
    pub gp_std: f64,
    pub generated_std: f64,
}

fn std_dev(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

pub fn run_example(seed: u64) -> wugo::Result<Vec<Spread>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = SearchSpace::new(vec![(-1.0, 1.0)])?;
    let design = [(-0.8, 0.1), (-0.3, 0.1), (0.3, 2.0), (0.8, 2.0)];
    let mut m = GroundTruthSet::new();
    for (t, sd) in design {
        let d = Normal::new(1.0, sd).unwrap();
        m.push(ResponseSample::new(vec![t], (0..100).map(|_| d.sample(&mut rng)).collect())?)?;
    }
    let gp = GpSurrogate::fit(&m)?;
    let cfg = GenConfig {
        response_scaling: ResponseScaling::Linear,
        epochs: 1000,
        ..GenConfig::default()
    };
    let mut gen = GenerativeSurrogate::new(space, GenTrainer::Energy, cfg)?;
    gen.fit(&m, 1, &mut rng)?;
    design
        .iter()
        .map(|&(t, sd)| {
            let draws = gen.sample(&[t], 2000, &mut rng)?;
            Ok(Spread {
                theta: t,
                true_std: sd,
                gp_std: gp.predict(&[t]).std,
                generated_std: std_dev(&draws),
            })
        })
        .collect()
}

#[allow(dead_code)]
fn main() -> wugo::Result<()> {
    println!("theta  true std  GP std  generated std");
    for s in run_example(0)? {
        println!("{:5.1} {:9.2} {:7.3} {:14.3}", s.theta, s.true_std, s.gp_std, s.generated_std);
    }
    Ok(())
}
