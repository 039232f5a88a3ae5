//! Evaluate every built-in black box at its minimisers and draw noisy samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wugo::blackbox::BlackBoxSpec;

pub struct Row {
    pub name: String,
    pub value_at_optimum: f64,
    pub sample_mean: f64,
    pub sample_std: f64,
}

pub fn run_example(seed: u64, n: usize) -> wugo::Result<Vec<Row>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boxes = [
        BlackBoxSpec::three_hump_camel(),
        BlackBoxSpec::ackley(),
        BlackBoxSpec::levi(),
        BlackBoxSpec::himmelblau(),
        BlackBoxSpec::rosenbrock(8)?,
        BlackBoxSpec::styblinski_tang(4)?,
    ];
    let mut rows = Vec::new();
    for bb in &boxes {
        let worst = bb.optima.iter().map(|o| bb.eval_mean(o)).collect::<wugo::Result<Vec<_>>>()?;
        let theta = bb.space.sample_uniform(&mut rng);
        let s = bb.simulate(&theta, n, &mut rng)?;
        let mean = s.mean();
        let var = s.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
        rows.push(Row {
            name: bb.name(),
            value_at_optimum: worst.into_iter().fold(f64::NEG_INFINITY, f64::max),
            sample_mean: mean,
            sample_std: var.sqrt(),
        });
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> wugo::Result<()> {
    println!("{:<20} {:>12} {:>12} {:>10}", "function", "f(optimum)", "mean", "std");
    for r in run_example(0, 100)? {
        println!("{:<20} {:>12.3e} {:>12.3} {:>10.3}", r.name, r.value_at_optimum, r.sample_mean, r.sample_std);
    }
    Ok(())
}
