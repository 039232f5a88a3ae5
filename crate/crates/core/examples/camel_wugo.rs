//! One WU-GO run on the noisy three-hump camel with the WGAN-GP surrogate.
//!
//! ```text
//! cargo run --release --example camel_wugo -- [seed]
//! ```

use wugo::acquisition::{AcquisitionConfig, AcquisitionKind};
use wugo::blackbox::BlackBoxSpec;
use wugo::optimizer::{run_wugo, RunConfig, RunRecord};
use wugo::surrogate::SurrogateKind;

pub fn run_example(seed: u64, budget: usize) -> wugo::Result<RunRecord> {
    let mut cfg = RunConfig::new(
        BlackBoxSpec::three_hump_camel(),
        SurrogateKind::WganGp,
        AcquisitionConfig::new(AcquisitionKind::WuRegret),
    );
    cfg.seed = seed;
    cfg.budget = budget;
    run_wugo(&cfg)
}

#[allow(dead_code)]
fn main() -> wugo::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let record = run_example(seed, 100)?;
    println!("init distance {:.4}", record.init_distance);
    for it in &record.iterations {
        println!(
            "{:3} theta=({:+.3}, {:+.3}) f_hat={:8.3} sigma_w={:.3} observed={:8.3} best={:.4} ({:.2}s)",
            it.iteration, it.theta[0], it.theta[1], it.predicted, it.uncertainty,
            it.observed_mean, it.best_distance, it.elapsed_s
        );
    }
    println!("status: {:?}", record.status);
    Ok(())
}
