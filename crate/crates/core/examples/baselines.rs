//! EGO and LCB over a Gaussian process and a deep ensemble on one problem.
//!
//! ```text
//! cargo run --release --example baselines -- [budget]
//! ```

use wugo::bench::{Experiment, Method};
use wugo::blackbox::BlackBoxSpec;
use wugo::optimizer::{run, RunRecord};

pub fn run_example(seed: u64, budget: usize) -> wugo::Result<Vec<(Method, RunRecord)>> {
    let exp = Experiment::new(BlackBoxSpec::three_hump_camel(), 4, 100);
    [Method::EgoGp, Method::LcbGp, Method::EgoDe, Method::LcbDe]
        .into_iter()
        .map(|m| {
            let mut cfg = exp.config(m, seed);
            cfg.budget = budget;
            Ok((m, run(&cfg)?))
        })
        .collect()
}

#[allow(dead_code)]
fn main() -> wugo::Result<()> {
    let budget = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    for (m, r) in run_example(0, budget)? {
        let last = r.iterations.len();
        println!("{:<8} iterations {last:3} best distance {:.4} {:?}", m.as_str(), r.distance_at(last), r.status);
    }
    Ok(())
}
