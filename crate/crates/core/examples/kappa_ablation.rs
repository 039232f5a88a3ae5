//! Sweep the exploration weight of the Wasserstein regret on Ackley.
//!
//! ```text
//! cargo run --release --example kappa_ablation -- [repeats] [budget]
//! ```

use wugo::bench::{ablation_kappa, Experiment, Method};
use wugo::blackbox::BlackBoxSpec;

/// `(kappa, p, distance after the budget)` per kappa.
pub fn run_example(method: Method, repeats: usize, budget: usize) -> wugo::Result<Vec<(f64, f64, f64)>> {
    let mut exp = Experiment::new(BlackBoxSpec::ackley(), 4, 100);
    exp.template.budget = budget;
    let sweep = ablation_kappa(&exp, method, &[0.5, 1.0, 2.0, 4.0, 8.0], repeats, 0, 1)?;
    Ok(sweep
        .into_iter()
        .map(|(k, report, _)| {
            let e = &report.entries[0];
            (k, e.p, e.curve.last().map_or(f64::NAN, |c| c.mean))
        })
        .collect())
}

#[allow(dead_code)]
fn main() -> wugo::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse().ok());
    let repeats = args.next().flatten().unwrap_or(3);
    let budget = args.next().flatten().unwrap_or(50);
    println!("kappa      p   final mean distance");
    for (k, p, d) in run_example(Method::WugoWgan, repeats, budget)? {
        println!("{k:5.1} {p:6.2} {d:10.4}");
    }
    Ok(())
}
