mod common;

use wugo::acquisition::{AcquisitionConfig, AcquisitionKind};
use wugo::blackbox::BlackBoxSpec;
use wugo::optimizer::{check_eps_solution, run, RunConfig, RunRecord, RunStatus};
use wugo::surrogate::SurrogateKind;

fn config(bb: BlackBoxSpec, sur: SurrogateKind, acq: AcquisitionKind) -> RunConfig {
    RunConfig::new(bb, sur, AcquisitionConfig::new(acq))
}

fn assert_loop_invariants(r: &RunRecord, n_init: usize) {
    let series = r.distance_series();
    assert!(series.windows(2).all(|w| w[1] <= w[0]), "{series:?}");
    let evaluated = r.evaluated();
    assert_eq!(evaluated.len(), n_init + r.iterations.len());
    for (i, a) in evaluated.iter().enumerate() {
        for b in &evaluated[..i] {
            let linf = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(linf > 1e-9, "{a:?} evaluated twice");
        }
    }
    for (k, it) in r.iterations.iter().enumerate() {
        assert_eq!(it.iteration, k + 1);
    }
}

#[test]
fn zero_budget_keeps_only_the_initial_design() {
    for sur in [SurrogateKind::Gp, SurrogateKind::WganGp] {
        let acq = if sur.is_generative() {
            AcquisitionKind::WuRegret
        } else {
            AcquisitionKind::EiGaussian
        };
        let mut cfg = config(BlackBoxSpec::ackley(), sur, acq);
        cfg.budget = 0;
        let r = run(&cfg).unwrap();
        assert!(r.iterations.is_empty());
        assert_eq!(r.init_thetas.len(), 4);
        // an initial point may already be a solution; otherwise the budget ran out
        let expected = match check_eps_solution(&cfg.blackbox, &r.init_thetas, cfg.epsilon) {
            Some(_) => RunStatus::EpsSolved { iteration: 0 },
            None => RunStatus::BudgetExhausted,
        };
        assert_eq!(r.status, expected);
    }
}

#[test]
fn gp_ego_finds_the_bottom_of_a_bowl() {
    for seed in 0..5 {
        let mut cfg = config(BlackBoxSpec::sphere(1).unwrap(), SurrogateKind::Gp, AcquisitionKind::EiGaussian);
        cfg.n_init = 3;
        cfg.budget = 20;
        cfg.epsilon = 0.2;
        cfg.seed = seed;
        let r = run(&cfg).unwrap();
        assert!(r.solved(), "seed {seed}: {:?}, final distance {}", r.status, r.distance_at(20));
        assert_loop_invariants(&r, 3);
    }
}

#[test]
fn lcb_without_exploration_scores_by_the_mean() {
    let mut cfg = config(BlackBoxSpec::three_hump_camel(), SurrogateKind::Gp, AcquisitionKind::Lcb);
    cfg.acquisition.kappa = 0.0;
    cfg.budget = 10;
    cfg.stop_at_solution = false;
    let r = run(&cfg).unwrap();
    assert_eq!(r.iterations.len(), 10);
    for it in &r.iterations {
        assert_eq!(it.acquisition, it.predicted);
    }
    assert_loop_invariants(&r, 4);
}

#[test]
fn deep_ensemble_ego_runs_the_full_budget_on_ackley() {
    let mut cfg = config(BlackBoxSpec::ackley(), SurrogateKind::DeepEnsemble, AcquisitionKind::EiGaussian);
    cfg.stop_at_solution = false;
    cfg.seed = 3;
    let r = run(&cfg).unwrap();
    assert_eq!(r.iterations.len(), 100);
    assert!(!matches!(r.status, RunStatus::Failed { .. }));
    assert_loop_invariants(&r, 4);
}

#[test]
fn short_runs_keep_loop_invariants() {
    for (sur, acq) in [
        (SurrogateKind::EnergyGen, AcquisitionKind::WuRegret),
        (SurrogateKind::EnergyGen, AcquisitionKind::EiMc),
        (SurrogateKind::WganGp, AcquisitionKind::WuRegret),
        (SurrogateKind::Gp, AcquisitionKind::Lcb),
    ] {
        let mut cfg = config(BlackBoxSpec::himmelblau(), sur, acq);
        cfg.n_sample = 10;
        cfg.budget = 6;
        cfg.stop_at_solution = false;
        cfg.gen.epochs = 20;
        let r = run(&cfg).unwrap();
        assert_eq!(r.iterations.len(), 6, "{sur} / {acq:?}");
        assert_loop_invariants(&r, 4);
    }
}

#[test]
fn mismatched_surrogate_and_acquisition_are_rejected() {
    assert!(run(&config(BlackBoxSpec::ackley(), SurrogateKind::Gp, AcquisitionKind::WuRegret)).is_err());
    assert!(run(&config(BlackBoxSpec::ackley(), SurrogateKind::WganGp, AcquisitionKind::Lcb)).is_err());
    let mut cfg = config(BlackBoxSpec::ackley(), SurrogateKind::Gp, AcquisitionKind::Lcb);
    cfg.acquisition.kappa = -1.0;
    assert!(run(&cfg).is_err());
}

#[test]
fn runs_are_reproducible_byte_for_byte() {
    common::check_run_determinism().unwrap();
}

#[test]
fn record_json_round_trips() {
    let mut cfg = config(BlackBoxSpec::levi(), SurrogateKind::Gp, AcquisitionKind::EiGaussian);
    cfg.budget = 4;
    let r = run(&cfg).unwrap();
    let back: RunRecord = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
    assert_eq!(r.method, "ego_gp");
}
