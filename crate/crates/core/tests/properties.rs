mod common;

use proptest::prelude::*;
use wugo::acquisition::{ei_gaussian, lcb, wu_regret};
use wugo::blackbox::ResponseSample;
use wugo::design::SearchSpace;
use wugo::optimizer::argmin_regret;
use wugo::statdist::{energy_distance, GroundTruthSet};
use wugo::surrogate::{GaussianPosterior, GpHyper, GpSurrogate, Normalizer, ResponseScaling};

fn sample_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, 1..max_len)
}

proptest! {
    #[test]
    fn ei_is_nonnegative_and_nonincreasing_in_mean(
        std in 0.0..10.0f64,
        f_min in -20.0..20.0f64,
        mu in -30.0..30.0f64,
        step in 0.0..5.0f64,
    ) {
        let lo = ei_gaussian(&GaussianPosterior { mean: mu, std }, f_min);
        let hi = ei_gaussian(&GaussianPosterior { mean: mu + step, std }, f_min);
        prop_assert!(lo >= 0.0 && hi >= 0.0);
        prop_assert!(hi <= lo + 1e-12 * lo.max(1.0), "{hi} > {lo}");
    }

    #[test]
    fn regret_is_nonincreasing_in_kappa(
        f_hat in -100.0..100.0f64,
        sigma in 1e-6..10.0f64,
        k1 in 0.0..10.0f64,
        dk in 0.0..10.0f64,
    ) {
        prop_assert!(wu_regret(f_hat, sigma, k1 + dk) <= wu_regret(f_hat, sigma, k1));
        let post = GaussianPosterior { mean: f_hat, std: sigma };
        prop_assert!(lcb(&post, k1 + dk) <= lcb(&post, k1));
        prop_assert_eq!(lcb(&post, k1), wu_regret(f_hat, sigma, k1));
    }

    #[test]
    fn argmin_is_invariant_to_shifting_every_prediction(
        rows in prop::collection::vec((-10.0..10.0f64, 0.0..3.0f64, any::<bool>()), 1..40),
        shift in -100.0..100.0f64,
        kappa in 0.0..8.0f64,
    ) {
        // quantised so the shift is exact in floating point
        let f: Vec<f64> = rows.iter().map(|r| (r.0 * 64.0).round() / 64.0).collect();
        let s: Vec<f64> = rows.iter().map(|r| (r.1 * 64.0).round() / 64.0).collect();
        let k = (kappa * 4.0).round() / 4.0;
        let c = shift.round();
        let excluded: Vec<bool> = rows.iter().map(|r| r.2).collect();
        let shifted: Vec<f64> = f.iter().map(|v| v + c).collect();
        prop_assert_eq!(argmin_regret(&f, &s, k, &excluded), argmin_regret(&shifted, &s, k, &excluded));
    }

    #[test]
    fn argmin_never_returns_an_excluded_candidate(
        rows in prop::collection::vec((-10.0..10.0f64, 0.0..3.0f64, any::<bool>()), 1..40),
    ) {
        let f: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let s: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let excluded: Vec<bool> = rows.iter().map(|r| r.2).collect();
        match argmin_regret(&f, &s, 2.0, &excluded) {
            Some(i) => {
                prop_assert!(!excluded[i]);
                let best = wu_regret(f[i], s[i], 2.0);
                for j in 0..f.len() {
                    if !excluded[j] {
                        let r = wu_regret(f[j], s[j], 2.0);
                        prop_assert!(best < r || (best == r && i <= j));
                    }
                }
            }
            None => prop_assert!(excluded.iter().all(|e| *e)),
        }
    }

    #[test]
    fn energy_distance_matches_brute_force(a in sample_vec(40), b in sample_vec(40)) {
        let got = energy_distance(&a, &b).unwrap();
        let want = common::brute_energy_sq(&a, &b).max(0.0).sqrt();
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{got} vs {want}");
        prop_assert_eq!(got, energy_distance(&b, &a).unwrap());
        prop_assert!(got >= 0.0);
    }

    #[test]
    fn normalisation_round_trips(
        values in prop::collection::vec(-1e3..1e3f64, 2..50),
        probe in -1e3..1e3f64,
        asinh in any::<bool>(),
    ) {
        let space = SearchSpace::new(vec![(-2.0, 3.0)]).unwrap();
        let mut m = GroundTruthSet::new();
        m.push(ResponseSample::new(vec![0.0], values).unwrap()).unwrap();
        let scaling = if asinh {
            ResponseScaling::Asinh { rel_width: 1e-3 }
        } else {
            ResponseScaling::Linear
        };
        let n = Normalizer::fit_with(&space, &m, scaling).unwrap();
        prop_assert!(n.y_mean.is_finite() && n.y_std > 0.0);
        let back = n.y_inv(n.y(probe));
        prop_assert!((back - probe).abs() <= 1e-12 * probe.abs().max(1.0), "{probe} -> {back}");
        let u = n.theta(&[0.5]);
        prop_assert!((u[0] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn gp_variance_never_drops_below_noise(
        pts in prop::collection::vec((-3.0..3.0f64, -5.0..5.0f64), 1..12),
        q in -6.0..6.0f64,
        l in 0.1..3.0f64,
        noise in 1e-6..1.0f64,
    ) {
        let mut x: Vec<Vec<f64>> = Vec::new();
        let mut y = Vec::new();
        for (t, v) in pts {
            if x.iter().all(|p| (p[0] - t).abs() > 1e-6) {
                x.push(vec![t]);
                y.push(v);
            }
        }
        let h = GpHyper { lengthscale: l, signal_var: 1.5, noise_var: noise };
        let gp = GpSurrogate::with_hyper(x, y, h).unwrap();
        let p = gp.predict(&[q]);
        prop_assert!(p.std >= 0.0);
        prop_assert!(p.std * p.std >= noise - 1e-12);
    }
}

#[test]
fn uncertainty_vanishes_exactly_for_members() {
    common::check_zero_iff_member(15).unwrap();
}

#[test]
fn energy_distance_matches_brute_force_on_larger_samples() {
    common::check_energy_brute_force(200, 14).unwrap();
}
