use std::fs;

use proptest::prelude::*;
use wugo::bench::{
    ablation_kappa, bernoulli_stderr, distance_after_k, emit_report, eps_probability, persist_runs, read_report,
    run_suite, summary_csv, Experiment, ExperimentSuite, Method, MetricsReport, ReportFormat, CURVE_HEADER,
    SUMMARY_HEADER,
};
use wugo::blackbox::BlackBoxSpec;
use wugo::optimizer::{IterationRecord, RunRecord, RunStatus};

fn record(init: f64, distances: &[f64], solved: bool) -> RunRecord {
    let mut best = init;
    let iterations = distances
        .iter()
        .enumerate()
        .map(|(k, d)| {
            best = best.min(*d);
            IterationRecord {
                iteration: k + 1,
                theta: vec![*d, 0.0],
                predicted: 0.0,
                uncertainty: 0.0,
                acquisition: 0.0,
                observed_mean: 0.0,
                best_distance: best,
                elapsed_s: 0.0,
            }
        })
        .collect();
    RunRecord {
        blackbox: "three_hump_camel".into(),
        method: "ego_gp".into(),
        seed: 0,
        budget: 100,
        init_thetas: vec![vec![init, 0.0]],
        init_distance: init,
        iterations,
        status: if solved {
            RunStatus::EpsSolved { iteration: distances.len() }
        } else {
            RunStatus::BudgetExhausted
        },
    }
}

fn small_suite(budget: usize, repeats: usize) -> ExperimentSuite {
    let mut suite = ExperimentSuite::two_dimensional().select(&["ackley".into(), "levi".into()]).unwrap();
    for e in &mut suite.experiments {
        e.template.budget = budget;
        e.repeats = repeats;
    }
    suite
}

#[test]
fn stderr_reproduces_reported_values() {
    for (p, want) in [(0.9, 0.095), (0.5, 0.158), (0.3, 0.145), (0.8, 0.126)] {
        let se = bernoulli_stderr(p, 10);
        assert_eq!(format!("{se:.3}"), format!("{want:.3}"), "p = {p}");
    }
    assert!((bernoulli_stderr(0.9, 10) - 0.0949).abs() < 5e-5);
    assert_eq!(bernoulli_stderr(0.0, 1), 0.0);
    assert_eq!(bernoulli_stderr(1.0, 1), 0.0);
}

#[test]
fn probability_and_distance_examples() {
    let recs: Vec<RunRecord> = (0..10).map(|i| record(2.0, &[1.0, 0.05], i < 9)).collect();
    let (p, se) = eps_probability(&recs);
    assert!((p - 0.9).abs() < 1e-15);
    assert!((se - (0.09f64 / 10.0).sqrt()).abs() < 1e-15);
    assert_eq!(eps_probability(&recs[..1]), (1.0, 0.0));

    let two = [record(5.0, &[1.0], false), record(5.0, &[3.0], false)];
    assert_eq!(distance_after_k(&two, 50), (2.0, 1.0));
    let at_opt = [record(1.0, &[0.0], true), record(0.0, &[], true)];
    assert_eq!(distance_after_k(&at_opt, 50), (0.0, 0.0));
}

#[test]
fn empty_report_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&MetricsReport::default(), ReportFormat::Csv, dir.path()).unwrap();
    assert_eq!(files.len(), 1);
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(text, format!("{SUMMARY_HEADER}\n"));
    assert_eq!(summary_csv(&MetricsReport::default()), text);
}

#[test]
fn suite_report_files_and_round_trip() {
    let budget = 5;
    let (report, runs) = run_suite(&small_suite(budget, 2), Method::EgoGp, 3, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, ReportFormat::Csv, dir.path()).unwrap();
    emit_report(&report, ReportFormat::Json, dir.path()).unwrap();
    persist_runs(&runs, dir.path()).unwrap();

    assert_eq!(read_report(dir.path()).unwrap(), report);
    for e in &report.entries {
        let curve = fs::read_to_string(dir.path().join(format!("curves_{}_{}.csv", e.experiment, e.method))).unwrap();
        let lines: Vec<&str> = curve.lines().collect();
        assert_eq!(lines[0], CURVE_HEADER);
        assert_eq!(lines.len() - 1, budget + 1);
        assert!(!curve.contains('\r'));
        for seed in 3..5 {
            assert!(dir.path().join(format!("runs/{}_{}_seed{seed}.json", e.experiment, e.method)).exists());
        }
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + report.entries.len());
    for line in summary.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 6);
        let p: f64 = cols[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
        for c in &cols[2..] {
            let digits = c.trim_start_matches('-').replace('.', "");
            assert!(digits.trim_start_matches('0').trim_end_matches('0').len() <= 6, "{c}");
        }
    }
}

#[test]
fn suites_are_reproducible() {
    let suite = small_suite(4, 2);
    let (ra, a) = run_suite(&suite, Method::LcbGp, 0, 1).unwrap();
    let (rb, b) = run_suite(&suite, Method::LcbGp, 0, 2).unwrap();
    assert_eq!(ra, rb);
    for (x, y) in a.runs.values().flatten().zip(b.runs.values().flatten()) {
        assert_eq!(x.canonical_json(), y.canonical_json());
    }
}

#[test]
fn single_run_curves_are_nonincreasing() {
    let (report, _) = run_suite(&small_suite(8, 1), Method::EgoGp, 1, 1).unwrap();
    for e in &report.entries {
        assert!(e.curve.windows(2).all(|w| w[1].mean <= w[0].mean));
        assert!(e.curve.iter().all(|c| c.std == 0.0));
    }
}

#[test]
fn single_kappa_ablation_matches_the_suite() {
    let suite = small_suite(3, 2);
    let exp: &Experiment = &suite.experiments[0];
    let (report, _) = run_suite(
        &ExperimentSuite {
            experiments: vec![exp.clone()],
        },
        Method::LcbGp,
        0,
        1,
    )
    .unwrap();
    let abl = ablation_kappa(exp, Method::LcbGp, &[2.0], exp.repeats, 0, 1).unwrap();
    assert_eq!(abl.len(), 1);
    assert_eq!(abl[0].1, report);
    assert!(ablation_kappa(exp, Method::LcbGp, &[-1.0], 1, 0, 1).is_err());
    assert!(ablation_kappa(exp, Method::LcbGp, &[], 1, 0, 1).is_err());
}

#[test]
fn failing_runs_are_counted_not_fatal() {
    let mut exp = Experiment::new(BlackBoxSpec::ackley(), 4, 100);
    exp.repeats = 2;
    exp.template.budget = 6;
    exp.template.stop_at_solution = false;
    // a 2 x 2 grid runs out of candidates on the fifth call
    exp.template.candidates.size = 2;
    let suite = ExperimentSuite {
        experiments: vec![exp],
    };
    let (report, runs) = run_suite(&suite, Method::EgoGp, 0, 1).unwrap();
    let e = &report.entries[0];
    assert_eq!(e.repeats, 2);
    assert_eq!(e.failed_runs, 2);
    assert_eq!(e.p, 0.0);
    for r in &runs.runs["ackley"] {
        assert_eq!(r.iterations.len(), 4);
        assert!(matches!(r.status, RunStatus::Failed { .. }));
    }
}

#[test]
fn unwritable_output_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert!(emit_report(&MetricsReport::default(), ReportFormat::Csv, &blocker.join("sub")).is_err());
}

proptest! {
    #[test]
    fn probability_bounds_and_stderr_formula(flags in prop::collection::vec(any::<bool>(), 1..30)) {
        let recs: Vec<RunRecord> = flags.iter().map(|s| record(1.0, &[0.5], *s)).collect();
        let (p, se) = eps_probability(&recs);
        prop_assert!((0.0..=1.0).contains(&p));
        let r = flags.len() as f64;
        prop_assert!((se - (p * (1.0 - p) / r).sqrt()).abs() <= 1e-12);
    }
}
