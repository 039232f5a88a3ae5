use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wugo::bench::{
    ablation_kappa, emit_report, persist_runs, read_report, run_suite, sig6, write_atomic, Experiment,
    ExperimentSuite, Method, MetricsReport, Overrides, ReportFormat,
};
use wugo::blackbox::BlackBoxSpec;
use wugo::optimizer::run;
use wugo::Error;

/// Gradient-free optimisation of stochastic black boxes with generative
/// surrogates and Wasserstein uncertainty.
#[derive(Parser)]
#[command(name = "wugo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a method on every experiment of a suite and write the report.
    Bench {
        /// `builtin` (all seven experiments) or `2d` (the two-dimensional ones).
        #[arg(long, default_value = "builtin")]
        suite: String,
        #[arg(long)]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Flat `key = value` file overriding suite parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
        /// Comma-separated experiment ids to keep.
        #[arg(long)]
        experiments: Option<String>,
    },
    /// One optimisation run, printed as JSON.
    Run {
        #[arg(long)]
        blackbox: String,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the record here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat one experiment over several values of κ.
    Ablate {
        #[arg(long)]
        blackbox: String,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 4.0, 8.0])]
        kappas: Vec<f64>,
        #[arg(long, default_value = "wugo_wgan")]
        method: Method,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "ablation")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Re-emit a stored `summary.json` as CSV or JSON.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        /// Defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::UnknownName { .. } | Error::InvalidArgument(_) | Error::DimensionMismatch { .. }
    )
}

fn overrides(config: Option<&Path>) -> wugo::Result<Overrides> {
    match config {
        Some(p) => Overrides::load(p),
        None => Ok(Overrides::default()),
    }
}

fn experiment_for(blackbox: &str, o: &Overrides) -> wugo::Result<Experiment> {
    let mut exp = match ExperimentSuite::builtin().get(blackbox) {
        Some(e) => e.clone(),
        None => Experiment::new(blackbox.parse::<BlackBoxSpec>()?, 4, 100),
    };
    o.apply(&mut exp)?;
    Ok(exp)
}

fn write_both(report: &MetricsReport, out: &Path) -> wugo::Result<()> {
    emit_report(report, ReportFormat::Csv, out)?;
    emit_report(report, ReportFormat::Json, out)?;
    Ok(())
}

fn print_summary(report: &MetricsReport) {
    for e in &report.entries {
        println!(
            "{:<18} {:<12} p = {} ± {}  dist50 = {} ± {}  failed = {}",
            e.experiment,
            e.method,
            sig6(e.p),
            sig6(e.stderr),
            sig6(e.dist50_mean),
            sig6(e.dist50_std),
            e.failed_runs
        );
    }
}

fn execute(cmd: Command) -> wugo::Result<()> {
    match cmd {
        Command::Bench {
            suite,
            method,
            seed,
            out,
            kappa,
            parallel,
            config,
            repeats,
            budget,
            experiments,
        } => {
            let mut s = match suite.as_str() {
                "builtin" => ExperimentSuite::builtin(),
                "2d" => ExperimentSuite::two_dimensional(),
                _ => {
                    return Err(Error::UnknownName {
                        kind: "suite",
                        name: suite,
                    })
                }
            };
            let mut o = overrides(config.as_deref())?;
            if let Some(k) = kappa {
                o.set("kappa", k);
            }
            if let Some(r) = repeats {
                o.set("repeats", r);
            }
            if let Some(b) = budget {
                o.set("budget", b);
            }
            if let Some(e) = experiments {
                o.set("experiments", e);
            }
            if let Some(ids) = o.experiments() {
                s = s.select(&ids)?;
            }
            s.apply_overrides(&o)?;
            let (report, runs) = run_suite(&s, method, seed, parallel)?;
            persist_runs(&runs, &out)?;
            write_both(&report, &out)?;
            print_summary(&report);
            Ok(())
        }
        Command::Run {
            blackbox,
            method,
            budget,
            seed,
            kappa,
            config,
            out,
        } => {
            let mut o = overrides(config.as_deref())?;
            if let Some(b) = budget {
                o.set("budget", b);
            }
            if let Some(k) = kappa {
                o.set("kappa", k);
            }
            let exp = experiment_for(&blackbox, &o)?;
            let record = run(&exp.config(method, seed))?;
            let json = serde_json::to_string_pretty(&record)?;
            match out {
                Some(p) => write_atomic(&p, format!("{json}\n").as_bytes())?,
                None => println!("{json}"),
            }
            eprintln!("status: {:?}", record.status);
            Ok(())
        }
        Command::Ablate {
            blackbox,
            kappas,
            method,
            repeats,
            seed,
            out,
            parallel,
            budget,
            config,
        } => {
            let mut o = overrides(config.as_deref())?;
            if let Some(b) = budget {
                o.set("budget", b);
            }
            let exp = experiment_for(&blackbox, &o)?;
            let results = ablation_kappa(&exp, method, &kappas, repeats, seed, parallel)?;
            let mut csv = String::from("kappa,p,stderr,dist50_mean,dist50_std\n");
            for (kappa, report, runs) in &results {
                let dir = out.join(format!("kappa_{}", sig6(*kappa)));
                persist_runs(runs, &dir)?;
                write_both(report, &dir)?;
                let e = &report.entries[0];
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    sig6(*kappa),
                    sig6(e.p),
                    sig6(e.stderr),
                    sig6(e.dist50_mean),
                    sig6(e.dist50_std)
                ));
                print!("kappa {:<6} ", sig6(*kappa));
                print_summary(report);
            }
            write_atomic(&out.join("kappa_summary.csv"), csv.as_bytes())
        }
        Command::Report { input, format, out } => {
            let report = read_report(&input)?;
            let files = emit_report(&report, format, out.as_deref().unwrap_or(&input))?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_config_error(&e) { 1 } else { 2 })
        }
    }
}
