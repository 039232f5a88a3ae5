//! Run a reduced two-dimensional suite for one method and write the report
//! files a `wugo bench` call would produce.
//!
//! ```text
//! cargo run --release --example bench_report -- <out_dir>
//! ```

use std::path::{Path, PathBuf};

use wugo::bench::{emit_report, persist_runs, read_report, run_suite, ExperimentSuite, Method, MetricsReport, ReportFormat};

pub fn run_example(out_dir: &Path, repeats: usize, budget: usize) -> wugo::Result<(MetricsReport, Vec<PathBuf>)> {
    let mut suite = ExperimentSuite::two_dimensional();
    for e in &mut suite.experiments {
        e.repeats = repeats;
        e.template.budget = budget;
    }
    let (report, runs) = run_suite(&suite, Method::EgoGp, 0, 0)?;
    let mut files = emit_report(&report, ReportFormat::Csv, out_dir)?;
    files.extend(emit_report(&report, ReportFormat::Json, out_dir)?);
    persist_runs(&runs, out_dir)?;
    Ok((read_report(out_dir)?, files))
}

#[allow(dead_code)]
fn main() -> wugo::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("wugo_bench"));
    let (report, files) = run_example(&out, 3, 20)?;
    for e in &report.entries {
        println!("{:<18} {:<8} p = {:.2} ± {:.3}", e.experiment, e.method, e.p, e.stderr);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
