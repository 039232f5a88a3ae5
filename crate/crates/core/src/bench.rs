//! Experiment suites, repeated runs, aggregate metrics and plot-data files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionConfig, AcquisitionKind, DEFAULT_KAPPA};
use crate::blackbox::BlackBoxSpec;
use crate::error::{Error, Result};
use crate::optimizer::{run, RunConfig, RunRecord, RunStatus};
use crate::surrogate::SurrogateKind;

pub const DEFAULT_REPEATS: usize = 10;
pub const DISTANCE_CHECKPOINT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    WugoWgan,
    WugoEnergy,
    EgoGp,
    EgoDe,
    LcbGp,
    LcbDe,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::WugoWgan,
        Method::WugoEnergy,
        Method::EgoGp,
        Method::EgoDe,
        Method::LcbGp,
        Method::LcbDe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::WugoWgan => "wugo_wgan",
            Method::WugoEnergy => "wugo_energy",
            Method::EgoGp => "ego_gp",
            Method::EgoDe => "ego_de",
            Method::LcbGp => "lcb_gp",
            Method::LcbDe => "lcb_de",
        }
    }

    pub fn surrogate(self) -> SurrogateKind {
        match self {
            Method::WugoWgan => SurrogateKind::WganGp,
            Method::WugoEnergy => SurrogateKind::EnergyGen,
            Method::EgoGp | Method::LcbGp => SurrogateKind::Gp,
            Method::EgoDe | Method::LcbDe => SurrogateKind::DeepEnsemble,
        }
    }

    pub fn acquisition(self) -> AcquisitionKind {
        match self {
            Method::WugoWgan | Method::WugoEnergy => AcquisitionKind::WuRegret,
            Method::EgoGp | Method::EgoDe => AcquisitionKind::EiGaussian,
            Method::LcbGp | Method::LcbDe => AcquisitionKind::Lcb,
        }
    }

    /// Set surrogate and acquisition on `cfg`, keeping its κ.
    pub fn apply(self, cfg: &mut RunConfig) {
        cfg.surrogate = self.surrogate();
        cfg.acquisition = AcquisitionConfig {
            kind: self.acquisition(),
            ..cfg.acquisition
        };
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "method",
                name: s.to_string(),
            })
    }
}

/// One experiment: a run template and how often to repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub id: String,
    /// Surrogate, acquisition kind and seed are set per run.
    pub template: RunConfig,
    pub repeats: usize,
}

impl Experiment {
    pub fn new(blackbox: BlackBoxSpec, n_init: usize, n_sample: usize) -> Self {
        let mut template = RunConfig::new(
            blackbox,
            SurrogateKind::WganGp,
            AcquisitionConfig::new(AcquisitionKind::WuRegret),
        );
        template.n_init = n_init;
        template.n_sample = n_sample;
        Self {
            id: template.blackbox.name(),
            template,
            repeats: DEFAULT_REPEATS,
        }
    }

    pub fn config(&self, method: Method, seed: u64) -> RunConfig {
        let mut cfg = self.template.clone();
        method.apply(&mut cfg);
        cfg.seed = seed;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSuite {
    pub experiments: Vec<Experiment>,
}

impl ExperimentSuite {
    /// The seven synthetic experiments with their initial-design sizes and
    /// per-call sample sizes.
    pub fn builtin() -> Self {
        let dims = |r: Result<BlackBoxSpec>| r.expect("fixed dimension is valid");
        Self {
            experiments: vec![
                Experiment::new(BlackBoxSpec::three_hump_camel(), 4, 100),
                Experiment::new(BlackBoxSpec::ackley(), 4, 100),
                Experiment::new(BlackBoxSpec::levi(), 4, 100),
                Experiment::new(BlackBoxSpec::himmelblau(), 4, 10),
                Experiment::new(dims(BlackBoxSpec::rosenbrock(8)), 121, 100),
                Experiment::new(dims(BlackBoxSpec::rosenbrock(20)), 25, 100),
                Experiment::new(dims(BlackBoxSpec::styblinski_tang(20)), 25, 100),
            ],
        }
    }

    /// The four two-dimensional built-in experiments.
    pub fn two_dimensional() -> Self {
        let mut s = Self::builtin();
        s.experiments.retain(|e| e.template.blackbox.dim() == 2);
        s
    }

    pub fn get(&self, id: &str) -> Option<&Experiment> {
        self.experiments.iter().find(|e| e.id == id)
    }

    /// Keep only the listed experiment ids, in the given order.
    pub fn select(&self, ids: &[String]) -> Result<Self> {
        let experiments = ids
            .iter()
            .map(|id| {
                self.get(id).cloned().ok_or_else(|| Error::UnknownName {
                    kind: "experiment",
                    name: id.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { experiments })
    }

    /// Apply a flat `key = value` override set to every experiment.
    pub fn apply_overrides(&mut self, overrides: &Overrides) -> Result<()> {
        for exp in &mut self.experiments {
            overrides.apply(exp)?;
        }
        Ok(())
    }
}

/// Mean and population std of a convergence curve at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub experiment: String,
    pub method: String,
    pub repeats: usize,
    pub kappa: f64,
    pub p: f64,
    pub stderr: f64,
    pub dist50_mean: f64,
    pub dist50_std: f64,
    pub failed_runs: usize,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub entries: Vec<MethodSummary>,
}

impl MetricsReport {
    pub fn find(&self, experiment: &str, method: &str) -> Option<&MethodSummary> {
        self.entries
            .iter()
            .find(|e| e.experiment == experiment && e.method == method)
    }

    pub fn merge(&mut self, other: MetricsReport) {
        self.entries.extend(other.entries);
    }
}

/// `sqrt(p (1 - p) / r)`
pub fn bernoulli_stderr(p: f64, repeats: usize) -> f64 {
    (p * (1.0 - p) / repeats as f64).sqrt()
}

/// Fraction of runs that reached an ε-solution, with its Bernoulli standard
/// error. An empty record list gives `(0, 0)`.
pub fn eps_probability(records: &[RunRecord]) -> (f64, f64) {
    if records.is_empty() {
        return (0.0, 0.0);
    }
    let solved = records.iter().filter(|r| r.solved()).count();
    let p = solved as f64 / records.len() as f64;
    (p, bernoulli_stderr(p, records.len()))
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Mean and population std over runs of the running-minimum distance after
/// `k` loop calls.
pub fn distance_after_k(records: &[RunRecord], k: usize) -> (f64, f64) {
    mean_std(records.iter().map(move |r| r.distance_at(k)))
}

/// Rows `0..=budget` of the mean ± std running-minimum distance.
pub fn convergence_curve(records: &[RunRecord], budget: usize) -> Vec<CurvePoint> {
    (0..=budget)
        .map(|k| {
            let (mean, std) = distance_after_k(records, k);
            CurvePoint {
                iteration: k,
                mean,
                std,
            }
        })
        .collect()
}

pub fn summarize(experiment: &Experiment, method: Method, records: &[RunRecord]) -> MethodSummary {
    let (p, stderr) = eps_probability(records);
    let (dist50_mean, dist50_std) = distance_after_k(records, DISTANCE_CHECKPOINT);
    MethodSummary {
        experiment: experiment.id.clone(),
        method: method.as_str().to_string(),
        repeats: records.len(),
        kappa: experiment.template.acquisition.kappa,
        p,
        stderr,
        dist50_mean,
        dist50_std,
        failed_runs: records
            .iter()
            .filter(|r| matches!(r.status, RunStatus::Failed { .. }))
            .count(),
        curve: convergence_curve(records, experiment.template.budget),
    }
}

/// Records of every run of a suite, grouped by experiment id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteRuns {
    pub method: Option<Method>,
    pub runs: BTreeMap<String, Vec<RunRecord>>,
}

/// A run that errors before its loop starts still counts, as a failure.
fn run_or_record_failure(cfg: &RunConfig) -> RunRecord {
    run(cfg).unwrap_or_else(|e| RunRecord {
        blackbox: cfg.blackbox.name(),
        method: String::new(),
        seed: cfg.seed,
        budget: cfg.budget,
        init_thetas: Vec::new(),
        init_distance: f64::INFINITY,
        iterations: Vec::new(),
        status: RunStatus::Failed {
            reason: e.to_string(),
        },
    })
}

/// Run `repeats` seeds `base_seed..` of every experiment on `parallelism`
/// worker threads.
pub fn run_suite(
    suite: &ExperimentSuite,
    method: Method,
    base_seed: u64,
    parallelism: usize,
) -> Result<(MetricsReport, SuiteRuns)> {
    for exp in &suite.experiments {
        exp.config(method, base_seed).validate()?;
        if exp.repeats == 0 {
            return Err(Error::Config(format!("{}: repeats must be >= 1", exp.id)));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let jobs: Vec<(usize, u64)> = suite
        .experiments
        .iter()
        .enumerate()
        .flat_map(|(i, e)| (0..e.repeats as u64).map(move |r| (i, base_seed + r)))
        .collect();
    let records: Vec<(usize, RunRecord)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, seed)| (i, run_or_record_failure(&suite.experiments[i].config(method, seed))))
            .collect()
    });
    let mut report = MetricsReport::default();
    let mut runs = SuiteRuns {
        method: Some(method),
        runs: BTreeMap::new(),
    };
    for (i, exp) in suite.experiments.iter().enumerate() {
        let recs: Vec<RunRecord> = records
            .iter()
            .filter(|(j, _)| *j == i)
            .map(|(_, r)| r.clone())
            .collect();
        report.entries.push(summarize(exp, method, &recs));
        runs.runs.insert(exp.id.clone(), recs);
    }
    Ok((report, runs))
}

/// Repeat one experiment for each κ in `kappas` with `repeats` seeds.
pub fn ablation_kappa(
    experiment: &Experiment,
    method: Method,
    kappas: &[f64],
    repeats: usize,
    base_seed: u64,
    parallelism: usize,
) -> Result<Vec<(f64, MetricsReport, SuiteRuns)>> {
    if kappas.is_empty() {
        return Err(Error::Config("empty kappa list".into()));
    }
    kappas
        .iter()
        .map(|&kappa| {
            let mut exp = experiment.clone();
            exp.repeats = repeats;
            exp.template.acquisition.kappa = kappa;
            exp.template.acquisition.validate()?;
            let suite = ExperimentSuite {
                experiments: vec![exp],
            };
            let (report, runs) = run_suite(&suite, method, base_seed, parallelism)?;
            Ok((kappa, report, runs))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::UnknownName {
                kind: "format",
                name: s.to_string(),
            }),
        }
    }
}

/// At most six significant digits, shortest form.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// Write through a temporary sibling and rename into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub const SUMMARY_HEADER: &str = "experiment,method,p,stderr,dist50_mean,dist50_std";
pub const CURVE_HEADER: &str = "iteration,mean,std";

pub fn summary_csv(report: &MetricsReport) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for e in &report.entries {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.experiment,
            e.method,
            sig6(e.p),
            sig6(e.stderr),
            sig6(e.dist50_mean),
            sig6(e.dist50_std)
        ));
    }
    s
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = format!("{CURVE_HEADER}\n");
    for c in curve {
        s.push_str(&format!("{},{},{}\n", c.iteration, sig6(c.mean), sig6(c.std)));
    }
    s
}

/// Write the report into `out_dir`. CSV gives `summary.csv` and one
/// `curves_<exp>_<method>.csv` per entry; JSON gives `summary.json`.
pub fn emit_report(report: &MetricsReport, format: ReportFormat, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            let path = out_dir.join("summary.csv");
            write_atomic(&path, summary_csv(report).as_bytes())?;
            written.push(path);
            for e in &report.entries {
                let path = out_dir.join(format!("curves_{}_{}.csv", e.experiment, e.method));
                write_atomic(&path, curve_csv(&e.curve).as_bytes())?;
                written.push(path);
            }
        }
        ReportFormat::Json => {
            let path = out_dir.join("summary.json");
            let mut json = serde_json::to_string_pretty(report)?;
            json.push('\n');
            write_atomic(&path, json.as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn read_report(dir: &Path) -> Result<MetricsReport> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Persist each record as `runs/<exp>_<method>_seed<k>.json` and the
/// distance traces as `runs_<exp>_<method>.csv`.
pub fn persist_runs(runs: &SuiteRuns, out_dir: &Path) -> Result<()> {
    let method = runs.method.map(Method::as_str).unwrap_or("run");
    let run_dir = out_dir.join("runs");
    fs::create_dir_all(&run_dir).map_err(|e| Error::Io(format!("{}: {e}", run_dir.display())))?;
    for (exp, records) in &runs.runs {
        let mut csv = String::from("run_id,iteration,distance\n");
        for r in records {
            let path = run_dir.join(format!("{exp}_{method}_seed{}.json", r.seed));
            write_atomic(&path, serde_json::to_string(r)?.as_bytes())?;
            for (k, d) in r.distance_series().iter().enumerate() {
                csv.push_str(&format!("{},{},{}\n", r.seed, k, sig6(*d)));
            }
        }
        write_atomic(&out_dir.join(format!("runs_{exp}_{method}.csv")), csv.as_bytes())?;
    }
    Ok(())
}

/// Flat `key = value` settings read from a config file. Recognised keys:
///
/// | key | meaning |
/// |---|---|
/// | `experiments` | comma-separated experiment ids to keep |
/// | `repeats`, `budget`, `epsilon`, `kappa` | per-experiment settings |
/// | `n_init`, `n_sample` | initial design size, draws per simulator call |
/// | `candidate_size` | grid points per axis or LHS point count |
/// | `gen.epochs`, `gen.batch_size`, `gen.max_batches_per_epoch` | generator training |
/// | `gen.lr`, `gen.warm_start`, `gen.warm_lr` | generator learning rates |
/// | `ensemble.members`, `ensemble.epochs` | deep ensemble |
///
/// Blank lines and lines starting with `#` are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub values: BTreeMap<String, String>,
}

const KNOWN_KEYS: [&str; 17] = [
    "experiments",
    "repeats",
    "budget",
    "epsilon",
    "kappa",
    "n_init",
    "n_sample",
    "candidate_size",
    "gen.epochs",
    "gen.batch_size",
    "gen.max_batches_per_epoch",
    "gen.lr",
    "gen.warm_start",
    "gen.warm_lr",
    "gen.critic_lr_scale",
    "ensemble.members",
    "ensemble.epochs",
];

impl Overrides {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", n + 1)));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("bad value for `{key}`: {v}")))
            })
            .transpose()
    }

    pub fn experiments(&self) -> Option<Vec<String>> {
        self.values
            .get("experiments")
            .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }

    pub fn apply(&self, exp: &mut Experiment) -> Result<()> {
        let t = &mut exp.template;
        if let Some(v) = self.get("repeats")? {
            exp.repeats = v;
        }
        if let Some(v) = self.get("budget")? {
            t.budget = v;
        }
        if let Some(v) = self.get("epsilon")? {
            t.epsilon = v;
        }
        if let Some(v) = self.get("kappa")? {
            t.acquisition.kappa = v;
        }
        if let Some(v) = self.get("n_init")? {
            t.n_init = v;
        }
        if let Some(v) = self.get("n_sample")? {
            t.n_sample = v;
        }
        if let Some(v) = self.get("candidate_size")? {
            t.candidates.size = v;
        }
        if let Some(v) = self.get("gen.epochs")? {
            t.gen.epochs = v;
        }
        if let Some(v) = self.get("gen.batch_size")? {
            t.gen.batch_size = v;
        }
        if let Some(v) = self.get("gen.max_batches_per_epoch")? {
            t.gen.max_batches_per_epoch = v;
        }
        if let Some(v) = self.get("gen.lr")? {
            t.gen.lr = v;
        }
        if let Some(v) = self.get("gen.warm_start")? {
            t.gen.warm_start = v;
        }
        if let Some(v) = self.get("gen.warm_lr")? {
            t.gen.warm_schedule.base_lr = v;
        }
        if let Some(v) = self.get("gen.critic_lr_scale")? {
            t.gen.critic_lr_scale = v;
        }
        if let Some(v) = self.get("ensemble.members")? {
            t.ensemble.members = v;
        }
        if let Some(v) = self.get("ensemble.epochs")? {
            t.ensemble.epochs = v;
        }
        t.acquisition.validate()?;
        t.gen.validate()?;
        Ok(())
    }
}

pub fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}
