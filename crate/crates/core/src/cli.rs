//! The `conformal-ood` command line.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 capacity or
//! calibration failure, 3 I/O failure. Values are resolved as command-line
//! flag, then `--config` file, then the default shown in `--help`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::conformal::CalibrationSet;
use crate::error::{Error, Result};
use crate::evaluation::evaluate_detector;
use crate::io::{self, ResultSet, RunConfig, SampleResult};
use crate::multiple_testing::cal_size::{
    bh_condition, bonferroni_condition, required_cal_size, required_cal_size_bonferroni,
    CalSizeRequest, ConditionCheck,
};
use crate::multiple_testing::{DetectorConfig, Method, OodDetector};
use crate::numerics::Probability;
use crate::score_matrix::ScoreMatrix;
use crate::scores::{ClassStats, EnergyConfig, FitOptions, GramConfig, Ridge};
use crate::simulation::{self, DetectorSpec, SyntheticModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CAPACITY: i32 = 2;
pub const EXIT_IO: i32 = 3;

const DEFAULT_ALPHA: f64 = 0.1;
const DEFAULT_EPSILON: f64 = 1.0;
const DEFAULT_DELTA: f64 = 0.1;
const DEFAULT_SEED: u64 = 0;
const DEFAULT_WORKERS: usize = 1;

#[derive(Debug, Parser)]
#[command(
    name = "conformal-ood",
    version,
    about = "OOD detection by conformal p-values and multiple testing"
)]
pub struct Cli {
    /// TOML run configuration; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Master random seed [default: 0]. The only source of randomness.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for `simulate` [default: 1]. Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smallest calibration-set size meeting the conditional false-alarm guarantee.
    CalibrateSize(CalibrateSizeArgs),
    /// Fit Mahalanobis and Gram statistics on labeled training features.
    FitScores(FitScoresArgs),
    /// Turn feature bundles into a score matrix (larger = more OOD).
    Score(ScoreArgs),
    /// Flag test rows of a score matrix as OOD against a calibration matrix.
    Detect(DetectArgs),
    /// Detection power, achieved false alarm and per-score AUROC.
    Evaluate(EvaluateArgs),
    /// Monte Carlo experiments.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    /// Target conditional false-alarm probability [default: 0.1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Slack of the correction constant, >= 0 [default: 1].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Probability that the guarantee may fail [default: 0.1].
    #[arg(long)]
    pub delta: Option<f64>,
    /// bh, bonferroni or naive [default: bh].
    #[arg(long)]
    pub method: Option<Method>,
}

#[derive(Debug, Args)]
pub struct CalibrateSizeArgs {
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Number of score functions K (required here or in the config file).
    #[arg(long)]
    pub k: Option<usize>,
    /// Largest calibration size to try [default: 1000000].
    #[arg(long)]
    pub scan_limit: Option<usize>,
    /// Also solve for every K in 1..=N and print one size per K.
    #[arg(long, value_name = "N")]
    pub sweep_k: Option<usize>,
    /// Write the printed table as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitScoresArgs {
    /// Labeled training features (JSON feature file).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Output statistics file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fixed ridge added to the covariance diagonal [default: relative 1e-6 · trace / d].
    #[arg(long, conflicts_with = "ridge_scale")]
    pub ridge: Option<f64>,
    /// Relative ridge scale: λ = scale · trace(Σ) / d.
    #[arg(long)]
    pub ridge_scale: Option<f64>,
    /// Comma-separated Gram orders [default: 1,...,10].
    #[arg(long, value_delimiter = ',')]
    pub powers: Option<Vec<u32>>,
    /// Share of each class held out for the Gram normalizer [default: 0.1].
    #[arg(long)]
    pub holdout_fraction: Option<f64>,
    /// Skip the Mahalanobis fit.
    #[arg(long)]
    pub no_mahalanobis: bool,
    /// Skip the Gram fit.
    #[arg(long)]
    pub no_gram: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Statistics written by `fit-scores`.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Feature file to score.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Append the energy score (needs softmax vectors).
    #[arg(long)]
    pub energy: bool,
    /// Energy temperature [default: 100].
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Calibration score matrix (in-distribution, held out from training).
    #[arg(long)]
    pub cal: Option<PathBuf>,
    /// Test score matrix; columns must match `--cal` exactly.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Results JSON [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Calibration score matrix.
    #[arg(long)]
    pub cal: Option<PathBuf>,
    /// In-distribution test score matrix.
    #[arg(long = "in", value_name = "IN")]
    pub in_dist: Option<PathBuf>,
    /// OOD test score matrix.
    #[arg(long)]
    pub ood: Option<PathBuf>,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Results JSON [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// Sum test on two normal scores.
    T1,
    /// Two-score step-up test with ladder iα/2.
    T2,
    /// Conditional false alarm over repeated calibration draws.
    Theorem1,
    /// Power of a detector against a mean-shifted alternative.
    Power,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: Scenario,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// t1/t2: mean of the two scores [default: 0,0].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu: Option<Vec<f64>>,
    /// t1/t2/power: number of trials [default: 100000 for t1/t2, 10000 for power].
    #[arg(long)]
    pub trials: Option<u64>,
    /// theorem1/power: number of scores K [default: 5, or the length of --shift].
    #[arg(long)]
    pub k: Option<usize>,
    /// theorem1/power: calibration size [default: required size for the detector].
    #[arg(long)]
    pub n_cal: Option<usize>,
    /// theorem1: calibration draws [default: 50].
    #[arg(long)]
    pub cal_draws: Option<u64>,
    /// theorem1: test draws per calibration set [default: 20000].
    #[arg(long)]
    pub test_draws: Option<u64>,
    /// power: mean of the alternative, one value per score [default: 5 on every score].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub shift: Option<Vec<f64>>,
    /// power: evaluate the conformal test of this single score (0-based) instead.
    #[arg(long)]
    pub single_score: Option<usize>,
    /// Report JSON [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Maps a library error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Capacity { .. } | Error::Calibration(_) | Error::Fit(_) => EXIT_CAPACITY,
        Error::Io { .. } | Error::Checksum(_) => EXIT_IO,
        Error::Json { source, .. } if source.is_io() => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

struct Resolved<'a> {
    cli: &'a Cli,
    file: RunConfig,
}

impl Resolved<'_> {
    fn seed(&self) -> u64 {
        self.cli.seed.or(self.file.seed).unwrap_or(DEFAULT_SEED)
    }

    fn workers(&self) -> usize {
        self.cli
            .workers
            .or(self.file.workers)
            .unwrap_or(DEFAULT_WORKERS)
    }

    fn detector(&self, args: &DetectorArgs, k: usize) -> Result<DetectorConfig> {
        let d = &self.file.detector;
        DetectorConfig::new(
            args.alpha.or(d.alpha).unwrap_or(DEFAULT_ALPHA),
            args.epsilon.or(d.epsilon).unwrap_or(DEFAULT_EPSILON),
            args.delta.or(d.delta).unwrap_or(DEFAULT_DELTA),
            k,
            args.method.or(d.method).unwrap_or(Method::Bh),
        )
    }

    fn k(&self, flag: Option<usize>) -> Option<usize> {
        flag.or(self.file.detector.k)
    }

    fn scan_limit(&self, flag: Option<usize>) -> usize {
        flag.or(self.file.detector.scan_limit)
            .unwrap_or(CalSizeRequest::DEFAULT_SCAN_LIMIT)
    }
}

fn require(path: Option<&PathBuf>, fallback: Option<&PathBuf>, flag: &str) -> Result<PathBuf> {
    path.or(fallback)
        .cloned()
        .ok_or_else(|| Error::config(format!("missing required --{flag}")))
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let r = Resolved { cli, file };
    match &cli.command {
        Command::CalibrateSize(a) => calibrate_size(&r, a, stdout),
        Command::FitScores(a) => fit_scores(&r, a, stdout),
        Command::Score(a) => score(&r, a, stdout),
        Command::Detect(a) => detect(&r, a, stdout, stderr),
        Command::Evaluate(a) => evaluate(&r, a, stdout),
        Command::Simulate(a) => simulate(&r, a, stdout),
    }
}

fn check_of(method: Method, req: &CalSizeRequest, n: usize) -> ConditionCheck {
    match method {
        Method::Bonferroni => bonferroni_condition(req, n),
        _ => bh_condition(req, n),
    }
}

fn solve(method: Method, req: &CalSizeRequest) -> Result<usize> {
    match method {
        Method::Bh => required_cal_size(req),
        Method::Bonferroni => required_cal_size_bonferroni(req),
        Method::NaiveAverage => Err(Error::config(
            "the naive averaging rule has no calibration-size guarantee",
        )),
    }
}

fn calibrate_size(r: &Resolved, a: &CalibrateSizeArgs, out: &mut dyn Write) -> Result<()> {
    let k = r
        .k(a.k)
        .ok_or_else(|| Error::config("missing required --k"))?;
    let cfg = r.detector(&a.detector, k)?;
    let req = CalSizeRequest::from_config(&cfg, r.scan_limit(a.scan_limit))?;
    let mut csv = String::new();
    if let Some(k_max) = a.sweep_k {
        if k_max == 0 {
            return Err(Error::config("--sweep-k must be at least 1"));
        }
        writeln!(
            out,
            "method = {}, alpha = {}, epsilon = {}, delta = {}",
            cfg.method, req.alpha, req.epsilon, req.delta
        )
        .map_err(out_err)?;
        writeln!(out, "{:>4} {:>10}", "K", "n_cal").map_err(out_err)?;
        csv.push_str("k,n_cal\n");
        for k in 1..=k_max {
            let n = solve(cfg.method, &CalSizeRequest { k, ..req })?;
            writeln!(out, "{k:>4} {n:>10}").map_err(out_err)?;
            csv.push_str(&format!("{k},{n}\n"));
        }
    } else {
        let n = solve(cfg.method, &req)?;
        let check = check_of(cfg.method, &req, n);
        writeln!(out, "n_cal = {n}").map_err(out_err)?;
        writeln!(
            out,
            "method = {}, alpha = {}, epsilon = {}, delta = {}, K = {}, target = {:.6}, margin = {:.3e}",
            cfg.method, req.alpha, req.epsilon, req.delta, req.k, check.target, check.margin
        )
        .map_err(out_err)?;
        writeln!(
            out,
            "{:>4} {:>12} {:>8} {:>10} {:>12} {:>14} {:>12}",
            "j", "level", "a", "b", "x", "I_x(a,b)", "margin"
        )
        .map_err(out_err)?;
        csv.push_str("j,level,a,b,x,cdf,margin\n");
        for rung in &check.rungs {
            let cdf = rung.cdf.unwrap_or(f64::NAN);
            writeln!(
                out,
                "{:>4} {:>12.6e} {:>8} {:>10} {:>12.6e} {:>14.10} {:>12.3e}",
                rung.j,
                rung.level,
                rung.a,
                rung.b,
                rung.x,
                cdf,
                cdf - check.target
            )
            .map_err(out_err)?;
            csv.push_str(&format!(
                "{},{:?},{},{},{:?},{:?},{:?}\n",
                rung.j,
                rung.level,
                rung.a,
                rung.b,
                rung.x,
                cdf,
                cdf - check.target
            ));
        }
    }
    if let Some(path) = &a.csv {
        std::fs::write(path, csv).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn fit_scores(r: &Resolved, a: &FitScoresArgs, out: &mut dyn Write) -> Result<()> {
    let paths = &r.file.paths;
    let s = &r.file.scores;
    let train = require(a.train.as_ref(), paths.train.as_ref(), "train")?;
    let dest = require(a.out.as_ref(), paths.stats.as_ref(), "out")?;
    let ridge = match (a.ridge, a.ridge_scale) {
        (Some(l), _) => Ridge::Absolute(l),
        (None, Some(s)) => Ridge::Relative(s),
        (None, None) => s.ridge.unwrap_or_default(),
    };
    let defaults = GramConfig::default();
    let gram = GramConfig {
        powers: a
            .powers
            .clone()
            .or_else(|| s.powers.clone())
            .unwrap_or(defaults.powers),
        holdout_fraction: a
            .holdout_fraction
            .or(s.holdout_fraction)
            .unwrap_or(defaults.holdout_fraction),
        seed: r.seed(),
    };
    if gram.powers.is_empty() || gram.powers.contains(&0) {
        return Err(Error::config("Gram powers must be positive integers"));
    }
    if !(0.0..1.0).contains(&gram.holdout_fraction) {
        return Err(Error::config("holdout fraction must lie in [0, 1)"));
    }
    let opts = FitOptions {
        mahalanobis: (!a.no_mahalanobis).then_some(ridge),
        gram: (!a.no_gram).then_some(gram),
    };
    let bundles = io::read_feature_bundles(&train)?;
    let stats = ClassStats::fit(&bundles, &opts)?;
    io::save_class_stats(&stats, &dest)?;
    writeln!(
        out,
        "fitted {} layer(s) on {} samples -> {}",
        stats.layer_shapes.len(),
        bundles.len(),
        dest.display()
    )
    .map_err(out_err)
}

fn score(r: &Resolved, a: &ScoreArgs, out: &mut dyn Write) -> Result<()> {
    let paths = &r.file.paths;
    let stats_path = require(a.stats.as_ref(), paths.stats.as_ref(), "stats")?;
    let features = require(a.features.as_ref(), paths.features.as_ref(), "features")?;
    let stats = io::load_class_stats(&stats_path)?;
    let bundles = io::read_feature_bundles(&features)?;
    let energy = EnergyConfig::new(
        a.temperature
            .or(r.file.scores.temperature)
            .unwrap_or(EnergyConfig::default().temperature),
    )?;
    let with_energy = a.energy || r.file.scores.energy.unwrap_or(false);
    let kinds = stats.score_kinds(with_energy);
    let matrix = stats.score_matrix(&bundles, &kinds, &energy)?;
    match a.out.as_ref().or(paths.out.as_ref()) {
        Some(path) => {
            io::write_score_matrix(&matrix, path)?;
            writeln!(
                out,
                "wrote {} x {} scores ({}) -> {}",
                matrix.n_rows(),
                matrix.k(),
                matrix.names().join(", "),
                path.display()
            )
            .map_err(out_err)
        }
        None => io::format_score_matrix(&matrix, out).map_err(out_err),
    }
}

/// Human-readable difference between two column lists.
pub fn column_diff(cal: &[String], test: &[String]) -> String {
    let missing: Vec<&str> = cal
        .iter()
        .filter(|n| !test.contains(n))
        .map(String::as_str)
        .collect();
    let extra: Vec<&str> = test
        .iter()
        .filter(|n| !cal.contains(n))
        .map(String::as_str)
        .collect();
    let mut lines = vec![
        format!("  calibration: {}", cal.join(",")),
        format!("  test:        {}", test.join(",")),
    ];
    if !missing.is_empty() {
        lines.push(format!("  - only in calibration: {}", missing.join(",")));
    }
    if !extra.is_empty() {
        lines.push(format!("  + only in test: {}", extra.join(",")));
    }
    if missing.is_empty() && extra.is_empty() {
        lines.push("  same names in a different order".into());
    }
    lines.join("\n")
}

fn matching_columns(cal: &ScoreMatrix, other: &ScoreMatrix, what: &str) -> Result<()> {
    if cal.names() != other.names() {
        return Err(Error::ShapeMismatch(format!(
            "{what} columns differ from calibration columns\n{}",
            column_diff(cal.names(), other.names())
        )));
    }
    Ok(())
}

fn build_detector(
    r: &Resolved,
    args: &DetectorArgs,
    cal: &ScoreMatrix,
    stderr: Option<&mut dyn Write>,
) -> Result<OodDetector> {
    let cfg = r.detector(args, cal.k())?;
    if let (Some(err), Method::Bh | Method::Bonferroni) = (stderr, cfg.method) {
        // only scan up to the size at hand
        let req = CalSizeRequest::from_config(&cfg, cal.n_rows().max(1))?;
        if solve(cfg.method, &req).is_err() {
            let _ = writeln!(
                err,
                "warning: {} calibration rows do not meet the guarantee for alpha = {}, \
                 epsilon = {}, delta = {}, K = {}; see `calibrate-size`",
                cal.n_rows(),
                req.alpha,
                req.epsilon,
                req.delta,
                req.k
            );
        }
    }
    let set = CalibrationSet::from_rows(cal.names().to_vec(), cal.rows())?;
    OodDetector::new(set, cfg)
}

fn emit_json<T: serde::Serialize>(value: &T, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| out_err(e.into()))?;
    writeln!(out).map_err(out_err)
}

fn detect(r: &Resolved, a: &DetectArgs, out: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let paths = &r.file.paths;
    let cal = io::read_score_matrix(require(a.cal.as_ref(), paths.cal.as_ref(), "cal")?)?;
    let test = io::read_score_matrix(require(a.test.as_ref(), paths.test.as_ref(), "test")?)?;
    matching_columns(&cal, &test, "test")?;
    let detector = build_detector(r, &a.detector, &cal, Some(stderr))?;
    let mut results = ResultSet::new(Some(*detector.config()), cal.names().to_vec(), cal.n_rows());
    for (i, row) in test.rows().iter().enumerate() {
        results.samples.push(SampleResult {
            row: i,
            sample_id: test.ids().map(|ids| ids[i].clone()),
            detection: detector.detect(row)?,
        });
    }
    match a.out.as_ref().or(paths.out.as_ref()) {
        Some(path) => {
            io::write_results(&results, path)?;
            writeln!(
                out,
                "{} of {} test rows declared OOD -> {}",
                results.n_ood(),
                results.samples.len(),
                path.display()
            )
            .map_err(out_err)
        }
        None => emit_json(&results, out),
    }
}

fn evaluate(r: &Resolved, a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let paths = &r.file.paths;
    let cal = io::read_score_matrix(require(a.cal.as_ref(), paths.cal.as_ref(), "cal")?)?;
    let in_dist = io::read_score_matrix(require(a.in_dist.as_ref(), paths.test.as_ref(), "in")?)?;
    let ood = io::read_score_matrix(require(a.ood.as_ref(), paths.ood.as_ref(), "ood")?)?;
    matching_columns(&cal, &in_dist, "in-distribution")?;
    matching_columns(&cal, &ood, "OOD")?;
    let detector = build_detector(r, &a.detector, &cal, None)?;
    let report = evaluate_detector(&detector, &in_dist, &ood)?;
    let mut results = ResultSet::new(Some(*detector.config()), cal.names().to_vec(), cal.n_rows());
    results.evaluation = Some(report.clone());
    match a.out.as_ref().or(paths.out.as_ref()) {
        Some(path) => {
            io::write_results(&results, path)?;
            writeln!(
                out,
                "P_D = {:.4} at P_F = {:.4} (target {}) -> {}",
                report.power.pd,
                report.power.achieved_pf,
                report.power.target_pf,
                path.display()
            )
            .map_err(out_err)?;
            for s in &report.per_score_auroc {
                writeln!(out, "  AUROC {:<16} {:.4}", s.name, s.auroc).map_err(out_err)?;
            }
            Ok(())
        }
        None => emit_json(&results, out),
    }
}

fn two_vector(v: Option<&Vec<f64>>) -> Result<[f64; 2]> {
    match v.map(Vec::as_slice) {
        None => Ok([0.0, 0.0]),
        Some(&[a, b]) => Ok([a, b]),
        Some(other) => Err(Error::config(format!(
            "--mu needs exactly two values, got {}",
            other.len()
        ))),
    }
}

fn simulate(r: &Resolved, a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let seed = r.seed();
    let workers = r.workers();
    let report = match a.scenario {
        Scenario::T1 | Scenario::T2 => {
            let mu = two_vector(a.mu.as_ref())?;
            let alpha = Probability::open(
                a.detector
                    .alpha
                    .or(r.file.detector.alpha)
                    .unwrap_or(DEFAULT_ALPHA),
            )?;
            let trials = a.trials.unwrap_or(100_000);
            if a.scenario == Scenario::T1 {
                simulation::simulate_test_t1(mu, alpha, trials, seed, workers)?
            } else {
                simulation::simulate_test_t2(mu, alpha, trials, seed, workers)?
            }
        }
        Scenario::Theorem1 => {
            let k = r.k(a.k).unwrap_or(5);
            let cfg = r.detector(&a.detector, k)?;
            let n_cal = match a.n_cal {
                Some(n) => n,
                None => solve(
                    cfg.method,
                    &CalSizeRequest::from_config(&cfg, CalSizeRequest::DEFAULT_SCAN_LIMIT)?,
                )?,
            };
            let model = SyntheticModel::iid_normal(k, 0)?;
            simulation::verify_conditional_false_alarm(
                &model,
                &cfg,
                n_cal,
                a.cal_draws.unwrap_or(50),
                a.test_draws.unwrap_or(20_000),
                seed,
                workers,
            )?
        }
        Scenario::Power => {
            let k = match (&a.shift, r.k(a.k)) {
                (Some(s), Some(k)) if s.len() != k => {
                    return Err(Error::config(format!(
                        "--shift has {} values for K = {k}",
                        s.len()
                    )))
                }
                (Some(s), _) => s.len(),
                (None, k) => k.unwrap_or(5),
            };
            let shift = a.shift.clone().unwrap_or_else(|| vec![5.0; k]);
            let cfg = r.detector(&a.detector, k)?;
            let n_cal = match a.n_cal {
                Some(n) => n,
                None => solve(
                    Method::Bh,
                    &CalSizeRequest::from_config(&cfg, CalSizeRequest::DEFAULT_SCAN_LIMIT)?,
                )?,
            };
            let spec = match a.single_score {
                Some(index) => DetectorSpec::SingleScore {
                    index,
                    alpha: cfg.alpha,
                },
                None => DetectorSpec::Combined(cfg),
            };
            let null = SyntheticModel::iid_normal(k, 0)?;
            let alt = SyntheticModel::shifted(shift, 1)?;
            simulation::estimate_power(
                &null,
                &alt,
                &spec,
                n_cal,
                a.trials.unwrap_or(10_000),
                seed,
                workers,
            )?
        }
    };
    match &a.out {
        Some(path) => {
            write_report(&report, path)?;
            writeln!(
                out,
                "estimate = {:.6} (stderr {:.2e}, {} trials) -> {}",
                report.estimate,
                report.stderr,
                report.n_trials,
                path.display()
            )
            .map_err(out_err)
        }
        None => emit_json(&report, out),
    }
}

fn write_report(report: &simulation::MonteCarloReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("conformal-ood").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn help_is_success() {
        let (code, out, _) = run_str(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("calibrate-size"));
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, _, err) = run_str(&["frobnicate"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(!err.is_empty());
    }

    #[test]
    fn k_zero_is_usage_error() {
        let (code, _, err) = run_str(&["calibrate-size", "--k", "0"]);
        assert_eq!(code, EXIT_USAGE, "{err}");
    }

    #[test]
    fn capacity_exit_code() {
        let (code, _, err) = run_str(&[
            "calibrate-size",
            "--k",
            "1",
            "--epsilon",
            "0",
            "--scan-limit",
            "100",
        ]);
        assert_eq!(code, EXIT_CAPACITY, "{err}");
    }

    #[test]
    fn diff_lists_both_sides() {
        let a: Vec<String> = ["x", "y", "z"].map(String::from).to_vec();
        let b: Vec<String> = ["x", "w"].map(String::from).to_vec();
        let d = column_diff(&a, &b);
        assert!(d.contains("only in calibration: y,z"), "{d}");
        assert!(d.contains("only in test: w"), "{d}");
        let c: Vec<String> = ["z", "y", "x"].map(String::from).to_vec();
        assert!(column_diff(&a, &c).contains("different order"));
    }
}
