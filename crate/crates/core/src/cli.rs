//! Command-line front end.
//!
//! Matrices travel as CSV (comma-separated, `.` decimal point, one optional
//! header line recognized by a non-numeric first row). Reports are JSON with a
//! fixed key set per subcommand: `subcommand`, `config` (every resolved
//! parameter, defaults included) and `result`. Absent optional values are
//! written as `null` rather than omitted.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{
    check_oracle, corollary1_rhs_with, lambda_corollary, theorem1_rhs_with, BoundReport,
    ConstantMode, CorollaryRhs, RankScan,
};
use crate::design::{check_assumption1, check_ri_property, summarize_design, Assumption1Report};
use crate::error::{Error, Result};
use crate::estimators::{
    fit_nnp, fit_reduced_rank, fit_reduced_rank_path, nnp_objective, select_rank, Criterion,
    FitDiagnostics, SolverOptions,
};
use crate::matlin::Mat;
use crate::simkit::{
    gen_data, monte_carlo, run_trial, LambdaRule, McReport, TrialConfig, TrialReport,
};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_PARSE: i32 = 5;
pub const EXIT_DEGENERATE: i32 = 6;
pub const EXIT_PRECONDITION: i32 = 7;

const EXIT_CODES_HELP: &str = "\
Exit codes:
  0  success
  2  usage error (unknown subcommand, malformed flags)
  3  invalid parameter or incompatible matrix dimensions
  4  file could not be read or written
  5  malformed CSV matrix
  6  degenerate design (X is the zero matrix)
  7  precondition failed (e.g. non-orthonormal design)";

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite { .. } | Error::DimensionMismatch { .. } | Error::InvalidInput(_) => {
                EXIT_INVALID
            }
            Error::Io { .. } => EXIT_IO,
            Error::Parse { .. } => EXIT_PARSE,
            Error::DegenerateDesign => EXIT_DEGENERATE,
            Error::Precondition(_) => EXIT_PRECONDITION,
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a rectangular numeric CSV file.
pub fn read_matrix_csv(path: &Path) -> Result<Mat> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_matrix_csv(&text)
}

pub fn parse_matrix_csv(text: &str) -> Result<Mat> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut entries = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parsed: std::result::Result<Vec<f64>, String> = record
            .iter()
            .map(|cell| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(format!("non-finite value {cell:?}")),
                Err(_) => Err(format!("non-numeric value {cell:?}")),
            })
            .collect();
        let values = match parsed {
            Ok(values) => values,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(msg) => return Err(Error::Parse { line, msg }),
        };
        first = false;
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {c} fields, found {}", values.len()),
                })
            }
            Some(_) => {}
        }
        entries.extend(values);
        rows += 1;
    }
    let cols = match cols {
        Some(c) if rows > 0 && c > 0 => c,
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "no numeric rows".into(),
            })
        }
    };
    Mat::from_row_major(rows, cols, entries)
}

/// Writes `m` with shortest round-trip formatting of every entry.
pub fn write_matrix_csv(m: &Mat, path: &Path) -> Result<()> {
    let text = format_matrix_csv(m)?;
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn format_matrix_csv(m: &Mat) -> Result<String> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::invalid(format!(
            "cannot write an empty {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let mut out = String::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", m.get(i, j)).expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Parser, Debug, Clone)]
#[command(
    name = "lowrank",
    version,
    about = "Low-rank multivariate regression: reduced-rank and nuclear-norm-penalized fits, design diagnostics, oracle bounds",
    after_help = EXIT_CODES_HELP
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Reduced-rank least squares at a fixed rank.
    FitRr(FitRrArgs),
    /// Nuclear-norm-penalized least squares.
    FitNnp(FitNnpArgs),
    /// Rank selection over the reduced-rank path.
    SelectRank(SelectRankArgs),
    /// Pseudo-RIP and RI-Property diagnostics of a design.
    CheckDesign(CheckDesignArgs),
    /// Oracle-bound right-hand sides, and the realized error when Y is given.
    Bound(BoundArgs),
    /// One simulated trial.
    Trial(TrialArgs),
    /// Repeated simulated trials with aggregated bound violations.
    MonteCarlo(MonteCarloArgs),
    /// Write a simulated data set as CSV files.
    GenData(GenDataArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FitRr(_) => "fit-rr",
            Command::FitNnp(_) => "fit-nnp",
            Command::SelectRank(_) => "select-rank",
            Command::CheckDesign(_) => "check-design",
            Command::Bound(_) => "bound",
            Command::Trial(_) => "trial",
            Command::MonteCarlo(_) => "monte-carlo",
            Command::GenData(_) => "gen-data",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantArg {
    #[default]
    Exact,
    Relaxed,
}

impl From<ConstantArg> for ConstantMode {
    fn from(c: ConstantArg) -> Self {
        match c {
            ConstantArg::Exact => ConstantMode::Exact,
            ConstantArg::Relaxed => ConstantMode::Relaxed,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionArg {
    /// rss + pen(r) sigma^2
    #[default]
    Crit,
    /// log(rss) + pen'(r)
    CritLog,
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaRuleArg {
    #[default]
    Corollary,
    NoiseMin,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutputArgs {
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = SolverOptions::default().max_iterations)]
    pub max_iter: usize,
    #[arg(long, default_value_t = SolverOptions::default().rel_tol)]
    pub rel_tol: f64,
    /// Plain proximal gradient without momentum.
    #[arg(long)]
    pub no_accel: bool,
    #[arg(long, default_value_t = SolverOptions::default().step_scale)]
    pub step_scale: f64,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iterations: self.max_iter,
            rel_tol: self.rel_tol,
            acceleration: !self.no_accel,
            step_scale: self.step_scale,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FitRrArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long)]
    pub rank: usize,
    /// Write the coefficient estimate as CSV.
    #[arg(long)]
    pub a_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FitNnpArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub a_out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SelectRankArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub criterion: CriterionArg,
    /// Noise level, required by `crit`.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Multiplier `c` in the default penalty `c r (sqrt T + sqrt q)^2`.
    #[arg(long, default_value_t = 1.1)]
    pub pen_c: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CheckDesignArgs {
    #[arg(long)]
    pub x: PathBuf,
    /// Certify sigma_q(X) >= 1 / mu_max.
    #[arg(long)]
    pub mu_max: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub eta_max: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BoundArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub a0: PathBuf,
    /// Response; when given, the penalized fit is compared with the bound.
    #[arg(long)]
    pub y: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub constant: ConstantArg,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimArgs {
    #[arg(long, default_value_t = TrialConfig::default().n)]
    pub n: usize,
    #[arg(long, default_value_t = TrialConfig::default().p)]
    pub p: usize,
    #[arg(long, default_value_t = TrialConfig::default().t)]
    pub t: usize,
    #[arg(long, default_value_t = TrialConfig::default().r0)]
    pub r0: usize,
    /// Target sigma_1(X) / sigma_q(X).
    #[arg(long, default_value_t = TrialConfig::default().eta_target)]
    pub eta: f64,
    #[arg(long, default_value_t = TrialConfig::default().sigma1_target)]
    pub sigma1: f64,
    #[arg(long, default_value_t = TrialConfig::default().signal)]
    pub signal: f64,
    #[arg(long, default_value_t = TrialConfig::default().sigma)]
    pub sigma: f64,
    #[arg(long, default_value_t = TrialConfig::default().k)]
    pub k: f64,
    #[arg(long, default_value_t = TrialConfig::default().seed)]
    pub seed: u64,
    /// Fixed penalty level; overrides --lambda-rule.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub lambda_rule: LambdaRuleArg,
    #[arg(long, value_enum, default_value_t)]
    pub constant: ConstantArg,
    #[arg(long)]
    pub a0_in_rowspace: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

impl SimArgs {
    pub fn trial_config(&self) -> TrialConfig {
        let lambda_rule = match (self.lambda, self.lambda_rule) {
            (Some(l), _) => LambdaRule::Fixed(l),
            (None, LambdaRuleArg::Corollary) => LambdaRule::Corollary,
            (None, LambdaRuleArg::NoiseMin) => LambdaRule::NoiseMin,
        };
        TrialConfig {
            n: self.n,
            p: self.p,
            t: self.t,
            r0: self.r0,
            eta_target: self.eta,
            sigma1_target: self.sigma1,
            signal: self.signal,
            sigma: self.sigma,
            k: self.k,
            seed: self.seed,
            a0_in_rowspace: self.a0_in_rowspace,
            lambda_rule,
            constant_mode: self.constant.into(),
            solver: self.solver.options(),
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrialArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MonteCarloArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GenDataArgs {
    /// Directory receiving x.csv, a0.csv, e.csv and y.csv.
    #[arg(long)]
    pub dir: PathBuf,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    subcommand: &'static str,
    config: &'a C,
    result: R,
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// One-line human summary for stdout.
    pub summary: String,
    /// Full JSON report.
    pub report: String,
}

fn render<C: Serialize, R: Serialize>(name: &'static str, config: &C, result: R) -> Result<String> {
    let report = Report {
        subcommand: name,
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::invalid(format!("report serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn emit(output: &OutputArgs, summary: String, report: String) -> Result<Outcome> {
    if let Some(path) = &output.out {
        fs::write(path, &report).map_err(|e| io_error(path, e))?;
    }
    Ok(Outcome { summary, report })
}

/// Dispatches a parsed command line.
pub fn run(config: &RunConfig) -> Result<Outcome> {
    let name = config.command.name();
    match &config.command {
        Command::FitRr(args) => run_fit_rr(name, args),
        Command::FitNnp(args) => run_fit_nnp(name, args),
        Command::SelectRank(args) => run_select_rank(name, args),
        Command::CheckDesign(args) => run_check_design(name, args),
        Command::Bound(args) => run_bound(name, args),
        Command::Trial(args) => run_trial_cmd(name, args),
        Command::MonteCarlo(args) => run_monte_carlo(name, args),
        Command::GenData(args) => run_gen_data(name, args),
    }
}

fn run_fit_rr(name: &'static str, args: &FitRrArgs) -> Result<Outcome> {
    let x = read_matrix_csv(&args.x)?;
    let y = read_matrix_csv(&args.y)?;
    let fit = fit_reduced_rank(&x, &y, args.rank)?;
    if let Some(path) = &args.a_out {
        write_matrix_csv(&fit.a_hat, path)?;
    }
    let summary = format!(
        "fit-rr: rank {} -> rss {:.6e}, rank_hat {}",
        args.rank, fit.rss, fit.rank_hat
    );
    emit(
        &args.output,
        summary,
        render(name, args, fit.diagnostics())?,
    )
}

#[derive(Serialize)]
struct NnpResult {
    #[serde(flatten)]
    fit: FitDiagnostics,
    objective: f64,
}

fn run_fit_nnp(name: &'static str, args: &FitNnpArgs) -> Result<Outcome> {
    let x = read_matrix_csv(&args.x)?;
    let y = read_matrix_csv(&args.y)?;
    let fit = fit_nnp(&x, &y, args.lambda, &args.solver.options())?;
    let objective = nnp_objective(&x, &y, &fit.a_hat, args.lambda)?;
    if let Some(path) = &args.a_out {
        write_matrix_csv(&fit.a_hat, path)?;
    }
    let summary = format!(
        "fit-nnp: lambda {} -> objective {:.6e}, rank_hat {}, {} iterations{}",
        args.lambda,
        objective,
        fit.rank_hat,
        fit.iterations,
        if fit.converged {
            ""
        } else {
            " (not converged)"
        }
    );
    let result = NnpResult {
        fit: fit.diagnostics(),
        objective,
    };
    emit(&args.output, summary, render(name, args, result)?)
}

#[derive(Serialize)]
struct SelectRankResult {
    rank: usize,
    values: Vec<f64>,
    rss_path: Vec<f64>,
    exact_fit: bool,
    q: usize,
    penalty: &'static str,
    /// The shipped penalties are defaults, not calibrated choices.
    penalty_placeholder: bool,
}

fn run_select_rank(name: &'static str, args: &SelectRankArgs) -> Result<Outcome> {
    if !(args.pen_c >= 0.0 && args.pen_c.is_finite()) {
        return Err(Error::invalid(format!(
            "--pen-c must be nonnegative, got {}",
            args.pen_c
        )));
    }
    let x = read_matrix_csv(&args.x)?;
    let y = read_matrix_csv(&args.y)?;
    let q = summarize_design(&x)?.q;
    let path = fit_reduced_rank_path(&x, &y)?;
    let (n, t) = (y.rows() as f64, y.cols() as f64);
    let width = (t.sqrt() + (q as f64).sqrt()).powi(2);
    let c = args.pen_c;
    let (selection, penalty) = match args.criterion {
        CriterionArg::Crit => (
            select_rank(
                &path,
                Criterion::KnownVariance,
                |r| c * r as f64 * width,
                args.sigma,
            )?,
            "c * r * (sqrt(T) + sqrt(q))^2",
        ),
        CriterionArg::CritLog => (
            select_rank(
                &path,
                Criterion::LogForm,
                |r| c * r as f64 * width / (n * t),
                None,
            )?,
            "c * r * (sqrt(T) + sqrt(q))^2 / (n * T)",
        ),
    };
    let summary = format!(
        "select-rank: selected r = {}{}",
        selection.rank,
        if selection.exact_fit {
            " (exact fit)"
        } else {
            ""
        }
    );
    let result = SelectRankResult {
        rank: selection.rank,
        values: selection.values,
        rss_path: path.iter().map(|f| f.rss).collect(),
        exact_fit: selection.exact_fit,
        q,
        penalty,
        penalty_placeholder: true,
    };
    emit(&args.output, summary, render(name, args, result)?)
}

#[derive(Serialize)]
struct DesignResult {
    n: usize,
    p: usize,
    q: usize,
    sigma1: f64,
    sigmaq: f64,
    mu: f64,
    eta: f64,
    assumption1: Option<Assumption1Report>,
    ri_property: bool,
}

fn run_check_design(name: &'static str, args: &CheckDesignArgs) -> Result<Outcome> {
    let x = read_matrix_csv(&args.x)?;
    let s = summarize_design(&x)?;
    let assumption1 = args.mu_max.map(|m| check_assumption1(&s, m)).transpose()?;
    let ri_property = check_ri_property(&s, args.eta_max)?;
    let summary = format!(
        "check-design: q = {}, sigma_q = {:.6e}, mu = {:.6e}, eta = {:.6e}, RI-Property(eta_max = {}) {}",
        s.q,
        s.sigmaq,
        s.mu,
        s.eta,
        args.eta_max,
        if ri_property { "holds" } else { "fails" }
    );
    let result = DesignResult {
        n: s.n,
        p: s.p,
        q: s.q,
        sigma1: s.sigma1,
        sigmaq: s.sigmaq,
        mu: s.mu,
        eta: s.eta,
        assumption1,
        ri_property,
    };
    emit(&args.output, summary, render(name, args, result)?)
}

#[derive(Serialize)]
struct BoundResult {
    lambda_used: f64,
    /// Rank-indexed bound at `lambda_used`.
    rank_scan: RankScan,
    /// Bound at the calibrated level, when `--k` and `--sigma` are given.
    calibrated: Option<CorollaryRhs>,
    oracle: Option<BoundReport>,
    fit: Option<FitDiagnostics>,
}

fn run_bound(name: &'static str, args: &BoundArgs) -> Result<Outcome> {
    let x = read_matrix_csv(&args.x)?;
    let a0 = read_matrix_csv(&args.a0)?;
    let s = summarize_design(&x)?;
    let mode: ConstantMode = args.constant.into();

    let calibrated = match (args.k, args.sigma) {
        (Some(k), Some(sigma)) => Some(corollary1_rhs_with(&s, &x, &a0, k, sigma)?),
        (None, None) => None,
        _ => return Err(Error::invalid("--k and --sigma must be given together")),
    };
    let lambda = match (args.lambda, args.k, args.sigma) {
        (Some(l), _, _) => l,
        (None, Some(k), Some(sigma)) => lambda_corollary(s.sigma1, a0.cols(), s.q, k, sigma)?,
        _ => return Err(Error::invalid("give --lambda or both --k and --sigma")),
    };
    let rank_scan = theorem1_rhs_with(&s, &x, &a0, lambda, mode)?;

    let (oracle, fit) = match &args.y {
        Some(path) => {
            let y = read_matrix_csv(path)?;
            if y.shape() != (x.rows(), a0.cols()) {
                return Err(Error::mismatch(
                    "bound",
                    format!(
                        "Y is {:?}, expected ({}, {})",
                        y.shape(),
                        x.rows(),
                        a0.cols()
                    ),
                ));
            }
            let e = &y - &(&x * &a0);
            let fit = fit_nnp(&x, &y, lambda, &args.solver.options())?;
            let report = check_oracle(&x, &a0, &fit.a_hat, lambda, Some(&e), mode)?;
            (Some(report), Some(fit.diagnostics()))
        }
        None => (None, None),
    };

    let summary = match &oracle {
        Some(b) => format!(
            "bound: lambda {:.6e}, lhs {:.6e} vs rhs {:.6e} ({}), event {}",
            lambda,
            b.lhs,
            b.rhs,
            if b.holds { "holds" } else { "violated" },
            b.lambda_min_event.unwrap_or(false)
        ),
        None => format!(
            "bound: lambda {:.6e}, rhs {:.6e} at r = {}",
            lambda, rank_scan.value, rank_scan.argmin_r
        ),
    };
    let result = BoundResult {
        lambda_used: lambda,
        rank_scan,
        calibrated,
        oracle,
        fit,
    };
    emit(&args.output, summary, render(name, args, result)?)
}

fn run_trial_cmd(name: &'static str, args: &TrialArgs) -> Result<Outcome> {
    let cfg = args.sim.trial_config();
    let report: TrialReport = run_trial(&cfg)?;
    let b = report.bound(cfg.constant_mode);
    let summary = format!(
        "trial seed {}: lambda {:.6e}, lhs {:.6e} vs rhs {:.6e} ({}), event {}",
        cfg.seed,
        report.lambda_used,
        b.lhs,
        b.rhs,
        if b.holds { "holds" } else { "violated" },
        report.lambda_min_event
    );
    let config = SimConfig {
        trial: &cfg,
        out: &args.output.out,
    };
    emit(&args.output, summary, render(name, &config, report)?)
}

#[derive(Serialize)]
struct SimConfig<'a> {
    trial: &'a TrialConfig,
    out: &'a Option<PathBuf>,
}

fn run_monte_carlo(name: &'static str, args: &MonteCarloArgs) -> Result<Outcome> {
    let cfg = args.sim.trial_config();
    let report: McReport = monte_carlo(&cfg, args.trials)?;
    let summary = format!(
        "monte-carlo: {} trials, {} violations ({}), {} event failures, bound probability {:.4e}",
        report.trials,
        report.violation_count,
        report.constant_mode.as_str(),
        report.event_fail_count,
        report.bound_probability
    );
    #[derive(Serialize)]
    struct Config<'a> {
        trials: usize,
        trial: &'a TrialConfig,
        out: &'a Option<PathBuf>,
    }
    let config = Config {
        trials: args.trials,
        trial: &cfg,
        out: &args.output.out,
    };
    emit(&args.output, summary, render(name, &config, report)?)
}

#[derive(Serialize)]
struct GenDataResult {
    x: PathBuf,
    a0: PathBuf,
    e: PathBuf,
    y: PathBuf,
    q: usize,
    sigma1: f64,
    sigmaq: f64,
    eta: f64,
}

fn run_gen_data(name: &'static str, args: &GenDataArgs) -> Result<Outcome> {
    let cfg = args.sim.trial_config();
    let data = gen_data(&cfg)?;
    fs::create_dir_all(&args.dir).map_err(|e| io_error(&args.dir, e))?;
    let files = [
        ("x.csv", &data.x),
        ("a0.csv", &data.a0),
        ("e.csv", &data.e),
        ("y.csv", &data.y),
    ];
    for (file, m) in files {
        write_matrix_csv(m, &args.dir.join(file))?;
    }
    let s = summarize_design(&data.x)?;
    let summary = format!(
        "gen-data: wrote {}x{} design and {}x{} response to {}",
        cfg.n,
        cfg.p,
        cfg.n,
        cfg.t,
        args.dir.display()
    );
    let result = GenDataResult {
        x: args.dir.join("x.csv"),
        a0: args.dir.join("a0.csv"),
        e: args.dir.join("e.csv"),
        y: args.dir.join("y.csv"),
        q: s.q,
        sigma1: s.sigma1,
        sigmaq: s.sigmaq,
        eta: s.eta,
    };
    #[derive(Serialize)]
    struct Config<'a> {
        dir: &'a PathBuf,
        trial: &'a TrialConfig,
        out: &'a Option<PathBuf>,
    }
    let config = Config {
        dir: &args.dir,
        trial: &cfg,
        out: &args.output.out,
    };
    emit(&args.output, summary, render(name, &config, result)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::test_util::*;
    use proptest::prelude::*;

    #[test]
    fn parses_plain_csv() {
        let m = parse_matrix_csv("1,2\n3,4\n").unwrap();
        assert_eq!(m, Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
    }

    #[test]
    fn skips_header_row() {
        let m = parse_matrix_csv("a,b\n1,2\n").unwrap();
        assert_eq!(m, Mat::from_rows(&[[1.0, 2.0]]).unwrap());
    }

    #[test]
    fn reports_ragged_rows_with_line() {
        match parse_matrix_csv("1,2\n3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_matrix_csv("1,2\n3,x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_matrix_csv(""), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_matrix_csv("a,b\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_matrix_csv("1,NaN\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn writes_identity() {
        assert_eq!(format_matrix_csv(&Mat::identity(2)).unwrap(), "1,0\n0,1\n");
        assert!(format_matrix_csv(&Mat::zeros(0, 3)).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = gaussian(&mut rng(1), 5, 3);
        write_matrix_csv(&m, &path).unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap(), m);
        assert!(matches!(
            read_matrix_csv(&dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            Error::invalid("x").exit_code(),
            Error::Io {
                path: String::new(),
                source: std::io::Error::other("x"),
            }
            .exit_code(),
            Error::Parse {
                line: 1,
                msg: String::new(),
            }
            .exit_code(),
            Error::DegenerateDesign.exit_code(),
            Error::Precondition(String::new()).exit_code(),
        ];
        let mut sorted = codes.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), codes.len());
        assert!(!codes.contains(&0) && !codes.contains(&EXIT_USAGE));
    }

    proptest! {
        #[test]
        fn prop_csv_round_trip(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>(), scale in -300i32..300) {
            let m = gaussian(&mut rng(seed), rows, cols).scale(10f64.powi(scale));
            let back = parse_matrix_csv(&format_matrix_csv(&m).unwrap()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
