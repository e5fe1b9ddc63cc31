//! Seeded simulation harness.
//!
//! Every generator is a pure function of a [`TrialConfig`]. The design, the
//! coefficient matrix and the noise each draw from their own ChaCha8 stream
//! keyed by the trial seed, so changing one dimension of the experiment does
//! not perturb the draws of the others.
//!
//! Normal variates come from `rand_distr::StandardNormal` (Ziggurat method)
//! scaled by `sigma`.
//!
//! Monte Carlo runs use seeds `seed, seed + 1, ...`; trials run in parallel
//! and are folded in index order.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    check_oracle_with, corollary_failure_probability, lambda_corollary, lambda_noise_min,
    BoundReport, ConstantMode,
};
use crate::design::{summarize_design, DesignSummary};
use crate::error::{Error, Result};
use crate::estimators::{fit_nnp, FitDiagnostics, SolverOptions};
use crate::matlin::Mat;

const DESIGN_STREAM: u64 = 1;
const COEF_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

/// How a trial picks its penalty level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaRule {
    /// `2 K sigma_1(X) (sqrt T + sqrt q) sigma`.
    Corollary,
    /// `2 sigma_1(X^T E)`, the smallest level at which the deterministic
    /// bound applies.
    NoiseMin,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialConfig {
    pub n: usize,
    pub p: usize,
    pub t: usize,
    /// Rank of the true coefficient matrix.
    pub r0: usize,
    /// Target `sigma_1(X) / sigma_q(X)`.
    pub eta_target: f64,
    /// Target `sigma_1(X)`.
    pub sigma1_target: f64,
    /// Common singular value of the true coefficient matrix.
    pub signal: f64,
    /// Noise standard deviation.
    pub sigma: f64,
    pub k: f64,
    pub seed: u64,
    /// Draw the true coefficients inside `rg(X^T)` instead of all of `R^p`.
    pub a0_in_rowspace: bool,
    pub lambda_rule: LambdaRule,
    /// Mode whose violations populate [`McReport::violation_count`].
    pub constant_mode: ConstantMode,
    pub solver: SolverOptions,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            n: 15,
            p: 30,
            t: 8,
            r0: 3,
            eta_target: 3.0,
            sigma1_target: 1.0,
            signal: 20.0,
            sigma: 1.0,
            k: 2.0,
            seed: 0,
            a0_in_rowspace: false,
            lambda_rule: LambdaRule::Corollary,
            constant_mode: ConstantMode::Exact,
            solver: SolverOptions::default(),
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.t == 0 {
            return Err(Error::invalid("n, p and T must be positive"));
        }
        let max_rank = if self.a0_in_rowspace {
            self.p.min(self.t).min(self.n)
        } else {
            self.p.min(self.t)
        };
        if self.r0 > max_rank {
            return Err(Error::invalid(format!(
                "r0 = {} exceeds the largest admissible rank {max_rank}",
                self.r0
            )));
        }
        if !(self.eta_target >= 1.0 && self.eta_target.is_finite()) {
            return Err(Error::invalid(format!(
                "eta_target must be at least 1, got {}",
                self.eta_target
            )));
        }
        if !(self.sigma1_target > 0.0 && self.sigma1_target.is_finite()) {
            return Err(Error::invalid("sigma1_target must be positive"));
        }
        if !(self.signal >= 0.0 && self.signal.is_finite()) || (self.r0 > 0 && self.signal == 0.0) {
            return Err(Error::invalid("signal must be positive when r0 > 0"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma must be nonnegative, got {}",
                self.sigma
            )));
        }
        if !(self.k > 1.0 && self.k.is_finite()) {
            return Err(Error::invalid(format!("K must exceed 1, got {}", self.k)));
        }
        if let LambdaRule::Fixed(l) = self.lambda_rule {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::invalid(format!(
                    "lambda must be nonnegative, got {l}"
                )));
            }
        }
        self.solver.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TrialConfig {
            seed,
            ..self.clone()
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn standard_normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `rows x cols` matrix with orthonormal columns, from the QR factorization
/// of a Gaussian matrix with the signs of `diag(R)` normalized.
fn haar_columns(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let (mut q, r) = standard_normal(rng, rows, cols).qr().unpack();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthonormal factors `(U, V)` of the design, `n x q` and `p x q`.
fn design_factors(cfg: &TrialConfig) -> (DMatrix<f64>, DMatrix<f64>) {
    let q = cfg.n.min(cfg.p);
    let mut rng = cfg.rng(DESIGN_STREAM);
    let u = haar_columns(&mut rng, cfg.n, q);
    let v = haar_columns(&mut rng, cfg.p, q);
    (u, v)
}

/// Geometrically spaced spectrum from `sigma1_target` down to
/// `sigma1_target / eta_target`.
pub fn design_spectrum(cfg: &TrialConfig) -> Vec<f64> {
    let q = cfg.n.min(cfg.p);
    if q == 1 {
        return vec![cfg.sigma1_target];
    }
    (0..q)
        .map(|i| cfg.sigma1_target * cfg.eta_target.powf(-(i as f64) / (q - 1) as f64))
        .collect()
}

/// `X = U diag(s) V^T` with Haar-rotated factors and a geometric spectrum.
pub fn gen_design(cfg: &TrialConfig) -> Result<Mat> {
    cfg.validate()?;
    let (mut u, v) = design_factors(cfg);
    for (j, s) in design_spectrum(cfg).into_iter().enumerate() {
        u.column_mut(j).scale_mut(s);
    }
    Mat::from_dmatrix(u * v.transpose())
}

/// Rank-`r0` coefficient matrix whose nonzero singular values all equal
/// `signal`.
pub fn gen_coef(cfg: &TrialConfig) -> Result<Mat> {
    cfg.validate()?;
    if cfg.r0 == 0 {
        return Ok(Mat::zeros(cfg.p, cfg.t));
    }
    let mut rng = cfg.rng(COEF_STREAM);
    let left = if cfg.a0_in_rowspace {
        let (_, v) = design_factors(cfg);
        let q = v.ncols();
        v * haar_columns(&mut rng, q, cfg.r0)
    } else {
        haar_columns(&mut rng, cfg.p, cfg.r0)
    };
    let right = haar_columns(&mut rng, cfg.t, cfg.r0);
    Mat::from_dmatrix((left * cfg.signal) * right.transpose())
}

/// `n x T` matrix of independent `N(0, sigma^2)` draws.
pub fn gen_noise(cfg: &TrialConfig) -> Result<Mat> {
    cfg.validate()?;
    if cfg.sigma == 0.0 {
        return Ok(Mat::zeros(cfg.n, cfg.t));
    }
    let mut rng = cfg.rng(NOISE_STREAM);
    Mat::from_dmatrix(standard_normal(&mut rng, cfg.n, cfg.t) * cfg.sigma)
}

/// One generated data set.
#[derive(Clone, Debug)]
pub struct TrialData {
    pub x: Mat,
    pub a0: Mat,
    pub e: Mat,
    pub y: Mat,
}

pub fn gen_data(cfg: &TrialConfig) -> Result<TrialData> {
    let x = gen_design(cfg)?;
    let a0 = gen_coef(cfg)?;
    let e = gen_noise(cfg)?;
    let y = &(&x * &a0) + &e;
    Ok(TrialData { x, a0, e, y })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    pub seed: u64,
    pub q: usize,
    pub sigma1: f64,
    pub sigmaq: f64,
    pub eta: f64,
    pub lambda_used: f64,
    /// `2 sigma_1(X^T E)`.
    pub lambda_noise_min: f64,
    pub lambda_min_event: bool,
    pub fit: FitDiagnostics,
    pub exact: BoundReport,
    pub relaxed: BoundReport,
    /// The solver stopped at its iteration cap.
    pub flagged: bool,
}

impl TrialReport {
    pub fn bound(&self, mode: ConstantMode) -> &BoundReport {
        match mode {
            ConstantMode::Exact => &self.exact,
            ConstantMode::Relaxed => &self.relaxed,
        }
    }
}

fn select_lambda(cfg: &TrialConfig, summary: &DesignSummary, noise_min: f64) -> Result<f64> {
    match cfg.lambda_rule {
        LambdaRule::Corollary => {
            lambda_corollary(summary.sigma1, cfg.t, summary.q, cfg.k, cfg.sigma)
        }
        LambdaRule::NoiseMin => Ok(noise_min),
        LambdaRule::Fixed(l) => Ok(l),
    }
}

pub fn run_trial(cfg: &TrialConfig) -> Result<TrialReport> {
    let data = gen_data(cfg)?;
    let summary = summarize_design(&data.x)?;
    let noise_min = lambda_noise_min(&data.x, &data.e)?;
    let lambda = select_lambda(cfg, &summary, noise_min)?;
    let fit = fit_nnp(&data.x, &data.y, lambda, &cfg.solver)?;
    let check = |mode| {
        check_oracle_with(
            &summary,
            &data.x,
            &data.a0,
            &fit.a_hat,
            lambda,
            Some(&data.e),
            mode,
        )
    };
    let exact = check(ConstantMode::Exact)?;
    let relaxed = check(ConstantMode::Relaxed)?;
    Ok(TrialReport {
        seed: cfg.seed,
        q: summary.q,
        sigma1: summary.sigma1,
        sigmaq: summary.sigmaq,
        eta: summary.eta,
        lambda_used: lambda,
        lambda_noise_min: noise_min,
        lambda_min_event: lambda >= noise_min,
        fit: fit.diagnostics(),
        exact,
        relaxed,
        flagged: !fit.converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut sum, mut count) = (0.0, 0usize);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            sum += v;
            count += 1;
            min = min.min(v);
            max = max.max(v);
        }
        Spread {
            mean: sum / count as f64,
            min,
            max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McReport {
    pub trials: usize,
    pub first_seed: u64,
    pub constant_mode: ConstantMode,
    /// Violations under `constant_mode`.
    pub violation_count: usize,
    pub violation_count_exact: usize,
    pub violation_count_relaxed: usize,
    /// Trials with `lambda < 2 sigma_1(X^T E)`.
    pub event_fail_count: usize,
    /// Sharp-constant violations among trials where the event held.
    pub conditional_violation_count: usize,
    pub nonconverged_count: usize,
    pub q: usize,
    /// `exp(-(K - 1)^2 (T + q) / 2)`.
    pub bound_probability: f64,
    pub violation_frequency: f64,
    pub event_fail_frequency: f64,
    pub lhs: Spread,
    pub rhs: Spread,
    /// Largest `lhs / rhs` over trials with a positive bound.
    pub max_ratio: f64,
}

impl McReport {
    pub fn fold(cfg: &TrialConfig, reports: &[TrialReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::invalid("no trials to aggregate"));
        }
        let trials = reports.len();
        let count = |f: &dyn Fn(&TrialReport) -> bool| reports.iter().filter(|r| f(r)).count();
        let violation_count_exact = count(&|r| !r.exact.holds);
        let violation_count_relaxed = count(&|r| !r.relaxed.holds);
        let violation_count = match cfg.constant_mode {
            ConstantMode::Exact => violation_count_exact,
            ConstantMode::Relaxed => violation_count_relaxed,
        };
        let event_fail_count = count(&|r| !r.lambda_min_event);
        let q = reports[0].q;
        let bound = |r: &TrialReport| r.bound(cfg.constant_mode).clone();
        Ok(McReport {
            trials,
            first_seed: cfg.seed,
            constant_mode: cfg.constant_mode,
            violation_count,
            violation_count_exact,
            violation_count_relaxed,
            event_fail_count,
            conditional_violation_count: count(&|r| r.lambda_min_event && !r.exact.holds),
            nonconverged_count: count(&|r| r.flagged),
            q,
            bound_probability: corollary_failure_probability(cfg.k, cfg.t, q),
            violation_frequency: violation_count as f64 / trials as f64,
            event_fail_frequency: event_fail_count as f64 / trials as f64,
            lhs: Spread::of(reports.iter().map(|r| bound(r).lhs)),
            rhs: Spread::of(reports.iter().map(|r| bound(r).rhs)),
            max_ratio: reports
                .iter()
                .map(bound)
                .filter(|b| b.rhs > 0.0)
                .map(|b| b.lhs / b.rhs)
                .fold(0.0, f64::max),
        })
    }

    /// Sharp-constant violations may only occur when the event fails.
    pub fn exact_determinism_holds(&self) -> bool {
        self.conditional_violation_count == 0 && self.violation_count_exact <= self.event_fail_count
    }
}

/// Runs trials with seeds `cfg.seed + i` and keeps every per-trial report.
pub fn monte_carlo_detailed(
    cfg: &TrialConfig,
    n_trials: usize,
) -> Result<(McReport, Vec<TrialReport>)> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be at least 1"));
    }
    cfg.validate()?;
    let reports = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| run_trial(&cfg.with_seed(cfg.seed.wrapping_add(i))))
        .collect::<Result<Vec<_>>>()?;
    let summary = McReport::fold(cfg, &reports)?;
    Ok((summary, reports))
}

pub fn monte_carlo(cfg: &TrialConfig, n_trials: usize) -> Result<McReport> {
    monte_carlo_detailed(cfg, n_trials).map(|(report, _)| report)
}

/// Checks `<x_i e_t^T, A> = (X A)_{it}` entrywise, comparing against `X A`.
pub fn embed_trace_check(x: &Mat, a: &Mat) -> Result<bool> {
    if x.cols() != a.rows() {
        return Err(Error::mismatch(
            "embed_trace_check",
            format!("X is {:?}, A is {:?}", x.shape(), a.shape()),
        ));
    }
    embed_trace_check_against(x, a, &(x * a))
}

/// Same check against a caller-supplied `n x T` matrix.
pub fn embed_trace_check_against(x: &Mat, a: &Mat, claimed: &Mat) -> Result<bool> {
    let (n, p) = x.shape();
    let t = a.cols();
    if a.rows() != p || claimed.shape() != (n, t) {
        return Err(Error::mismatch(
            "embed_trace_check",
            format!(
                "X is {:?}, A is {:?}, claimed is {:?}",
                x.shape(),
                a.shape(),
                claimed.shape()
            ),
        ));
    }
    for i in 0..n {
        for col in 0..t {
            // Z = x_i e_t^T, a p x T matrix with x_i in column t
            let mut z = DMatrix::zeros(p, t);
            for j in 0..p {
                z[(j, col)] = x.get(i, j);
            }
            let traced = z.dot(a.as_dmatrix());
            let want = claimed.get(i, col);
            if (traced - want).abs() > 1e-12 * want.abs().max(1.0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::test_util::*;
    use crate::matlin::{singular_values, thin_svd_default};

    fn small() -> TrialConfig {
        TrialConfig {
            n: 6,
            p: 10,
            t: 4,
            r0: 2,
            ..TrialConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrialConfig::default().validate().is_ok());
        let bad = [
            TrialConfig {
                r0: 9,
                ..TrialConfig::default()
            },
            TrialConfig {
                eta_target: 0.5,
                ..TrialConfig::default()
            },
            TrialConfig {
                k: 1.0,
                ..TrialConfig::default()
            },
            TrialConfig {
                sigma: -1.0,
                ..TrialConfig::default()
            },
            TrialConfig {
                n: 0,
                ..TrialConfig::default()
            },
            TrialConfig {
                signal: 0.0,
                ..TrialConfig::default()
            },
            TrialConfig {
                lambda_rule: LambdaRule::Fixed(-1.0),
                ..TrialConfig::default()
            },
            TrialConfig {
                n: 2,
                r0: 3,
                a0_in_rowspace: true,
                ..TrialConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn design_spectrum_and_shape() {
        let flat = TrialConfig {
            eta_target: 1.0,
            sigma1_target: 2.5,
            ..small()
        };
        let x = gen_design(&flat).unwrap();
        for s in singular_values(&x) {
            assert!((s - 2.5).abs() < 1e-12);
        }

        let wide = TrialConfig {
            n: 10,
            p: 25,
            r0: 1,
            ..TrialConfig::default()
        };
        let summary = summarize_design(&gen_design(&wide).unwrap()).unwrap();
        assert_eq!(summary.q, 10);
        assert!((summary.eta - 3.0).abs() <= 1e-10 * 3.0);
        assert!((summary.sigma1 - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn generators_are_deterministic() {
        let cfg = small();
        assert_eq!(gen_design(&cfg).unwrap(), gen_design(&cfg).unwrap());
        assert_eq!(gen_coef(&cfg).unwrap(), gen_coef(&cfg).unwrap());
        assert_eq!(gen_noise(&cfg).unwrap(), gen_noise(&cfg).unwrap());
        assert_ne!(
            gen_noise(&cfg).unwrap(),
            gen_noise(&cfg.with_seed(1)).unwrap()
        );
    }

    #[test]
    fn coef_rank_matches_construction() {
        let zero = TrialConfig { r0: 0, ..small() };
        assert!(gen_coef(&zero).unwrap().is_zero());
        for seed in 0..100 {
            for r0 in [1, 2, 4] {
                let cfg = TrialConfig {
                    r0,
                    seed,
                    ..small()
                };
                let a0 = gen_coef(&cfg).unwrap();
                let svd = thin_svd_default(&a0).unwrap();
                assert_eq!(svd.rank(), r0);
                assert!(svd
                    .s()
                    .iter()
                    .all(|s| (s - cfg.signal).abs() < 1e-10 * cfg.signal));
            }
        }
    }

    #[test]
    fn coef_in_row_space_flag() {
        let cfg = TrialConfig {
            a0_in_rowspace: true,
            ..small()
        };
        let x = gen_design(&cfg).unwrap();
        let a0 = gen_coef(&cfg).unwrap();
        let svd = thin_svd_default(&x).unwrap();
        let proj = crate::matlin::project_rowspace(&svd, &a0).unwrap();
        assert!(rel_diff(&proj, &a0) < 1e-12);
        assert_eq!(thin_svd_default(&a0).unwrap().rank(), 2);
    }

    #[test]
    fn noise_moments() {
        let zero = TrialConfig {
            sigma: 0.0,
            ..small()
        };
        assert!(gen_noise(&zero).unwrap().is_zero());

        let cfg = TrialConfig {
            n: 1000,
            t: 1000,
            p: 2,
            r0: 0,
            sigma: 1.7,
            ..TrialConfig::default()
        };
        let e = gen_noise(&cfg).unwrap();
        let count = 1e6;
        let values = e.to_row_major();
        let mean = values.iter().sum::<f64>() / count;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        let s2 = cfg.sigma * cfg.sigma;
        assert!(mean.abs() <= 4.0 * cfg.sigma / count.sqrt(), "mean {mean}");
        // Var of the sample variance of a normal is 2 sigma^4 / (N - 1)
        assert!(
            (var - s2).abs() <= 4.0 * s2 * (2.0 / (count - 1.0)).sqrt(),
            "var {var}"
        );
    }

    #[test]
    fn trial_without_signal_or_noise() {
        let cfg = TrialConfig {
            sigma: 0.0,
            r0: 0,
            ..small()
        };
        let rep = run_trial(&cfg).unwrap();
        assert_eq!(rep.exact.lhs, 0.0);
        assert!(rep.exact.holds && rep.relaxed.holds);
    }

    #[test]
    fn noiseless_trial_recovers_the_signal() {
        let cfg = TrialConfig {
            sigma: 0.0,
            ..small()
        };
        let rep = run_trial(&cfg).unwrap();
        assert_eq!(rep.lambda_used, 0.0);
        assert!(rep.lambda_min_event);
        let signal = (&gen_design(&cfg).unwrap() * &gen_coef(&cfg).unwrap()).frob_norm_sq();
        assert!(rep.exact.lhs <= 1e-12 * signal, "{}", rep.exact.lhs);
        assert!(rep.exact.holds);
    }

    #[test]
    fn trials_are_reproducible() {
        let cfg = small().with_seed(42);
        assert_eq!(run_trial(&cfg).unwrap(), run_trial(&cfg).unwrap());
    }

    #[test]
    fn single_trial_monte_carlo() {
        let cfg = small().with_seed(5);
        let trial = run_trial(&cfg).unwrap();
        let mc = monte_carlo(&cfg, 1).unwrap();
        assert_eq!(mc.trials, 1);
        assert_eq!(mc.violation_count, usize::from(!trial.exact.holds));
        assert_eq!(mc.event_fail_count, usize::from(!trial.lambda_min_event));
        assert_eq!(mc.lhs.mean, trial.exact.lhs);
        assert_eq!(mc.rhs.max, trial.exact.rhs);
        assert!(monte_carlo(&cfg, 0).is_err());
    }

    #[test]
    fn large_k_has_no_violations() {
        let cfg = TrialConfig {
            k: 5.0,
            constant_mode: ConstantMode::Relaxed,
            ..small()
        };
        let mc = monte_carlo(&cfg, 200).unwrap();
        assert_eq!(mc.violation_count, 0);
        assert_eq!(mc.event_fail_count, 0);
        assert!(mc.exact_determinism_holds());
    }

    #[test]
    fn sharp_constant_violations_need_event_failure() {
        let cfg = TrialConfig {
            lambda_rule: LambdaRule::Fixed(5.0),
            signal: 3.0,
            ..small()
        };
        let mc = monte_carlo(&cfg, 200).unwrap();
        assert!(
            mc.event_fail_count > 0 && mc.event_fail_count < 200,
            "{mc:?}"
        );
        assert!(mc.exact_determinism_holds(), "{mc:?}");
    }

    #[test]
    fn event_failure_tail_bound() {
        let cfg = TrialConfig {
            n: 8,
            p: 12,
            t: 5,
            r0: 1,
            k: 1.3,
            ..TrialConfig::default()
        };
        let trials = 1000;
        let mut fails = 0;
        for i in 0..trials {
            let c = cfg.with_seed(i);
            let x = gen_design(&c).unwrap();
            let e = gen_noise(&c).unwrap();
            let s = summarize_design(&x).unwrap();
            let lambda = lambda_corollary(s.sigma1, c.t, s.q, c.k, c.sigma).unwrap();
            if lambda < lambda_noise_min(&x, &e).unwrap() {
                fails += 1;
            }
        }
        let p = corollary_failure_probability(cfg.k, cfg.t, 8);
        let limit = p + 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
        assert!(fails as f64 / trials as f64 <= limit, "{fails} vs {limit}");
    }

    #[test]
    fn trace_embedding() {
        let mut r = rng(3);
        let a = gaussian(&mut r, 3, 2);
        assert!(embed_trace_check(&Mat::identity(3), &a).unwrap());
        let x = gaussian(&mut r, 3, 4);
        let a = gaussian(&mut r, 4, 2);
        assert!(embed_trace_check(&x, &a).unwrap());

        // independent double loop
        let mut direct = vec![0.0; 6];
        for i in 0..3 {
            for t in 0..2 {
                direct[i * 2 + t] = (0..4).map(|j| x.get(i, j) * a.get(j, t)).sum();
            }
        }
        let direct = Mat::from_row_major(3, 2, direct).unwrap();
        assert!(embed_trace_check_against(&x, &a, &direct).unwrap());

        let mut bumped = direct.to_row_major();
        bumped[3] += 1e-6;
        let bumped = Mat::from_row_major(3, 2, bumped).unwrap();
        assert!(!embed_trace_check_against(&x, &a, &bumped).unwrap());
        assert!(embed_trace_check(&x, &Mat::zeros(3, 2)).is_err());
    }
}
