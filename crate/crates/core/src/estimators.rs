//! Reduced-rank and nuclear-norm-penalized estimators.
//!
//! The reduced-rank estimator has a closed form: project `Y` onto `col(X)`,
//! keep the top `r` singular triplets and map back through `X^+`. The
//! nuclear-norm-penalized estimator
//!
//! ```text
//! A_lambda in argmin_A ||Y - X A||^2 + lambda * sum_k sigma_k(A)
//! ```
//!
//! is computed by proximal gradient descent with singular value
//! thresholding as the proximal step. Starting from `A = 0`, every iterate
//! stays in `{A : rg(A) in rg(X^T)}`, which is where the minimizer lives.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matlin::{
    pinv_apply, project_colspace, shrink, singular_values, thin_svd, thin_svd_default, Mat, ThinSvd,
};

#[derive(Clone, Debug)]
pub struct FitResult {
    pub a_hat: Mat,
    /// `X A_hat`.
    pub fitted: Mat,
    /// `||Y - X A_hat||^2`.
    pub rss: f64,
    pub nuclear_norm: f64,
    pub rank_hat: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    fn from_coef(x: &Mat, y: &Mat, a_hat: Mat, iterations: usize, converged: bool) -> Result<Self> {
        let fitted = x * &a_hat;
        let rss = (y - &fitted).frob_norm_sq();
        let nuclear_norm = singular_values(&a_hat).iter().sum();
        let rank_hat = thin_svd_default(&a_hat)?.rank();
        Ok(FitResult {
            a_hat,
            fitted,
            rss,
            nuclear_norm,
            rank_hat,
            iterations,
            converged,
        })
    }

    pub fn diagnostics(&self) -> FitDiagnostics {
        FitDiagnostics {
            rss: self.rss,
            nuclear_norm: self.nuclear_norm,
            rank_hat: self.rank_hat,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

/// Scalar part of a [`FitResult`], as written into reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitDiagnostics {
    pub rss: f64,
    pub nuclear_norm: f64,
    pub rank_hat: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop once the relative objective change falls below this.
    pub rel_tol: f64,
    /// Nesterov momentum with function-value restart.
    pub acceleration: bool,
    /// Multiplier on the safe step `1 / (2 sigma_1(X)^2)`.
    pub step_scale: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 50_000,
            rel_tol: 1e-10,
            acceleration: true,
            step_scale: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 1.0) {
            return Err(Error::invalid(format!(
                "step_scale must lie in (0, 1], got {}",
                self.step_scale
            )));
        }
        Ok(())
    }
}

fn check_rows(op: &'static str, x: &Mat, y: &Mat) -> Result<()> {
    if x.rows() != y.rows() {
        return Err(Error::mismatch(
            op,
            format!("X has {} rows, Y has {}", x.rows(), y.rows()),
        ));
    }
    Ok(())
}

/// Precomputed pieces shared by every rank of the reduced-rank family.
struct ReducedRankPath<'a> {
    x: &'a Mat,
    y: &'a Mat,
    svd_x: ThinSvd,
    /// SVD of the projection of `Y` onto `col(X)`.
    svd_py: ThinSvd,
    max_rank: usize,
}

impl<'a> ReducedRankPath<'a> {
    fn new(x: &'a Mat, y: &'a Mat) -> Result<Self> {
        check_rows("fit_reduced_rank", x, y)?;
        let svd_x = thin_svd_default(x)?;
        let py = project_colspace(&svd_x, y)?;
        let svd_py = thin_svd(&py, 0.0)?;
        Ok(ReducedRankPath {
            x,
            y,
            svd_x,
            svd_py,
            max_rank: x.cols().min(y.cols()),
        })
    }

    fn fit(&self, r: usize) -> Result<FitResult> {
        if r > self.max_rank {
            return Err(Error::invalid(format!(
                "rank {r} exceeds min(p, T) = {}",
                self.max_rank
            )));
        }
        let target = self.svd_py.reconstruct_leading(r);
        let a_hat = pinv_apply(&self.svd_x, &target)?;
        FitResult::from_coef(self.x, self.y, a_hat, 0, true)
    }
}

/// Global minimizer of `||Y - XA||^2` over `rank(A) <= r`.
pub fn fit_reduced_rank(x: &Mat, y: &Mat, r: usize) -> Result<FitResult> {
    ReducedRankPath::new(x, y)?.fit(r)
}

/// Reduced-rank fits for `r = 0, ..., min(p, T)`.
pub fn fit_reduced_rank_path(x: &Mat, y: &Mat) -> Result<Vec<FitResult>> {
    let path = ReducedRankPath::new(x, y)?;
    (0..=path.max_rank).map(|r| path.fit(r)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// `||Y - X A_r||^2 + pen(r) sigma^2`.
    KnownVariance,
    /// `log ||Y - X A_r||^2 + pen'(r)`.
    LogForm,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankSelection {
    pub rank: usize,
    /// Criterion value per rank; `-inf` where the log-form meets a zero rss.
    pub values: Vec<f64>,
    /// Set when the log-form hits an exact fit and the criterion is undefined.
    pub exact_fit: bool,
}

/// Residuals below this fraction of `||Y||^2` count as an exact fit.
const EXACT_FIT_REL: f64 = 1e-20;

pub fn select_rank<P: Fn(usize) -> f64>(
    path: &[FitResult],
    criterion: Criterion,
    penalty: P,
    sigma: Option<f64>,
) -> Result<RankSelection> {
    let rss: Vec<f64> = path.iter().map(|f| f.rss).collect();
    select_rank_from_rss(&rss, criterion, penalty, sigma)
}

/// Same as [`select_rank`] on a bare residual path indexed by rank.
pub fn select_rank_from_rss<P: Fn(usize) -> f64>(
    rss: &[f64],
    criterion: Criterion,
    penalty: P,
    sigma: Option<f64>,
) -> Result<RankSelection> {
    if rss.is_empty() {
        return Err(Error::invalid("empty rank path"));
    }
    let pens: Vec<f64> = (0..rss.len()).map(&penalty).collect();
    if let Some(r) = pens.iter().position(|p| !p.is_finite()) {
        return Err(Error::invalid(format!("penalty at rank {r} is not finite")));
    }

    match criterion {
        Criterion::KnownVariance => {
            let sigma = match sigma {
                Some(s) if s > 0.0 && s.is_finite() => s,
                other => {
                    return Err(Error::invalid(format!(
                        "known-variance criterion needs sigma > 0, got {other:?}"
                    )))
                }
            };
            let values: Vec<f64> = rss
                .iter()
                .zip(&pens)
                .map(|(r, p)| r + p * sigma * sigma)
                .collect();
            Ok(RankSelection {
                rank: argmin_first(&values),
                values,
                exact_fit: false,
            })
        }
        Criterion::LogForm => {
            let scale = rss[0].max(0.0);
            let is_exact = |r: f64| r <= EXACT_FIT_REL * scale;
            let values: Vec<f64> = rss
                .iter()
                .zip(&pens)
                .map(|(&r, p)| {
                    if is_exact(r) {
                        f64::NEG_INFINITY
                    } else {
                        r.ln() + p
                    }
                })
                .collect();
            if let Some(rank) = rss.iter().position(|&r| is_exact(r)) {
                return Ok(RankSelection {
                    rank,
                    values,
                    exact_fit: true,
                });
            }
            Ok(RankSelection {
                rank: argmin_first(&values),
                values,
                exact_fit: false,
            })
        }
    }
}

/// Index of the minimum, smallest index on ties.
pub(crate) fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// `||Y - XA||^2 + lambda * ||A||_*`.
pub fn nnp_objective(x: &Mat, y: &Mat, a: &Mat, lambda: f64) -> Result<f64> {
    check_rows("nnp_objective", x, y)?;
    if a.rows() != x.cols() || a.cols() != y.cols() {
        return Err(Error::mismatch(
            "nnp_objective",
            format!(
                "A is {:?}, expected ({}, {})",
                a.shape(),
                x.cols(),
                y.cols()
            ),
        ));
    }
    check_lambda(lambda)?;
    let rss = (y - &(x * a)).frob_norm_sq();
    if lambda == 0.0 {
        return Ok(rss);
    }
    Ok(rss + lambda * singular_values(a).iter().sum::<f64>())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

pub fn fit_nnp(x: &Mat, y: &Mat, lambda: f64, opts: &SolverOptions) -> Result<FitResult> {
    fit_nnp_observed(x, y, lambda, opts, |_, _| {})
}

/// [`fit_nnp`] reporting `(iteration, objective)` for every accepted iterate.
///
/// With acceleration, a step that increases the objective is discarded and
/// the momentum restarted from the last accepted iterate, so the reported
/// sequence is nonincreasing in both modes.
pub fn fit_nnp_observed<F: FnMut(usize, f64)>(
    x: &Mat,
    y: &Mat,
    lambda: f64,
    opts: &SolverOptions,
    mut observe: F,
) -> Result<FitResult> {
    check_rows("fit_nnp", x, y)?;
    check_lambda(lambda)?;
    opts.validate()?;
    let sigma1 = crate::matlin::op_norm(x);
    if sigma1 == 0.0 {
        return Err(Error::DegenerateDesign);
    }
    let (p, t) = (x.cols(), y.cols());
    if y.is_zero() {
        return FitResult::from_coef(x, y, Mat::zeros(p, t), 0, true);
    }

    let step = opts.step_scale / (2.0 * sigma1 * sigma1);
    let threshold = step * lambda;
    let objective = |a: &Mat, nuclear: f64| (y - &(x * a)).frob_norm_sq() + lambda * nuclear;
    let floor = f64::EPSILON * y.frob_norm_sq();

    let mut a = Mat::zeros(p, t);
    let mut z = a.clone();
    let mut momentum = 1.0_f64;
    let mut f_prev = objective(&a, 0.0);
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=opts.max_iterations {
        iterations = k;
        let residual = &(x * &z) - y;
        let gradient = x.tr_mul(&residual).scale(2.0 * step);
        let svd = thin_svd(&(&z - &gradient), 0.0)?;
        let a_next = shrink(&svd, threshold);
        let nuclear: f64 = svd.s().iter().map(|s| (s - threshold).max(0.0)).sum();
        let f_next = objective(&a_next, nuclear);

        if opts.acceleration && f_next > f_prev {
            // restart from the last accepted point
            momentum = 1.0;
            z = a.clone();
            continue;
        }
        observe(k, f_next);

        let change = (f_prev - f_next).abs();
        if opts.acceleration {
            let next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
            let beta = (momentum - 1.0) / next_momentum;
            z = &a_next + &(&a_next - &a).scale(beta);
            momentum = next_momentum;
        } else {
            z = a_next.clone();
        }
        a = a_next;
        f_prev = f_next;

        if change <= opts.rel_tol * f_next.max(floor) {
            converged = true;
            break;
        }
    }
    FitResult::from_coef(x, y, a, iterations, converged)
}

/// Closed-form minimizer when `X^T X = I_p`: `svt(X^T Y, lambda / 2)`.
pub fn fit_nnp_orthogonal(x: &Mat, y: &Mat, lambda: f64) -> Result<FitResult> {
    check_rows("fit_nnp_orthogonal", x, y)?;
    check_lambda(lambda)?;
    let gram_err = (&x.tr_mul(x) - &Mat::identity(x.cols())).max_abs();
    if gram_err > 1e-8 {
        return Err(Error::Precondition(format!(
            "X^T X deviates from the identity by {gram_err:e}"
        )));
    }
    let a_hat = crate::matlin::svt(&x.tr_mul(y), lambda / 2.0)?;
    FitResult::from_coef(x, y, a_hat, 0, true)
}
