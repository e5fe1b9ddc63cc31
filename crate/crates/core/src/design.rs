//! Design diagnostics.
//!
//! A design `X` satisfies the pseudo-RIP when its smallest *positive* singular
//! value `sigma_q(X)`, `q = rank(X)`, is bounded below by `1/mu`. Unlike the
//! semi-RIP `||A|| <= mu ||XA||` for all `A`, this makes sense when `n < p`.
//! The RI-Property asks for a bounded condition number `eta = sigma_1/sigma_q`
//! over the nonzero spectrum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matlin::{thin_svd_default, Mat, ThinSvd};

/// Comparisons against user thresholds tolerate a few ulps so that
/// `mu_max = 1/sigma_q` computed in floating point still certifies.
const BOUNDARY_SLACK: f64 = 4.0 * f64::EPSILON;

#[derive(Clone, Debug)]
pub struct DesignSummary {
    pub svd: ThinSvd,
    pub n: usize,
    pub p: usize,
    /// Numerical rank of `X`.
    pub q: usize,
    pub sigma1: f64,
    pub sigmaq: f64,
    pub mu: f64,
    pub eta: f64,
}

/// Verdict on the pseudo-RIP lower bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assumption1Report {
    pub holds: bool,
    pub mu_max: f64,
    pub sigmaq: f64,
    /// Smallest `mu` for which the assumption holds, `1/sigma_q`.
    pub mu_min: f64,
    pub eta: f64,
}

pub fn summarize_design(x: &Mat) -> Result<DesignSummary> {
    let svd = thin_svd_default(x)?;
    summary_from_svd(svd)
}

/// Builds the summary from an existing factorization of `X`.
pub fn summary_from_svd(svd: ThinSvd) -> Result<DesignSummary> {
    let q = svd.rank();
    if q == 0 {
        return Err(Error::DegenerateDesign);
    }
    let (n, p) = svd.source_shape();
    let sigma1 = svd.s()[0];
    let sigmaq = svd.s()[q - 1];
    Ok(DesignSummary {
        n,
        p,
        q,
        sigma1,
        sigmaq,
        mu: 1.0 / sigmaq,
        eta: sigma1 / sigmaq,
        svd,
    })
}

/// `sigma_q(X) >= 1/mu_max`.
pub fn check_assumption1(summary: &DesignSummary, mu_max: f64) -> Result<Assumption1Report> {
    if !(mu_max.is_finite() && mu_max > 0.0) {
        return Err(Error::invalid(format!(
            "mu_max must be positive and finite, got {mu_max}"
        )));
    }
    Ok(Assumption1Report {
        holds: summary.sigmaq * mu_max >= 1.0 - BOUNDARY_SLACK,
        mu_max,
        sigmaq: summary.sigmaq,
        mu_min: summary.mu,
        eta: summary.eta,
    })
}

/// `1 <= eta <= eta_max`.
pub fn check_ri_property(summary: &DesignSummary, eta_max: f64) -> Result<bool> {
    if eta_max.is_nan() || eta_max < 1.0 {
        return Err(Error::invalid(format!(
            "eta_max must be at least 1, got {eta_max}"
        )));
    }
    Ok(summary.eta <= eta_max * (1.0 + BOUNDARY_SLACK))
}
