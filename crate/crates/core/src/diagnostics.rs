//! Error accounting and complexity-bound monitors.
//!
//! With inexact proximal points of accuracy `eps_i`, the accelerated methods
//! satisfy `f(y^k) - f* <= c mu R^2 / (k+1)^2 + vartheta_k`, where
//!
//! ```text
//!     vartheta_k = lambda_{k-1}^{-2} sum_{i<k} lambda_i^2 eps_i
//! ```
//!
//! is the accumulated error, `R = |x^0 - x*|` and `c` is 2 for FPBA1 and 1 for
//! FPBA2.

use serde::Serialize;

use crate::accel::{NesterovSequence, Variant};
use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::oracle::Oracle;
use crate::qp::solve_prox_qp;
use crate::trace::RunTrace;

/// Running accumulated-error bookkeeping.
///
/// After `k` updates with `(eps_i, lambda_i)`, `i < k`:
/// `vartheta = vartheta_k` and `theta = theta_k`, where `theta_k` is the
/// weight sum `vartheta_k / eps` for a constant tolerance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorLedger {
    eps_history: Vec<f64>,
    vartheta: f64,
    theta: f64,
}

impl ErrorLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Step count `k`.
    pub fn steps(&self) -> usize {
        self.eps_history.len()
    }

    pub fn eps_history(&self) -> &[f64] {
        &self.eps_history
    }

    /// Advances `vartheta_{k+1} = eps_k + (1 - 1/lambda_k) vartheta_k` and
    /// `theta_{k+1} = 1 + (1 - 1/lambda_k) theta_k`.
    pub fn update(&mut self, eps_k: f64, lambda_k: f64) {
        let keep = 1.0 - 1.0 / lambda_k;
        self.vartheta = eps_k + keep * self.vartheta;
        self.theta = 1.0 + keep * self.theta;
        self.eps_history.push(eps_k);
    }

    pub fn vartheta(&self) -> f64 {
        self.vartheta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `vartheta_k` from its defining sum, for cross-checking the recursion.
    pub fn vartheta_direct(&self, lambdas: &mut NesterovSequence) -> f64 {
        let k = self.steps();
        if k == 0 {
            return 0.0;
        }
        let sum: f64 = self
            .eps_history
            .iter()
            .enumerate()
            .map(|(i, e)| lambdas.lambda(i).powi(2) * e)
            .sum();
        sum / lambdas.lambda(k - 1).powi(2)
    }
}

/// Weight `omega_{i,k} = lambda_i^2 / lambda_{k-1}^2` of `eps_i` in
/// `vartheta_k`, for `i < k`.
pub fn weight(lambdas: &mut NesterovSequence, i: usize, k: usize) -> f64 {
    assert!(i < k, "weight omega_{{i,k}} needs i < k");
    (lambdas.lambda(i) / lambdas.lambda(k - 1)).powi(2)
}

fn bound_coefficient(variant: Variant) -> Result<f64> {
    match variant {
        Variant::Fpba1 => Ok(2.0),
        Variant::Fpba2 => Ok(1.0),
        v => Err(Error::NoBound(v.label())),
    }
}

/// Right-hand side of the complexity bound after `k >= 1` steps.
pub fn bound_value(variant: Variant, k: usize, mu: f64, r: f64, vartheta: f64) -> Result<f64> {
    let c = bound_coefficient(variant)?;
    let k1 = (k + 1) as f64;
    Ok(c * mu * r * r / (k1 * k1) + vartheta)
}

/// Smallest real `k` for which the bound reaches `eps` when `eps_0 = eps/2`
/// and the decay schedule is used; the step count is its ceiling.
pub fn required_steps(variant: Variant, mu: f64, r: f64, eps: f64) -> Result<f64> {
    let c = bound_coefficient(variant)?;
    // c mu R^2 / (k+1)^2 <= eps/2
    Ok(r * (2.0 * c * mu / eps).sqrt() - 1.0)
}

/// Upper estimate of the gap `f(y) - F_mu(y)`, computed with the bundle's
/// model: `f(y) - [model(z*) + (mu/2)|z* - y|^2]`.
pub fn gap_estimate(oracle: &mut Oracle<'_>, bundle: &Bundle, mu: f64, y: &[f64]) -> Result<f64> {
    if bundle.is_empty() {
        return Err(Error::EmptyBundle);
    }
    let fy = oracle.call(y)?.fvalue;
    let sol = solve_prox_qp(bundle, y, mu, None)?;
    Ok(fy - sol.total_value)
}

/// Outcome of checking a trace against its complexity bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub checked: usize,
    pub violations: usize,
    /// Largest `(f(y^k) - f*) - bound_k`; negative when all steps conform.
    pub worst_excess: f64,
    /// Set when `R` came from a surrogate minimizer; violations are then
    /// informative only.
    pub advisory: bool,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.advisory || self.violations == 0
    }
}

/// Checks `f(y^k) - fstar <= bound_value(variant, k, mu, R, vartheta_k)` on
/// every record, with slack `1e-9 (1 + bound)`. `mu` should be the largest
/// proximal parameter used in the run.
pub fn monitor_bound(
    trace: &RunTrace,
    variant: Variant,
    mu: f64,
    r: f64,
    fstar: f64,
    advisory: bool,
) -> Result<BoundReport> {
    let mut report = BoundReport {
        checked: 0,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
        advisory,
    };
    for rec in &trace.records {
        let bound = bound_value(variant, rec.k, mu, r, rec.vartheta)?;
        let excess = rec.f_y - fstar - bound;
        report.checked += 1;
        report.worst_excess = report.worst_excess.max(excess);
        if excess > 1e-9 * (1.0 + bound.abs()) {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// `R = |x0 - x*|` with `x*` the known minimizer, or the run's best point as a
/// surrogate (flagged advisory).
pub fn bound_radius(x0: &[f64], xstar: Option<&[f64]>, trace: &RunTrace) -> (f64, bool) {
    match xstar {
        Some(xs) => (dist(x0, xs), false),
        None => (dist(x0, &trace.x_best), true),
    }
}
