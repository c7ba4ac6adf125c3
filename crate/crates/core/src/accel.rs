//! Outer drivers: the proximal point algorithm, the classical proximal bundle
//! method and the two accelerated proximal bundle variants.
//!
//! All four share one loop. Step `k` computes an approximate proximal point
//! `y^{k+1}` of the center `x^k`, then moves the center by
//!
//! ```text
//!     x^{k+1} = y^{k+1} + alpha_k (y^{k+1} - y^k) + beta_k (y^{k+1} - x^k)
//! ```
//!
//! with `alpha_k = (lambda_k - 1) / lambda_{k+1}` and `beta_k` either `0`
//! (FPBA1) or `lambda_k / lambda_{k+1}` (FPBA2). PPA and the classical bundle
//! method use `alpha = beta = 0`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::appo::{approximate_prox, optimality_probe, AppoOptions, Audit};
use crate::bundle::Bundle;
use crate::diagnostics::ErrorLedger;
use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::oracle::{Objective, Oracle};
use crate::schedules::{Acceptance, EpsSchedule};
use crate::trace::{RunSummary, RunTrace, StepRecord, StopReason};

/// Memoized `lambda_0 = 1, lambda_{k+1} = (1 + sqrt(1 + 4 lambda_k^2)) / 2`.
///
/// A generalized sequence may be supplied instead; it must satisfy
/// `lambda_k^2 - lambda_{k-1}^2 <= lambda_k`, and is continued by the standard
/// recurrence past its last entry.
#[derive(Debug, Clone, PartialEq)]
pub struct NesterovSequence {
    lambdas: Vec<f64>,
    generalized: bool,
}

impl Default for NesterovSequence {
    fn default() -> Self {
        Self::new()
    }
}

fn next_lambda(l: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * l * l).sqrt())
}

impl NesterovSequence {
    pub fn new() -> Self {
        Self {
            lambdas: vec![1.0],
            generalized: false,
        }
    }

    pub fn generalized(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("empty lambda sequence".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 1.0)) {
            return Err(Error::Config(format!(
                "lambda values must be finite and >= 1, got {v}"
            )));
        }
        for (k, w) in values.windows(2).enumerate() {
            let lhs = w[1] * w[1] - w[0] * w[0];
            if lhs > w[1] * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "lambda_{}^2 - lambda_{}^2 = {lhs} exceeds lambda_{} = {}",
                    k + 1,
                    k,
                    k + 1,
                    w[1]
                )));
            }
        }
        Ok(Self {
            lambdas: values,
            generalized: true,
        })
    }

    pub fn is_generalized(&self) -> bool {
        self.generalized
    }

    pub fn lambda(&mut self, k: usize) -> f64 {
        while self.lambdas.len() <= k {
            let last = *self.lambdas.last().expect("sequence is nonempty");
            self.lambdas.push(next_lambda(last));
        }
        self.lambdas[k]
    }

    pub fn alpha(&mut self, k: usize) -> f64 {
        (self.lambda(k) - 1.0) / self.lambda(k + 1)
    }

    pub fn beta(&mut self, k: usize, variant: Variant) -> f64 {
        match variant {
            Variant::Fpba2 => self.lambda(k) / self.lambda(k + 1),
            _ => 0.0,
        }
    }

    /// Momentum coefficients `(alpha_k, beta_k)` used by `variant`.
    pub fn momentum(&mut self, k: usize, variant: Variant) -> (f64, f64) {
        match variant {
            Variant::Ppa | Variant::ClassicPba => (0.0, 0.0),
            Variant::Fpba1 | Variant::Fpba2 => (self.alpha(k), self.beta(k, variant)),
        }
    }
}

/// `y_next + alpha (y_next - y_prev) + beta (y_next - x_prev)`.
pub fn extrapolate(
    y_next: &[f64],
    y_prev: &[f64],
    x_prev: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<Vec<f64>> {
    for v in [y_prev, x_prev] {
        if v.len() != y_next.len() {
            return Err(Error::DimensionMismatch {
                expected: y_next.len(),
                got: v.len(),
            });
        }
    }
    if alpha == 0.0 && beta == 0.0 {
        return Ok(y_next.to_vec());
    }
    Ok(y_next
        .iter()
        .zip(y_prev.iter().zip(x_prev))
        .map(|(yn, (yp, xp))| yn + alpha * (yn - yp) + beta * (yn - xp))
        .collect())
}

/// Outer algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Inexact proximal point algorithm; the bundle is rebuilt at every step.
    Ppa,
    /// Classical proximal bundle method (no momentum).
    ClassicPba,
    /// Accelerated, `beta_k = 0`.
    Fpba1,
    /// Accelerated, `beta_k = lambda_k / lambda_{k+1}`.
    Fpba2,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Ppa,
        Variant::ClassicPba,
        Variant::Fpba1,
        Variant::Fpba2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Ppa => "ppa",
            Variant::ClassicPba => "pba",
            Variant::Fpba1 => "fpba1",
            Variant::Fpba2 => "fpba2",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ppa" => Ok(Variant::Ppa),
            "pba" | "classic_pba" | "classic-pba" => Ok(Variant::ClassicPba),
            "fpba1" => Ok(Variant::Fpba1),
            "fpba2" => Ok(Variant::Fpba2),
            _ => Err(Error::Config(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Proximal parameter per outer step. Must be nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MuSchedule {
    Constant {
        mu: f64,
    },
    /// `mu_k = mu0 * rho^k` with `0 < rho <= 1`.
    Geometric {
        mu0: f64,
        rho: f64,
    },
    /// Explicit values; the last entry repeats.
    Table {
        values: Vec<f64>,
    },
}

impl Default for MuSchedule {
    fn default() -> Self {
        MuSchedule::Constant { mu: 1.0 }
    }
}

impl MuSchedule {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match self {
            MuSchedule::Constant { mu } if positive(*mu) => Ok(()),
            MuSchedule::Constant { mu } => {
                Err(Error::Config(format!("mu must be positive, got {mu}")))
            }
            MuSchedule::Geometric { mu0, rho } => {
                if !positive(*mu0) {
                    return Err(Error::Config(format!("mu0 must be positive, got {mu0}")));
                }
                if !(*rho > 0.0 && *rho <= 1.0) {
                    return Err(Error::Config(format!(
                        "mu decay factor must lie in (0, 1], got {rho}"
                    )));
                }
                Ok(())
            }
            MuSchedule::Table { values } => {
                if values.is_empty() || !values.iter().all(|v| positive(*v)) {
                    return Err(Error::Config(
                        "mu table must be nonempty and positive".into(),
                    ));
                }
                if let Some(k) = values.windows(2).position(|w| w[1] > w[0]) {
                    return Err(Error::Config(format!(
                        "mu schedule increases at step {}: {} > {}",
                        k + 1,
                        values[k + 1],
                        values[k]
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn mu(&self, k: usize) -> f64 {
        match self {
            MuSchedule::Constant { mu } => *mu,
            MuSchedule::Geometric { mu0, rho } => mu0 * rho.powi(k.min(i32::MAX as usize) as i32),
            MuSchedule::Table { values } => values[k.min(values.len() - 1)],
        }
    }

    pub fn label(&self) -> String {
        match self {
            MuSchedule::Constant { mu } => format!("{mu}"),
            MuSchedule::Geometric { mu0, rho } => format!("{mu0}*{rho}^k"),
            MuSchedule::Table { values } => format!("table({})", values.len()),
        }
    }
}

/// Bundle handling between outer steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// Keep the final bundle of step `k` as the seed of step `k + 1`.
    #[default]
    Carry,
    /// Start every step from the single cut at the current center.
    Reset,
}

impl FromStr for WarmStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "carry" => Ok(WarmStart::Carry),
            "reset" => Ok(WarmStart::Reset),
            _ => Err(Error::Config(format!("unknown warm-start mode `{s}`"))),
        }
    }
}

/// Termination tests, combined with OR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StopRules {
    /// Optimal value; enables `f_best - fstar <= ftol (1 + |f_best|)`.
    pub fstar: Option<f64>,
    pub ftol: f64,
    /// Stop once `f(x^k) - model(y^{k+1}) <= eta`.
    pub probe_eta: Option<f64>,
    pub max_outer: usize,
}

impl Default for StopRules {
    fn default() -> Self {
        Self {
            fstar: None,
            ftol: 1e-6,
            probe_eta: None,
            max_outer: 250,
        }
    }
}

impl StopRules {
    pub fn reached_ftol(&self, f_best: f64) -> bool {
        self.fstar
            .is_some_and(|fs| f_best - fs <= self.ftol * (1.0 + f_best.abs()))
    }
}

/// Full configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverConfig {
    pub variant: Variant,
    pub mu: MuSchedule,
    pub eps: EpsSchedule,
    pub stop: StopRules,
    pub warm: WarmStart,
    /// Maximum bundle size; `None` is unbounded.
    pub capacity: Option<usize>,
    pub appo: AppoOptions,
    /// Forces `alpha = beta = 0` whatever the variant.
    pub zero_momentum: bool,
    /// Replaces the standard lambda sequence.
    pub lambdas: Option<NesterovSequence>,
}

impl DriverConfig {
    pub fn new(variant: Variant, eps: EpsSchedule) -> Self {
        Self {
            variant,
            mu: MuSchedule::default(),
            eps,
            stop: StopRules::default(),
            warm: WarmStart::default(),
            capacity: None,
            appo: AppoOptions::default(),
            zero_momentum: false,
            lambdas: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mu.validate()?;
        self.eps.validate()?;
        if self.stop.max_outer == 0 {
            return Err(Error::Config("max_outer must be at least 1".into()));
        }
        if !(self.stop.ftol > 0.0) {
            return Err(Error::Config(format!(
                "ftol must be positive, got {}",
                self.stop.ftol
            )));
        }
        if self.appo.inner_cap == 0 {
            return Err(Error::Config("inner_cap must be at least 1".into()));
        }
        if self.capacity == Some(0) {
            return Err(Error::Config("bundle capacity must be at least 1".into()));
        }
        if let Some(eta) = self.stop.probe_eta {
            if !(eta >= 0.0) {
                return Err(Error::Config(format!(
                    "probe threshold must be nonnegative, got {eta}"
                )));
            }
        }
        Ok(())
    }
}

/// Runs one outer algorithm from `x0`.
///
/// Returns the trace on normal termination. If an inner solve fails, the
/// error is wrapped in [`Error::Run`] together with the trace so far.
pub fn run(objective: &dyn Objective, x0: &[f64], config: &DriverConfig) -> Result<RunTrace> {
    config.validate()?;
    let n = objective.dimension();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if !all_finite(x0) {
        return Err(Error::NonFinite("starting point"));
    }

    let started = Instant::now();
    let mut oracle = Oracle::new(objective);
    let mut bundle = match config.capacity {
        Some(c) => Bundle::with_capacity(n, c)?,
        None => Bundle::new(n),
    };
    let mut lambdas = config.lambdas.clone().unwrap_or_default();
    let mut ledger = ErrorLedger::new();
    let mut audit = Audit::default();
    let mut records: Vec<StepRecord> = Vec::new();

    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let reset = config.warm == WarmStart::Reset || config.variant == Variant::Ppa;

    let finish = |records: Vec<StepRecord>,
                  reason: StopReason,
                  audit: Audit,
                  oracle: &Oracle<'_>,
                  y: Vec<f64>| {
        let f_best = oracle.best_value().unwrap_or(f64::NAN);
        RunTrace {
            summary: RunSummary {
                problem: None,
                variant: config.variant,
                schedule: config.eps.label(),
                mu: config.mu.label(),
                iterations: records.len(),
                oracle_calls: oracle.calls(),
                f_best,
                f_gap: config.stop.fstar.map(|fs| f_best - fs),
                stop_reason: reason,
                converged: matches!(
                    reason,
                    StopReason::Ftol | StopReason::Gnorm | StopReason::Probe
                ),
                wall_time: started.elapsed().as_secs_f64(),
                audit,
            },
            records,
            x_best: oracle.best_point().map(<[f64]>::to_vec).unwrap_or_default(),
            y_final: y,
        }
    };

    for k in 0..config.stop.max_outer {
        let mu = config.mu.mu(k);
        let test = config.eps.next_eps(k, &mut lambdas);
        if reset {
            bundle.clear();
        }
        let prox = match approximate_prox(&mut oracle, &x, mu, test, &mut bundle, &config.appo) {
            Ok(p) => p,
            Err(e) => {
                let partial = finish(records, StopReason::Error, audit, &oracle, y);
                return Err(Error::Run {
                    step: k,
                    source: Box::new(e),
                    partial: Box::new(partial),
                });
            }
        };
        audit.merge(&prox.audit);

        // model(y^{k+1}) + (mu/2)|y^{k+1} - x^k|^2 <= f(x^k)
        audit.le(prox.model_value_at_phat, prox.fx_center, |a| {
            &mut a.positive_diff
        });
        if prox.acceptance == Acceptance::Descent {
            audit.le(prox.fx_at_phat, prox.fx_center, |a| &mut a.descent);
        }

        let lambda_k = lambdas.lambda(k);
        ledger.update(prox.eps_used, lambda_k);
        let f_best = oracle.best_value().unwrap_or(f64::NAN);
        records.push(StepRecord {
            k: k + 1,
            y: prox.phat.clone(),
            f_y: prox.fx_at_phat,
            f_best,
            eps_k: prox.eps_used,
            fg_cum: oracle.calls(),
            vartheta: ledger.vartheta(),
            inner_iters: prox.inner_iters,
            acceptance: prox.acceptance,
        });

        let reason = if prox.exact_hit {
            Some(StopReason::Gnorm)
        } else if config.stop.reached_ftol(f_best) {
            Some(StopReason::Ftol)
        } else if config
            .stop
            .probe_eta
            .is_some_and(|eta| optimality_probe(prox.fx_center, prox.model_value, eta))
        {
            Some(StopReason::Probe)
        } else {
            None
        };
        if let Some(reason) = reason {
            return Ok(finish(records, reason, audit, &oracle, prox.phat));
        }

        let (alpha, beta) = if config.zero_momentum {
            (0.0, 0.0)
        } else {
            lambdas.momentum(k, config.variant)
        };
        x = extrapolate(&prox.phat, &y, &x, alpha, beta)?;
        y = prox.phat;
    }
    Ok(finish(records, StopReason::MaxOuter, audit, &oracle, y))
}
