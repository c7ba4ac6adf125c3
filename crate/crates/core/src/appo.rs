//! Approximate proximal point oracle.
//!
//! Given a center `x`, iterates QP solve / oracle call / cut addition until the
//! trial point `z` satisfies the inner acceptance rule, typically
//! `f(z) - model(z) <= eps`. The result gives inexact first-order information
//! on the Moreau-Yosida envelope
//!
//! ```text
//!     F_mu(x) = min_z f(z) + (mu/2)|z - x|^2
//! ```
//!
//! namely an upper estimate `F_x(p) = f(p) + (mu/2)|p - x|^2` within `eps` of
//! `F_mu(x)` and the gradient estimate `mu (x - p)`, an `eps`-subgradient of
//! `f` at `p`.

use serde::Serialize;

use crate::bundle::{Bundle, Cut};
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, dot, norm};
use crate::oracle::{Evaluation, Oracle};
use crate::qp::solve_prox_qp;
use crate::schedules::{Acceptance, InnerTest};

/// Options of the inner loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AppoOptions {
    /// Maximum number of QP solves per call.
    pub inner_cap: usize,
    /// A subgradient with norm at most this certifies optimality; a negative
    /// value disables the check.
    pub gnorm_tol: f64,
    /// Whether the accepted trial point's cut enters the bundle.
    pub bundle_accepted_cut: bool,
}

impl Default for AppoOptions {
    fn default() -> Self {
        Self {
            inner_cap: 1000,
            gnorm_tol: 1e-6,
            bundle_accepted_cut: true,
        }
    }
}

/// Counts of runtime checks and their violations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Audit {
    pub checks: usize,
    /// QP value decreased between inner iterations.
    pub monotonicity: usize,
    /// QP value exceeded `f(z) + (mu/2)|z - x|^2` at an evaluated point.
    pub upper_bound: usize,
    /// `model <= F_x(p) <= model + eps` failed.
    pub sandwich: usize,
    /// `mu (x - p)` failed the `eps`-subgradient inequality at an evaluated point.
    pub eps_subgradient: usize,
    /// `model(y) + (mu/2)|y - x|^2 <= f(x)` failed at an outer step.
    pub positive_diff: usize,
    /// A descent-accepted step increased `f`.
    pub descent: usize,
}

impl Audit {
    pub fn violations(&self) -> usize {
        self.monotonicity
            + self.upper_bound
            + self.sandwich
            + self.eps_subgradient
            + self.positive_diff
            + self.descent
    }

    pub fn merge(&mut self, other: &Audit) {
        self.checks += other.checks;
        self.monotonicity += other.monotonicity;
        self.upper_bound += other.upper_bound;
        self.sandwich += other.sandwich;
        self.eps_subgradient += other.eps_subgradient;
        self.positive_diff += other.positive_diff;
        self.descent += other.descent;
    }

    /// Records `lhs <= rhs` up to a relative slack; returns whether it held.
    pub(crate) fn le(&mut self, lhs: f64, rhs: f64, counter: fn(&mut Audit) -> &mut usize) -> bool {
        self.checks += 1;
        let ok = lhs <= rhs + slack(lhs, rhs);
        if !ok {
            *counter(self) += 1;
        }
        ok
    }
}

/// Floating-point slack for the runtime checks.
pub fn slack(a: f64, b: f64) -> f64 {
    1e-9 * (1.0 + a.abs() + b.abs())
}

/// Output of [`approximate_prox`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    /// Approximate proximal point.
    pub phat: Vec<f64>,
    pub fx_at_phat: f64,
    /// `f(phat) + (mu/2)|phat - x|^2`, an upper estimate of `F_mu(x)`.
    pub envelope_upper: f64,
    /// `mu (x - phat)`.
    pub grad_estimate: Vec<f64>,
    /// Value of the last QP, a lower estimate of `F_mu(x)`.
    pub model_value_at_phat: f64,
    /// Cutting-plane model at `phat` (without the proximal term).
    pub model_value: f64,
    /// `f(x)` at the center.
    pub fx_center: f64,
    pub inner_iters: usize,
    pub cuts_added: usize,
    /// `f(phat) - model(phat)`.
    pub achieved_gap: f64,
    /// Tolerance the result is certified for.
    pub eps_used: f64,
    pub acceptance: Acceptance,
    pub exact_hit: bool,
    pub audit: Audit,
}

impl ProxResult {
    fn exact(
        point: Vec<f64>,
        fvalue: f64,
        fx_center: f64,
        inner_iters: usize,
        cuts_added: usize,
        audit: Audit,
    ) -> Self {
        let n = point.len();
        Self {
            phat: point,
            fx_at_phat: fvalue,
            envelope_upper: fvalue,
            grad_estimate: vec![0.0; n],
            model_value_at_phat: fvalue,
            model_value: fvalue,
            fx_center,
            inner_iters,
            cuts_added,
            achieved_gap: 0.0,
            eps_used: 0.0,
            acceptance: Acceptance::ExactHit,
            exact_hit: true,
            audit,
        }
    }
}

fn add_evaluation(bundle: &mut Bundle, z: &[f64], e: &Evaluation) -> Result<()> {
    bundle.add_cut(Cut::new(z.to_vec(), e.fvalue, e.subgrad.clone())?)
}

/// Computes an approximate proximal point of `x`.
///
/// `bundle` is used as the starting model and is left holding the final
/// model, ready to seed the next call. The cut at `x` is added when absent.
pub fn approximate_prox(
    oracle: &mut Oracle<'_>,
    x: &[f64],
    mu: f64,
    test: InnerTest,
    bundle: &mut Bundle,
    opts: &AppoOptions,
) -> Result<ProxResult> {
    if x.len() != bundle.dimension() {
        return Err(Error::DimensionMismatch {
            expected: bundle.dimension(),
            got: x.len(),
        });
    }
    let mut audit = Audit::default();
    let mut cuts_added = 0;

    let (fx, gx) = match bundle.cut_at(x) {
        Some(c) => (c.fvalue(), c.subgrad().to_vec()),
        None => {
            let e = oracle.call(x)?;
            add_evaluation(bundle, x, &e)?;
            cuts_added += 1;
            (e.fvalue, e.subgrad)
        }
    };
    if norm(&gx) <= opts.gnorm_tol {
        return Ok(ProxResult::exact(x.to_vec(), fx, fx, 0, cuts_added, audit));
    }

    // points evaluated during this call, for the runtime checks
    let mut log: Vec<(Vec<f64>, f64)> = vec![(x.to_vec(), fx)];
    let mut totals: Vec<f64> = Vec::new();

    for iter in 1..=opts.inner_cap {
        let warm = bundle.warm_weights();
        let sol = solve_prox_qp(bundle, x, mu, warm.as_deref())?;
        bundle.record_weights(&sol.weights);
        if let Some(&prev) = totals.last() {
            audit.le(prev, sol.total_value, |a| &mut a.monotonicity);
        }
        totals.push(sol.total_value);

        let z = sol.zstar;
        let e = oracle.call(&z)?;
        log.push((z.clone(), e.fvalue));

        if norm(&e.subgrad) <= opts.gnorm_tol {
            return Ok(ProxResult::exact(z, e.fvalue, fx, iter, cuts_added, audit));
        }

        let accepted = test.check(fx, e.fvalue, sol.model_value);
        if accepted.is_none() || opts.bundle_accepted_cut {
            add_evaluation(bundle, &z, &e)?;
            cuts_added += 1;
        }
        let Some((acceptance, eps_used)) = accepted else {
            if iter == opts.inner_cap {
                return Err(Error::InnerCapExceeded {
                    cap: opts.inner_cap,
                    achieved_gap: e.fvalue - sol.model_value,
                    tolerance: match test {
                        InnerTest::Tolerance(eps) => eps,
                        InnerTest::Descent { .. } => f64::NAN,
                    },
                    best_point: z,
                });
            }
            continue;
        };

        let envelope_upper = e.fvalue + 0.5 * mu * dist_sq(&z, x);
        let grad_estimate: Vec<f64> = x.iter().zip(&z).map(|(xi, zi)| mu * (xi - zi)).collect();

        // F_x(z) >= every QP value seen in this call
        let upper = log
            .iter()
            .map(|(p, fp)| fp + 0.5 * mu * dist_sq(p, x))
            .fold(f64::INFINITY, f64::min);
        for &t in &totals {
            audit.le(t, upper, |a| &mut a.upper_bound);
        }
        audit.le(sol.total_value, envelope_upper, |a| &mut a.sandwich);
        audit.le(envelope_upper, sol.total_value + eps_used, |a| {
            &mut a.sandwich
        });
        for (p, fp) in &log {
            let diff: Vec<f64> = p.iter().zip(&z).map(|(pi, zi)| pi - zi).collect();
            let rhs = e.fvalue + dot(&grad_estimate, &diff) - eps_used;
            audit.le(rhs, *fp, |a| &mut a.eps_subgradient);
        }

        return Ok(ProxResult {
            phat: z,
            fx_at_phat: e.fvalue,
            envelope_upper,
            grad_estimate,
            model_value_at_phat: sol.total_value,
            model_value: sol.model_value,
            fx_center: fx,
            inner_iters: iter,
            cuts_added,
            achieved_gap: e.fvalue - sol.model_value,
            eps_used,
            acceptance,
            exact_hit: false,
            audit,
        });
    }
    Err(Error::Config("inner_cap must be positive".into()))
}

/// Approximate-optimality certificate: `f(x) - model(y) <= eta`, where `y` is
/// the proximal point computed from center `x`. When it holds,
/// `F_mu(x) <= f(x) <= F_mu(x) + eta`.
pub fn optimality_probe(fxk: f64, model_value_next: f64, eta: f64) -> bool {
    fxk - model_value_next <= eta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::FnObjective;

    fn abs_obj() -> FnObjective<impl Fn(&[f64], &mut [f64]) -> f64 + Send + Sync> {
        FnObjective::new(1, |x: &[f64], g: &mut [f64]| {
            g[0] = if x[0] > 0.0 {
                1.0
            } else if x[0] < 0.0 {
                -1.0
            } else {
                0.0
            };
            x[0].abs()
        })
    }

    #[test]
    fn abs_from_three() {
        let f = abs_obj();
        let mut oracle = Oracle::new(&f);
        let mut b = Bundle::new(1);
        let r = approximate_prox(
            &mut oracle,
            &[3.0],
            1.0,
            InnerTest::Tolerance(1e-6),
            &mut b,
            &AppoOptions::default(),
        )
        .unwrap();
        assert_eq!(r.phat, vec![2.0]);
        assert_eq!(r.grad_estimate, vec![1.0]);
        assert_eq!(r.envelope_upper, 2.5);
        assert_eq!(r.inner_iters, 1);
        assert_eq!(r.fx_center, 3.0);
        assert!(!r.exact_hit);
        assert_eq!(r.audit.violations(), 0);
    }

    #[test]
    fn abs_inside_threshold() {
        // p_1(0.3) = 0, F_1(0.3) = 0.045
        let f = abs_obj();
        let mut oracle = Oracle::new(&f);
        let mut b = Bundle::new(1);
        let opts = AppoOptions {
            gnorm_tol: 0.0,
            ..Default::default()
        };
        let r = approximate_prox(
            &mut oracle,
            &[0.3],
            1.0,
            InnerTest::Tolerance(1e-6),
            &mut b,
            &opts,
        )
        .unwrap();
        assert!(r.phat[0].abs() < 1e-12);
        assert!(r.inner_iters <= 2);
        assert!((r.envelope_upper - 0.045).abs() < 1e-12);
        assert_eq!(r.audit.violations(), 0);
    }

    #[test]
    fn affine_objective_one_step() {
        let f = FnObjective::new(2, |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0;
            g[1] = -1.0;
            2.0 * x[0] - x[1] + 0.5
        });
        let mut oracle = Oracle::new(&f);
        let mut b = Bundle::new(2);
        let r = approximate_prox(
            &mut oracle,
            &[1.0, 1.0],
            4.0,
            InnerTest::Tolerance(1e-9),
            &mut b,
            &AppoOptions::default(),
        )
        .unwrap();
        assert_eq!(r.inner_iters, 1);
        assert!((r.phat[0] - 0.5).abs() < 1e-14);
        assert!((r.phat[1] - 1.25).abs() < 1e-14);
        assert!(r.achieved_gap.abs() < 1e-12);
    }

    #[test]
    fn warm_start_terminates_at_once() {
        let f = abs_obj();
        let mut oracle = Oracle::new(&f);
        let mut b = Bundle::new(1);
        let opts = AppoOptions::default();
        approximate_prox(
            &mut oracle,
            &[3.0],
            1.0,
            InnerTest::Tolerance(1e-6),
            &mut b,
            &opts,
        )
        .unwrap();
        let calls = oracle.calls();
        let r = approximate_prox(
            &mut oracle,
            &[3.0],
            1.0,
            InnerTest::Tolerance(1e-6),
            &mut b,
            &opts,
        )
        .unwrap();
        assert_eq!(r.inner_iters, 1);
        assert_eq!(oracle.calls(), calls + 1);
    }

    #[test]
    fn exact_hit_at_minimizer() {
        let f = abs_obj();
        let mut oracle = Oracle::new(&f);
        let mut b = Bundle::new(1);
        let r = approximate_prox(
            &mut oracle,
            &[0.0],
            1.0,
            InnerTest::Tolerance(1e-6),
            &mut b,
            &AppoOptions::default(),
        )
        .unwrap();
        assert!(r.exact_hit);
        assert_eq!(r.phat, vec![0.0]);
        // tight model at the minimizer: probe holds with eta = 0
        assert!(optimality_probe(
            0.0,
            b.evaluate_model(&[0.0]).unwrap(),
            0.0
        ));
    }

    #[test]
    fn probe_arithmetic() {
        assert!(optimality_probe(1.0, 0.999_999_9, 1e-6));
        assert!(!optimality_probe(1.0, 0.9, 1e-6));
    }

    #[test]
    fn inner_cap_is_reported() {
        // smooth strongly curved objective: the model never becomes exact
        let f = FnObjective::new(1, |x: &[f64], g: &mut [f64]| {
            g[0] = 4.0 * x[0].powi(3);
            x[0].powi(4)
        });
        let mut oracle = Oracle::new(&f);
        let mut b = Bundle::new(1);
        let opts = AppoOptions {
            inner_cap: 2,
            ..Default::default()
        };
        let err = approximate_prox(
            &mut oracle,
            &[2.0],
            1.0,
            InnerTest::Tolerance(1e-14),
            &mut b,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InnerCapExceeded { cap: 2, .. }));
    }
}
