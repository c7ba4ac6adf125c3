//! Proximal cutting-plane subproblem
//!
//! ```text
//!     min_z  max_i { <g_i, z> + b_i } + (mu/2) |z - x|^2
//! ```
//!
//! solved through its dual over the unit simplex,
//!
//! ```text
//!     min_{lambda in simplex}  (1/(2 mu)) |G lambda|^2 - sum_i lambda_i l_i,   l_i = <g_i, x> + b_i,
//! ```
//!
//! with `z = x - G lambda / mu`. The dual is handled by an active-set method in
//! the spirit of Wolfe's minimum-norm-point algorithm: the support set `S`
//! ("corral") is kept affinely independent in the augmented vectors
//! `(g_i / sqrt(mu), 1)`, so that the equality-constrained minimizer on `S` is
//! unique. On the simplex `sum lambda = 1`, so adding `(sum lambda)^2 / 2` to
//! the objective changes nothing, and the reduced Hessian becomes `M_S^T M_S`
//! with `M_S` the matrix of augmented columns. A Gram-Schmidt QR of `M_S` gives
//! both the solves and the dependence test.
//!
//! The duality gap `sum_i lambda_i (model(z) - l_i(z))` is the optimality
//! certificate reported as `kkt_residual`.

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy, dist_sq, dot, norm};

/// Relative threshold below which a new augmented column is treated as lying
/// in the span of the current corral.
const DEPENDENCE_TOL: f64 = 1e-10;

/// Relative optimality target of the inner iterations.
const INTERNAL_TOL: f64 = 1e-13;

/// Contract tolerance on the returned certificate, relative to
/// `1 + |center| + |total_value|`, plus a rounding floor for badly scaled cuts.
pub const KKT_TOL: f64 = 1e-8;

/// Output of [`solve_prox_qp`].
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    /// Minimizer of the proximal subproblem.
    pub zstar: Vec<f64>,
    /// Model value at `zstar`.
    pub model_value: f64,
    /// `model_value + (mu/2)|zstar - center|^2`.
    pub total_value: f64,
    /// Simplex multipliers, one per bundle piece in `Bundle::iter` order.
    pub weights: Vec<f64>,
    /// `sum_i weights_i g_i`.
    pub aggregate_grad: Vec<f64>,
    /// Duality gap plus simplex infeasibility at the returned weights.
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Incremental QR factorization of the corral's augmented columns.
#[derive(Default)]
struct Factor {
    q: Vec<Vec<f64>>,
    // rcols[k][i] = R[i][k] for i <= k
    rcols: Vec<Vec<f64>>,
}

enum Append {
    Independent,
    /// Projection coefficients `Q^T col` of a column found to be dependent.
    Dependent(Vec<f64>),
}

impl Factor {
    fn len(&self) -> usize {
        self.q.len()
    }

    fn push(&mut self, col: &[f64]) -> Append {
        let k = self.len();
        let mut v = col.to_vec();
        let mut coeffs = vec![0.0; k];
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for (i, qi) in self.q.iter().enumerate() {
                let r = dot(qi, &v);
                coeffs[i] += r;
                axpy(-r, qi, &mut v);
            }
        }
        let rkk = norm(&v);
        if rkk <= DEPENDENCE_TOL * norm(col) {
            return Append::Dependent(coeffs);
        }
        v.iter_mut().for_each(|x| *x /= rkk);
        self.q.push(v);
        coeffs.push(rkk);
        self.rcols.push(coeffs);
        Append::Independent
    }

    /// Solves `R x = rhs`.
    fn solve_r(&self, rhs: &[f64]) -> Vec<f64> {
        let s = self.len();
        let mut x = vec![0.0; s];
        for k in (0..s).rev() {
            let mut acc = rhs[k];
            for j in k + 1..s {
                acc -= self.rcols[j][k] * x[j];
            }
            x[k] = acc / self.rcols[k][k];
        }
        x
    }

    /// Solves `R^T R x = rhs`.
    fn solve_normal(&self, rhs: &[f64]) -> Vec<f64> {
        let s = self.len();
        let mut y = vec![0.0; s];
        for k in 0..s {
            let col = &self.rcols[k];
            let mut acc = rhs[k];
            for i in 0..k {
                acc -= col[i] * y[i];
            }
            y[k] = acc / col[k];
        }
        self.solve_r(&y)
    }
}

struct Problem<'a> {
    grads: Vec<&'a [f64]>,
    consts: Vec<f64>,
    /// `l_i = <g_i, center> + b_i`
    lin: Vec<f64>,
    center: &'a [f64],
    mu: f64,
    sqrt_mu: f64,
}

impl<'a> Problem<'a> {
    fn column(&self, i: usize) -> Vec<f64> {
        let mut c: Vec<f64> = self.grads[i].iter().map(|g| g / self.sqrt_mu).collect();
        c.push(1.0);
        c
    }

    fn factor(&self, support: &[usize]) -> Option<Factor> {
        let mut f = Factor::default();
        for &i in support {
            if let Append::Dependent(_) = f.push(&self.column(i)) {
                return None;
            }
        }
        Some(f)
    }

    /// Minimizer of the dual restricted to the affine hull of `support`.
    fn affine_min(&self, f: &Factor, support: &[usize]) -> Vec<f64> {
        let l: Vec<f64> = support.iter().map(|&i| self.lin[i]).collect();
        let a = f.solve_normal(&l);
        let b = f.solve_normal(&vec![1.0; support.len()]);
        let nu = (a.iter().sum::<f64>() - 1.0) / b.iter().sum::<f64>();
        a.iter().zip(&b).map(|(ai, bi)| ai - nu * bi).collect()
    }

    fn aggregate(&self, support: &[usize], lam: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.center.len()];
        for (&i, &w) in support.iter().zip(lam) {
            axpy(w, self.grads[i], &mut g);
        }
        g
    }

    fn primal(&self, agg: &[f64]) -> Vec<f64> {
        self.center
            .iter()
            .zip(agg)
            .map(|(c, g)| c - g / self.mu)
            .collect()
    }

    fn piece_values(&self, z: &[f64]) -> Vec<f64> {
        self.grads
            .iter()
            .zip(&self.consts)
            .map(|(g, b)| dot(g, z) + b)
            .collect()
    }
}

fn validate(bundle: &Bundle, center: &[f64], mu: f64) -> Result<()> {
    if bundle.is_empty() {
        return Err(Error::EmptyBundle);
    }
    if center.len() != bundle.dimension() {
        return Err(Error::DimensionMismatch {
            expected: bundle.dimension(),
            got: center.len(),
        });
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Config(format!(
            "mu must be positive and finite, got {mu}"
        )));
    }
    if !all_finite(center) {
        return Err(Error::NonFinite("QP center"));
    }
    if bundle
        .iter()
        .any(|c| !all_finite(c.subgrad()) || !c.const_term().is_finite())
    {
        return Err(Error::NonFinite("cut data"));
    }
    Ok(())
}

fn problem<'a>(bundle: &'a Bundle, center: &'a [f64], mu: f64) -> Problem<'a> {
    let grads: Vec<&[f64]> = bundle.iter().map(|c| c.subgrad()).collect();
    let consts: Vec<f64> = bundle.iter().map(|c| c.const_term()).collect();
    let lin = grads
        .iter()
        .zip(&consts)
        .map(|(g, b)| dot(g, center) + b)
        .collect();
    Problem {
        grads,
        consts,
        lin,
        center,
        mu,
        sqrt_mu: mu.sqrt(),
    }
}

/// Removes the `forced` slot and any slot whose weight dropped to numerical
/// zero, then renormalizes the rest onto the simplex.
fn prune(support: &mut Vec<usize>, lam: &mut Vec<f64>, forced: Option<usize>) {
    let mut k = 0;
    support.retain(|_| {
        let keep = lam[k] > 1e-15 && Some(k) != forced;
        k += 1;
        keep
    });
    let mut k = 0;
    let forced_ok = |k: usize, w: f64| w > 1e-15 && Some(k) != forced;
    lam.retain(|&w| {
        let keep = forced_ok(k, w);
        k += 1;
        keep
    });
    let s: f64 = lam.iter().sum();
    lam.iter_mut().for_each(|w| *w /= s);
}

/// Solves the proximal cutting-plane subproblem centered at `center`.
///
/// `warm_weights`, when given, must be aligned with `bundle.iter()`; its
/// support seeds the active set.
pub fn solve_prox_qp(
    bundle: &Bundle,
    center: &[f64],
    mu: f64,
    warm_weights: Option<&[f64]>,
) -> Result<QpSolution> {
    validate(bundle, center, mu)?;
    let p = problem(bundle, center, mu);
    let m = p.grads.len();
    let cap = 100 * m.max(1);

    // Starting corral: the warm support when usable, otherwise the best vertex.
    let mut support: Vec<usize> = Vec::new();
    let mut lam: Vec<f64> = Vec::new();
    if let Some(w) = warm_weights.filter(|w| w.len() == m && all_finite(w)) {
        for (i, &wi) in w.iter().enumerate() {
            if wi > 0.0 {
                support.push(i);
                lam.push(wi);
            }
        }
        let s: f64 = lam.iter().sum();
        if s > 0.0 && p.factor(&support).is_some() {
            lam.iter_mut().for_each(|x| *x /= s);
        } else {
            support.clear();
            lam.clear();
        }
    }
    if support.is_empty() {
        let best = (0..m)
            .min_by(|&a, &b| {
                let va = dot(p.grads[a], p.grads[a]) / (2.0 * mu) - p.lin[a];
                let vb = dot(p.grads[b], p.grads[b]) / (2.0 * mu) - p.lin[b];
                va.total_cmp(&vb)
            })
            .expect("bundle is nonempty");
        support.push(best);
        lam.push(1.0);
    }

    let mut iterations = 0;
    let mut fresh: Option<usize> = None;
    'outer: loop {
        // Minor cycle: move to the affine minimizer of the corral, dropping
        // pieces whose weight would turn negative.
        loop {
            iterations += 1;
            if iterations > cap {
                break 'outer;
            }
            let Some(f) = p.factor(&support) else {
                // numerically dependent corral; keep the current iterate
                break;
            };
            let target = p.affine_min(&f, &support);
            if target.iter().all(|&t| t > 0.0) {
                lam = target;
                break;
            }
            let mut theta = 1.0;
            let mut blocking = 0;
            for (k, (&cur, &t)) in lam.iter().zip(&target).enumerate() {
                if t <= 0.0 {
                    let r = cur / (cur - t);
                    if r < theta {
                        theta = r;
                        blocking = k;
                    }
                }
            }
            if theta <= 0.0 && fresh == Some(support[blocking]) {
                // the piece just added cannot enter: the gap is at noise level
                prune(&mut support, &mut lam, Some(blocking));
                break 'outer;
            }
            for (cur, &t) in lam.iter_mut().zip(&target) {
                *cur += theta * (t - *cur);
            }
            prune(&mut support, &mut lam, Some(blocking));
        }
        fresh = None;

        // Major cycle: look for the most violated piece.
        iterations += 1;
        if iterations > cap {
            break;
        }
        let agg = p.aggregate(&support, &lam);
        let z = p.primal(&agg);
        let values = p.piece_values(&z);
        let w: f64 = support.iter().zip(&lam).map(|(&i, &l)| l * values[i]).sum();
        let (jmax, vmax) =
            values
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                );
        let scale = 1.0 + w.abs() + norm(&agg) * norm(&z);
        if vmax - w <= INTERNAL_TOL * scale || support.contains(&jmax) {
            break;
        }

        let Some(mut f) = p.factor(&support) else {
            break;
        };
        match f.push(&p.column(jmax)) {
            Append::Independent => {
                support.push(jmax);
                lam.push(0.0);
                fresh = Some(jmax);
            }
            Append::Dependent(coeffs) => {
                // M_S u = -m_j has an exact solution: moving along (u, 1) leaves
                // G lambda unchanged and lowers the dual linearly. Step until a
                // corral weight hits zero and swap that piece for j.
                let u: Vec<f64> = f.solve_r(&coeffs).iter().map(|x| -x).collect();
                let mut theta = f64::INFINITY;
                let mut blocking = None;
                for (k, (&cur, &uk)) in lam.iter().zip(&u).enumerate() {
                    if uk < 0.0 {
                        let r = cur / -uk;
                        if r < theta {
                            theta = r;
                            blocking = Some(k);
                        }
                    }
                }
                let Some(blocking) = blocking else {
                    break;
                };
                for (cur, &uk) in lam.iter_mut().zip(&u) {
                    *cur += theta * uk;
                }
                lam[blocking] = 0.0;
                support.push(jmax);
                lam.push(theta);
                prune(&mut support, &mut lam, Some(blocking));
            }
        }
    }

    let mut weights = vec![0.0; m];
    for (&i, &l) in support.iter().zip(&lam) {
        weights[i] = l;
    }
    let aggregate_grad = p.aggregate(&support, &lam);
    let zstar = p.primal(&aggregate_grad);
    let model_value = bundle.evaluate_model(&zstar)?;
    let total_value = model_value + 0.5 * mu * dist_sq(&zstar, center);
    let values = p.piece_values(&zstar);
    let gap: f64 = weights
        .iter()
        .zip(&values)
        .map(|(w, v)| w * (model_value - v))
        .sum();
    let simplex = (weights.iter().sum::<f64>() - 1.0).abs();
    let kkt_residual = gap.max(0.0) + simplex;
    let tolerance = KKT_TOL * (1.0 + norm(center) + total_value.abs())
        + rounding_floor(&p, &weights, &zstar, &values, model_value);

    let solution = QpSolution {
        zstar,
        model_value,
        total_value,
        weights,
        aggregate_grad,
        kkt_residual,
        iterations,
    };
    if !(kkt_residual <= tolerance) {
        return Err(Error::QpNotConverged {
            iterations,
            residual: kkt_residual,
            tolerance,
            best: Box::new(solution),
        });
    }
    Ok(solution)
}

/// Rounding error in evaluating the pieces that determine the certificate.
///
/// A cut `<g, z> + b` with large `|b|` and `|g||z|` loses absolute accuracy to
/// cancellation; the certificate cannot be more accurate than that. The term
/// vanishes in relative terms for well-scaled bundles.
fn rounding_floor(p: &Problem<'_>, weights: &[f64], z: &[f64], values: &[f64], model: f64) -> f64 {
    let reach = 1e-6 * (1.0 + model.abs());
    let worst = (0..weights.len())
        .filter(|&i| weights[i] > 0.0 || values[i] >= model - reach)
        .map(|i| {
            p.consts[i].abs()
                + p.grads[i]
                    .iter()
                    .zip(z)
                    .map(|(g, zj)| (g * zj).abs())
                    .sum::<f64>()
        })
        .fold(0.0, f64::max);
    64.0 * f64::EPSILON * worst
}

/// Dual objective `(1/(2 mu)) |sum w_i g_i|^2 - sum w_i (<g_i, center> + b_i)`.
///
/// At the optimal weights its negative equals the optimal `total_value`; for
/// any feasible weights the negative is a lower bound on it.
pub fn dual_objective(bundle: &Bundle, center: &[f64], mu: f64, weights: &[f64]) -> Result<f64> {
    validate(bundle, center, mu)?;
    if weights.len() != bundle.len() {
        return Err(Error::DimensionMismatch {
            expected: bundle.len(),
            got: weights.len(),
        });
    }
    let violation = weights
        .iter()
        .map(|w| (-w).max(0.0))
        .fold((weights.iter().sum::<f64>() - 1.0).abs(), f64::max);
    if !(violation <= 1e-10) {
        return Err(Error::NotInSimplex { violation });
    }
    let p = problem(bundle, center, mu);
    let support: Vec<usize> = (0..weights.len()).collect();
    let agg = p.aggregate(&support, weights);
    let lin: f64 = weights.iter().zip(&p.lin).map(|(w, l)| w * l).sum();
    Ok(dot(&agg, &agg) / (2.0 * mu) - lin)
}
