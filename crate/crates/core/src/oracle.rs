//! First-order oracles: a convex objective returning a value and one subgradient,
//! plus a counting wrapper that tracks oracle calls and the best value seen.

use crate::error::{Error, Result};
use crate::linalg::all_finite;

/// A convex function with a first-order oracle.
///
/// `evaluate` must be deterministic and free of side effects: it writes one
/// element of the subdifferential at `x` into `grad` and returns `f(x)`.
pub trait Objective: Send + Sync {
    fn dimension(&self) -> usize;

    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Adapts a closure `|x, grad| -> f` into an [`Objective`].
pub struct FnObjective<F> {
    dimension: usize,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Send + Sync,
{
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Send + Sync,
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(x, grad)
    }
}

/// One oracle answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub fvalue: f64,
    pub subgrad: Vec<f64>,
}

/// Counting wrapper around an [`Objective`].
///
/// Every call goes through [`Oracle::call`], which validates the input and the
/// answer, bumps the call counter and keeps the best value seen so far.
pub struct Oracle<'a> {
    objective: &'a dyn Objective,
    calls: usize,
    best: Option<(f64, Vec<f64>)>,
}

impl<'a> Oracle<'a> {
    pub fn new(objective: &'a dyn Objective) -> Self {
        Self {
            objective,
            calls: 0,
            best: None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.objective.dimension()
    }

    pub fn call(&mut self, x: &[f64]) -> Result<Evaluation> {
        let n = self.dimension();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        if !all_finite(x) {
            return Err(Error::NonFinite("oracle input"));
        }
        let mut subgrad = vec![0.0; n];
        let fvalue = self.objective.evaluate(x, &mut subgrad);
        self.calls += 1;
        if !fvalue.is_finite() || !all_finite(&subgrad) {
            return Err(Error::NonFinite("oracle output"));
        }
        if self.best.as_ref().is_none_or(|(b, _)| fvalue < *b) {
            self.best = Some((fvalue, x.to_vec()));
        }
        Ok(Evaluation { fvalue, subgrad })
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn best_value(&self) -> Option<f64> {
        self.best.as_ref().map(|(f, _)| *f)
    }

    pub fn best_point(&self) -> Option<&[f64]> {
        self.best.as_ref().map(|(_, x)| x.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs1() -> FnObjective<impl Fn(&[f64], &mut [f64]) -> f64 + Send + Sync> {
        FnObjective::new(1, |x: &[f64], g: &mut [f64]| {
            g[0] = x[0].signum() * (x[0] != 0.0) as u8 as f64;
            x[0].abs()
        })
    }

    #[test]
    fn counts_and_tracks_best() {
        let f = abs1();
        let mut oracle = Oracle::new(&f);
        oracle.call(&[3.0]).unwrap();
        oracle.call(&[-1.0]).unwrap();
        oracle.call(&[2.0]).unwrap();
        assert_eq!(oracle.calls(), 3);
        assert_eq!(oracle.best_value(), Some(1.0));
        assert_eq!(oracle.best_point(), Some(&[-1.0][..]));
    }

    #[test]
    fn rejects_bad_input() {
        let f = abs1();
        let mut oracle = Oracle::new(&f);
        assert!(matches!(
            oracle.call(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(oracle.call(&[f64::NAN]), Err(Error::NonFinite(_))));
        assert_eq!(oracle.calls(), 0);
    }

    #[test]
    fn rejects_non_finite_answer() {
        let f = FnObjective::new(1, |_: &[f64], _: &mut [f64]| f64::INFINITY);
        let mut oracle = Oracle::new(&f);
        assert!(matches!(oracle.call(&[0.0]), Err(Error::NonFinite(_))));
    }
}
