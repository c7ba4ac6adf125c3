//! Inner-loop tolerance policies.
//!
//! Each outer step asks its [`EpsSchedule`] for an [`InnerTest`], the
//! acceptance rule the proximal-point oracle applies to a trial point.

use serde::Serialize;

use crate::accel::NesterovSequence;
use crate::error::{Error, Result};

/// Tolerance sequence feeding the inner loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsSchedule {
    /// `eps_k = eps` for every step.
    Constant { eps: f64 },
    /// `eps_k = e0 / lambda_k`; keeps the accumulated error equal to `e0`.
    Decay { e0: f64 },
    /// Classical serious-step test with parameter `sigma`:
    /// accept `z` when `f(z) <= f(x) - sigma (f(x) - model(z))`.
    ///
    /// `floor` is an absolute gap below which a trial point is accepted even
    /// if the descent test fails; `None` means `1e-12 (1 + |f(x)|)`.
    Descent { sigma: f64, floor: Option<f64> },
    /// User-supplied tolerances; the last entry repeats past the end.
    Table { values: Vec<f64> },
}

impl EpsSchedule {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{what} must be positive and finite, got {v}"
                )))
            }
        };
        match self {
            EpsSchedule::Constant { eps } => positive(*eps, "eps"),
            EpsSchedule::Decay { e0 } => positive(*e0, "e0"),
            EpsSchedule::Descent { sigma, floor } => {
                if !(*sigma > 0.0 && *sigma < 1.0) {
                    return Err(Error::Config(format!(
                        "sigma must lie in (0, 1), got {sigma}"
                    )));
                }
                floor.map_or(Ok(()), |f| positive(f, "eps floor"))
            }
            EpsSchedule::Table { values } => {
                if values.is_empty() {
                    return Err(Error::Config("tolerance table is empty".into()));
                }
                values
                    .iter()
                    .try_for_each(|&v| positive(v, "tolerance table entry"))
            }
        }
    }

    /// Acceptance rule for outer step `k`.
    pub fn next_eps(&self, k: usize, lambdas: &mut NesterovSequence) -> InnerTest {
        match self {
            EpsSchedule::Constant { eps } => InnerTest::Tolerance(*eps),
            EpsSchedule::Decay { e0 } => InnerTest::Tolerance(e0 / lambdas.lambda(k)),
            EpsSchedule::Descent { sigma, floor } => InnerTest::Descent {
                sigma: *sigma,
                floor: *floor,
            },
            EpsSchedule::Table { values } => InnerTest::Tolerance(values[k.min(values.len() - 1)]),
        }
    }

    /// Short label used in reports, e.g. `decay(0.1)`.
    pub fn label(&self) -> String {
        match self {
            EpsSchedule::Constant { eps } => format!("const({eps})"),
            EpsSchedule::Decay { e0 } => format!("decay({e0})"),
            EpsSchedule::Descent { sigma, .. } => format!("descent({sigma})"),
            EpsSchedule::Table { values } => format!("table({})", values.len()),
        }
    }
}

/// Why a trial point was accepted as the approximate proximal point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    /// `f(z) - model(z) <= eps`.
    Tolerance,
    /// Serious-step descent test.
    Descent,
    /// Descent mode fell back on its gap floor.
    Floor,
    /// A (near-)zero subgradient was found; the point is optimal.
    ExactHit,
}

/// Inner-loop acceptance rule for one outer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerTest {
    Tolerance(f64),
    Descent { sigma: f64, floor: Option<f64> },
}

impl InnerTest {
    /// Decides on a trial point `z` given `f(x)` at the prox center, `f(z)`
    /// and the model value at `z`. On acceptance, returns the reason and the
    /// tolerance `eps` for which `f(z) - model(z) <= eps` is guaranteed.
    pub fn check(
        &self,
        f_center: f64,
        f_trial: f64,
        model_trial: f64,
    ) -> Option<(Acceptance, f64)> {
        let gap = f_trial - model_trial;
        match *self {
            InnerTest::Tolerance(eps) => (gap <= eps).then_some((Acceptance::Tolerance, eps)),
            InnerTest::Descent { sigma, floor } => {
                let decrease = f_center - model_trial;
                if f_trial <= f_center - sigma * decrease {
                    Some((Acceptance::Descent, (1.0 - sigma) * decrease))
                } else {
                    let floor = floor.unwrap_or(1e-12 * (1.0 + f_center.abs()));
                    (gap <= floor).then_some((Acceptance::Floor, floor))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_values() {
        let mut l = NesterovSequence::new();
        let s = EpsSchedule::Decay { e0: 0.1 };
        assert_eq!(s.next_eps(0, &mut l), InnerTest::Tolerance(0.1));
        let InnerTest::Tolerance(e1) = s.next_eps(1, &mut l) else {
            panic!()
        };
        assert!((e1 - 0.1 / 1.618_033_988_749_895).abs() < 1e-15);
        assert!((e1 - 0.061_803_4).abs() < 1e-7);
    }

    #[test]
    fn decay_is_strictly_decreasing_and_bounded() {
        let mut l = NesterovSequence::new();
        let s = EpsSchedule::Decay { e0: 1.0 };
        let mut prev = f64::INFINITY;
        for k in 0..=10_000 {
            let InnerTest::Tolerance(e) = s.next_eps(k, &mut l) else {
                panic!()
            };
            assert!(e < prev);
            assert!(e <= 2.0 / (k as f64 + 2.0) * (1.0 + 1e-14));
            prev = e;
        }
    }

    #[test]
    fn descent_acceptance() {
        let t = InnerTest::Descent {
            sigma: 0.5,
            floor: None,
        };
        // 0.55 <= 1 - 0.5 * 0.8 = 0.6
        let (why, eps) = t.check(1.0, 0.55, 0.2).unwrap();
        assert_eq!(why, Acceptance::Descent);
        assert!((eps - 0.4).abs() < 1e-15);
        assert!(t.check(1.0, 0.65, 0.2).is_none());
        // stalled at the optimum: descent impossible, floor accepts
        let (why, _) = t.check(1.0, 1.0 + 1e-14, 1.0).unwrap();
        assert_eq!(why, Acceptance::Floor);
    }

    #[test]
    fn sigma_out_of_range() {
        for sigma in [0.0, 1.0, -0.3, 1.5] {
            let s = EpsSchedule::Descent { sigma, floor: None };
            assert!(matches!(s.validate(), Err(Error::Config(_))));
        }
        assert!(EpsSchedule::Descent {
            sigma: 0.5,
            floor: None
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn table_repeats_last_entry() {
        let mut l = NesterovSequence::new();
        let s = EpsSchedule::Table {
            values: vec![0.5, 0.25],
        };
        assert_eq!(s.next_eps(0, &mut l), InnerTest::Tolerance(0.5));
        assert_eq!(s.next_eps(7, &mut l), InnerTest::Tolerance(0.25));
        assert!(EpsSchedule::Table { values: vec![] }.validate().is_err());
    }
}
