//! Proximal bundle methods for nonsmooth convex minimization, including
//! accelerated (fast-gradient) variants driven by inexact proximal points of
//! the Moreau–Yosida envelope.
//!
//! The pieces, bottom-up:
//!
//! - [`oracle`]: first-order oracles and call counting;
//! - [`bundle`]: cutting-plane models with optional aggregation;
//! - [`qp`]: the proximal QP over a bundle;
//! - [`appo`]: approximate proximal points with certified accuracy;
//! - [`schedules`]: inner-loop tolerance policies;
//! - [`accel`]: outer drivers (PPA, classical bundle, FPBA1, FPBA2);
//! - [`diagnostics`]: accumulated-error ledger and complexity bounds;
//! - [`problems`]: the academic test set;
//! - [`harness`]: benchmark matrices, reports and exports.
//!
//! ```
//! use nsbundle::{run, DriverConfig, EpsSchedule, Variant, get_problem};
//!
//! let p = get_problem("DEM").unwrap();
//! let mut cfg = DriverConfig::new(Variant::Fpba1, EpsSchedule::Decay { e0: 0.1 });
//! cfg.stop.fstar = Some(p.fstar);
//! let trace = run(&p, &p.x0, &cfg).unwrap();
//! assert!(trace.summary.converged);
//! ```

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod accel;
pub mod appo;
pub mod bundle;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod problems;
pub mod qp;
pub mod schedules;
pub mod trace;

pub use accel::{
    extrapolate, run, DriverConfig, MuSchedule, NesterovSequence, StopRules, Variant, WarmStart,
};
pub use appo::{approximate_prox, optimality_probe, AppoOptions, Audit, ProxResult};
pub use bundle::{Bundle, Cut};
pub use diagnostics::{bound_value, gap_estimate, required_steps, BoundReport, ErrorLedger};
pub use error::{Error, Result};
pub use harness::{run_benchmark, CellResult, Report, RunConfig};
pub use oracle::{Evaluation, FnObjective, Objective, Oracle};
pub use problems::{all_problems, get_problem, list_problems, ProblemInstance};
pub use qp::{dual_objective, solve_prox_qp, QpSolution};
pub use schedules::{Acceptance, EpsSchedule, InnerTest};
pub use trace::{RunSummary, RunTrace, StepRecord, StopReason};
