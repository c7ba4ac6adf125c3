//! Run traces and their CSV/JSON exports.
//!
//! Exports are bit-stable: fields come in a fixed order and every real is
//! written with 17 significant digits, so the same trace always produces the
//! same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::accel::Variant;
use crate::appo::Audit;
use crate::error::{Error, Result};
use crate::schedules::Acceptance;

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `f_best - f* <= ftol (1 + |f_best|)`.
    Ftol,
    /// A subgradient of (near-)zero norm was found.
    Gnorm,
    MaxOuter,
    /// The approximate-optimality probe fired.
    Probe,
    /// An inner solve failed; only partial traces carry this.
    Error,
}

impl StopReason {
    pub fn label(self) -> &'static str {
        match self {
            StopReason::Ftol => "ftol",
            StopReason::Gnorm => "gnorm",
            StopReason::MaxOuter => "max_outer",
            StopReason::Probe => "probe",
            StopReason::Error => "error",
        }
    }
}

impl FromStr for StopReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ftol" => StopReason::Ftol,
            "gnorm" => StopReason::Gnorm,
            "max_outer" => StopReason::MaxOuter,
            "probe" => StopReason::Probe,
            "error" => StopReason::Error,
            _ => return Err(Error::Config(format!("unknown stop reason `{s}`"))),
        })
    }
}

/// One outer step `k >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub y: Vec<f64>,
    pub f_y: f64,
    /// Best value over every oracle call so far.
    pub f_best: f64,
    /// Tolerance certified by the inner loop at this step.
    pub eps_k: f64,
    /// Cumulative oracle calls.
    pub fg_cum: usize,
    /// Accumulated error after this step.
    pub vartheta: f64,
    pub inner_iters: usize,
    pub acceptance: Acceptance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub problem: Option<String>,
    pub variant: Variant,
    pub schedule: String,
    pub mu: String,
    /// Number of outer steps.
    pub iterations: usize,
    pub oracle_calls: usize,
    pub f_best: f64,
    /// `f_best - f*` when `f*` is known.
    pub f_gap: Option<f64>,
    pub stop_reason: StopReason,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
    pub audit: Audit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
    /// Point achieving `f_best`.
    pub x_best: Vec<f64>,
    /// Last approximate solution.
    pub y_final: Vec<f64>,
}

/// Canonical text of a real: 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes an `f64` through [`fmt_real`]; non-finite values become `null`.
struct Real(f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(fmt_real(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Serialize)]
struct JsonRecord {
    k: usize,
    f_y: Real,
    f_best: Real,
    eps_k: Real,
    fg_cum: usize,
    vartheta: Real,
    inner_iters: usize,
    acceptance: Acceptance,
    y: Vec<Real>,
}

#[derive(Serialize)]
struct JsonSummary<'a> {
    problem: Option<&'a str>,
    variant: Variant,
    schedule: &'a str,
    mu: &'a str,
    iterations: usize,
    oracle_calls: usize,
    f_best: Real,
    f_gap: Option<Real>,
    stop_reason: StopReason,
    converged: bool,
    wall_time: Real,
    audit: &'a Audit,
}

#[derive(Serialize)]
struct JsonTrace<'a> {
    summary: JsonSummary<'a>,
    x_best: Vec<Real>,
    y_final: Vec<Real>,
    records: Vec<JsonRecord>,
}

fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(Real).collect()
}

impl RunTrace {
    /// CSV with header `k,f_y,f_best,eps_k,fg_cum,vartheta,stop`; the stop
    /// reason appears on the last row only.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,f_y,f_best,eps_k,fg_cum,vartheta,stop\n");
        let last = self.records.len().saturating_sub(1);
        for (i, r) in self.records.iter().enumerate() {
            let stop = if i == last {
                self.summary.stop_reason.label()
            } else {
                ""
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.k,
                fmt_real(r.f_y),
                fmt_real(r.f_best),
                fmt_real(r.eps_k),
                r.fg_cum,
                fmt_real(r.vartheta),
                stop
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn to_json(&self) -> String {
        let s = &self.summary;
        let doc = JsonTrace {
            summary: JsonSummary {
                problem: s.problem.as_deref(),
                variant: s.variant,
                schedule: &s.schedule,
                mu: &s.mu,
                iterations: s.iterations,
                oracle_calls: s.oracle_calls,
                f_best: Real(s.f_best),
                f_gap: s.f_gap.map(Real),
                stop_reason: s.stop_reason,
                converged: s.converged,
                wall_time: Real(s.wall_time),
                audit: &s.audit,
            },
            x_best: reals(&self.x_best),
            y_final: reals(&self.y_final),
            records: self
                .records
                .iter()
                .map(|r| JsonRecord {
                    k: r.k,
                    f_y: Real(r.f_y),
                    f_best: Real(r.f_best),
                    eps_k: Real(r.eps_k),
                    fg_cum: r.fg_cum,
                    vartheta: Real(r.vartheta),
                    inner_iters: r.inner_iters,
                    acceptance: r.acceptance,
                    y: reals(&r.y),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("trace serialization cannot fail");
        text.push('\n');
        text
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv())
    }

    pub fn export_json(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json())
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
