//! Benchmark matrices over problems x algorithms x tolerance schedules.
//!
//! Cells are independent and run on a rayon pool; results come back in matrix
//! order whatever the completion order, so reports and exports are
//! deterministic. The pool size defaults to the `NSBUNDLE_THREADS`
//! environment variable when set.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::accel::{run, DriverConfig, MuSchedule, StopRules, Variant, WarmStart};
use crate::appo::AppoOptions;
use crate::diagnostics::{bound_radius, monitor_bound, BoundReport};
use crate::error::{Error, Result};
use crate::problems::{get_problem, list_problems, ProblemInstance};
use crate::schedules::EpsSchedule;
use crate::trace::{fmt_real, write_file, RunTrace};

/// Output format for [`Report::write`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    Csv,
    Json,
    #[default]
    Table,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "table" => Ok(Format::Table),
            _ => Err(Error::Config(format!("unknown format `{s}`"))),
        }
    }
}

/// A benchmark matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Problem names or indices; `"all"` expands to the whole registry.
    pub problems: Vec<String>,
    pub variants: Vec<Variant>,
    pub schedules: Vec<EpsSchedule>,
    pub mu: MuSchedule,
    pub ftol: f64,
    pub max_outer: usize,
    pub warm: WarmStart,
    pub capacity: Option<usize>,
    pub appo: AppoOptions,
    pub probe_eta: Option<f64>,
    pub zero_momentum: bool,
    /// Abort on the first failing cell instead of reporting it.
    pub strict: bool,
    /// Worker threads; `None` reads `NSBUNDLE_THREADS`, then uses rayon's default.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problems: vec!["all".into()],
            variants: vec![Variant::Fpba1],
            schedules: vec![EpsSchedule::Decay { e0: 0.1 }],
            mu: MuSchedule::default(),
            ftol: 1e-6,
            max_outer: 250,
            warm: WarmStart::default(),
            capacity: None,
            appo: AppoOptions::default(),
            probe_eta: None,
            zero_momentum: false,
            strict: false,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.problems.is_empty() {
            return Err(Error::Config("no problems selected".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if self.schedules.is_empty() {
            return Err(Error::Config("no tolerance schedules selected".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        self.driver(Variant::Fpba1, &self.schedules[0], None)
            .validate()?;
        self.schedules.iter().try_for_each(EpsSchedule::validate)
    }

    /// Resolves the problem list, expanding `all` and dropping duplicates.
    pub fn resolve_problems(&self) -> Result<Vec<ProblemInstance>> {
        let mut out: Vec<ProblemInstance> = Vec::new();
        for key in &self.problems {
            let batch = if key.eq_ignore_ascii_case("all") {
                list_problems()
                    .iter()
                    .map(|n| get_problem(n))
                    .collect::<Result<Vec<_>>>()?
            } else {
                vec![get_problem(key)?]
            };
            for p in batch {
                if !out.iter().any(|q| q.index == p.index) {
                    out.push(p);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Config("no problems selected".into()));
        }
        Ok(out)
    }

    /// Driver configuration of one cell.
    pub fn driver(&self, variant: Variant, eps: &EpsSchedule, fstar: Option<f64>) -> DriverConfig {
        DriverConfig {
            variant,
            mu: self.mu.clone(),
            eps: eps.clone(),
            stop: StopRules {
                fstar,
                ftol: self.ftol,
                probe_eta: self.probe_eta,
                max_outer: self.max_outer,
            },
            warm: self.warm,
            capacity: self.capacity,
            appo: self.appo.clone(),
            zero_momentum: self.zero_momentum,
            lambdas: None,
        }
    }

    fn thread_count(&self) -> Result<Option<usize>> {
        if let Some(t) = self.threads {
            return Ok(Some(t));
        }
        match std::env::var("NSBUNDLE_THREADS") {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(Error::Config(format!(
                    "NSBUNDLE_THREADS must be a positive integer, got `{v}`"
                ))),
            },
            Err(_) => Ok(None),
        }
    }
}

/// Outcome of one (problem, algorithm, schedule) cell.
#[derive(Debug)]
pub struct CellResult {
    pub problem: String,
    pub problem_index: usize,
    pub variant: Variant,
    pub schedule: EpsSchedule,
    /// Complete trace, or the partial trace of a failed run.
    pub trace: Option<RunTrace>,
    pub error: Option<Error>,
    /// Complexity-bound check, for accelerated variants.
    pub bound: Option<BoundReport>,
}

impl CellResult {
    pub fn converged(&self) -> bool {
        self.error.is_none() && self.trace.as_ref().is_some_and(|t| t.summary.converged)
    }

    /// Base name of this cell's export files.
    pub fn file_stem(&self) -> String {
        let sched: String = self
            .schedule
            .label()
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        format!(
            "{:02}_{}_{}_{}",
            self.problem_index,
            self.problem.replace('-', ""),
            self.variant.label(),
            sched.trim_matches('_')
        )
    }
}

/// All cells of a matrix, in matrix order (problem, then algorithm, then schedule).
#[derive(Debug)]
pub struct Report {
    pub cells: Vec<CellResult>,
}

fn run_cell(
    cfg: &RunConfig,
    p: &ProblemInstance,
    variant: Variant,
    eps: &EpsSchedule,
) -> CellResult {
    let driver = cfg.driver(variant, eps, Some(p.fstar));
    let (mut trace, error) = match run(p, &p.x0, &driver) {
        Ok(t) => (Some(t), None),
        Err(Error::Run {
            step,
            source,
            partial,
        }) => (
            Some((*partial).clone()),
            Some(Error::Run {
                step,
                source,
                partial,
            }),
        ),
        Err(e) => (None, Some(e)),
    };
    if let Some(t) = trace.as_mut() {
        t.summary.problem = Some(p.name.to_string());
    }
    let bound = match (&trace, variant) {
        (Some(t), Variant::Fpba1 | Variant::Fpba2) => {
            let (r, advisory) = bound_radius(&p.x0, p.xstar.as_deref(), t);
            monitor_bound(t, variant, cfg.mu.mu(0), r, p.fstar, advisory).ok()
        }
        _ => None,
    };
    CellResult {
        problem: p.name.to_string(),
        problem_index: p.index,
        variant,
        schedule: eps.clone(),
        trace,
        error,
        bound,
    }
}

/// Runs every cell of the matrix.
///
/// Failing cells are reported in place unless `strict` is set, in which case
/// the first failure in matrix order is returned as the error.
pub fn run_benchmark(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let problems = cfg.resolve_problems()?;
    let mut jobs = Vec::new();
    for p in &problems {
        for &v in &cfg.variants {
            for s in &cfg.schedules {
                jobs.push((p, v, s));
            }
        }
    }
    let exec = || -> Vec<CellResult> {
        jobs.par_iter()
            .map(|(p, v, s)| run_cell(cfg, p, *v, s))
            .collect()
    };
    let cells = match cfg.thread_count()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(exec),
        None => exec(),
    };
    let mut report = Report { cells };
    if cfg.strict {
        if let Some(i) = report.cells.iter().position(|c| c.error.is_some()) {
            return Err(report.cells.swap_remove(i).error.expect("checked above"));
        }
    }
    Ok(report)
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    pb: usize,
    name: &'a str,
    algo: &'a str,
    schedule: String,
    k: Option<usize>,
    fg: Option<usize>,
    f_gap: Option<String>,
    stop: &'a str,
    converged: bool,
    bound_violations: Option<usize>,
    error: Option<String>,
}

impl Report {
    pub fn all_converged(&self) -> bool {
        self.cells.iter().all(CellResult::converged)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| !c.converged())
    }

    fn rows(&self) -> Vec<SummaryRow<'_>> {
        self.cells
            .iter()
            .map(|c| {
                let s = c.trace.as_ref().map(|t| &t.summary);
                SummaryRow {
                    pb: c.problem_index,
                    name: &c.problem,
                    algo: c.variant.label(),
                    schedule: c.schedule.label(),
                    k: s.map(|s| s.iterations),
                    fg: s.map(|s| s.oracle_calls),
                    f_gap: s.and_then(|s| s.f_gap).map(fmt_real),
                    stop: s.map_or("error", |s| s.stop_reason.label()),
                    converged: c.converged(),
                    bound_violations: c
                        .bound
                        .as_ref()
                        .filter(|b| !b.advisory)
                        .map(|b| b.violations),
                    error: c.error.as_ref().map(|e| e.to_string()),
                }
            })
            .collect()
    }

    /// Human-readable table: Pb, name, algorithm, schedule, #k, #fg, f-f*, stop.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:>3}  {:<13} {:<6} {:<16} {:>5} {:>6} {:>10}  stop",
            "Pb", "Name", "Algo", "Schedule", "#k", "#fg", "f-f*"
        )
        .unwrap();
        for c in &self.cells {
            let (k, fg, gap, stop) = match c.trace.as_ref().map(|t| &t.summary) {
                Some(s) => (
                    s.iterations.to_string(),
                    s.oracle_calls.to_string(),
                    s.f_gap.map_or("-".into(), |g| format!("{g:.2E}")),
                    s.stop_reason.label(),
                ),
                None => ("-".into(), "-".into(), "-".into(), "error"),
            };
            writeln!(
                out,
                "{:>3}  {:<13} {:<6} {:<16} {:>5} {:>6} {:>10}  {}",
                c.problem_index,
                c.problem,
                c.variant.label(),
                c.schedule.label(),
                k,
                fg,
                gap,
                stop
            )
            .unwrap();
        }
        for c in &self.cells {
            if let Some(e) = &c.error {
                writeln!(
                    out,
                    "error in {} / {} / {}: {e}",
                    c.problem,
                    c.variant,
                    c.schedule.label()
                )
                .unwrap();
            }
        }
        out
    }

    /// Summary CSV without timings, so identical runs give identical bytes.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("pb,name,algo,schedule,k,fg,f_gap,stop,converged\n");
        for r in self.rows() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.pb,
                r.name,
                r.algo,
                r.schedule,
                r.k.map_or(String::new(), |v| v.to_string()),
                r.fg.map_or(String::new(), |v| v.to_string()),
                r.f_gap.unwrap_or_default(),
                r.stop,
                r.converged
            )
            .unwrap();
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&self.rows()).expect("summary serialization cannot fail");
        s.push('\n');
        s
    }

    /// Writes one trace file per cell plus a summary into `dir`.
    pub fn write(&self, dir: &Path, format: Format) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
        match format {
            Format::Csv => {
                for c in &self.cells {
                    if let Some(t) = &c.trace {
                        t.export_csv(&dir.join(format!("{}.csv", c.file_stem())))?;
                    }
                }
                write_file(&dir.join("summary.csv"), &self.summary_csv())
            }
            Format::Json => {
                for c in &self.cells {
                    if let Some(t) = &c.trace {
                        t.export_json(&dir.join(format!("{}.json", c.file_stem())))?;
                    }
                }
                write_file(&dir.join("summary.json"), &self.summary_json())
            }
            Format::Table => write_file(&dir.join("summary.txt"), &self.render_table()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::StopReason;

    fn small() -> RunConfig {
        RunConfig {
            problems: vec!["DEM".into(), "3".into(), "LQ".into()],
            variants: vec![Variant::Fpba1, Variant::Fpba2],
            threads: Some(2),
            ..Default::default()
        }
    }

    #[test]
    fn matrix_order_and_dedup() {
        let report = run_benchmark(&small()).unwrap();
        let keys: Vec<(&str, Variant)> = report
            .cells
            .iter()
            .map(|c| (c.problem.as_str(), c.variant))
            .collect();
        assert_eq!(
            keys,
            [
                ("DEM", Variant::Fpba1),
                ("DEM", Variant::Fpba2),
                ("LQ", Variant::Fpba1),
                ("LQ", Variant::Fpba2)
            ]
        );
        assert!(report.all_converged());
    }

    #[test]
    fn empty_problem_list_is_rejected() {
        let cfg = RunConfig {
            problems: vec![],
            ..Default::default()
        };
        assert!(matches!(run_benchmark(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_problem_is_rejected() {
        let cfg = RunConfig {
            problems: vec!["Wolfe".into()],
            ..Default::default()
        };
        assert!(matches!(run_benchmark(&cfg), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn summaries_are_deterministic() {
        let a = run_benchmark(&small()).unwrap();
        let b = run_benchmark(&RunConfig {
            threads: Some(1),
            ..small()
        })
        .unwrap();
        assert_eq!(a.summary_csv(), b.summary_csv());
        assert!(a.render_table().starts_with(" Pb"));
    }

    #[test]
    fn failing_cells_are_reported_or_abort_in_strict_mode() {
        let mut cfg = RunConfig {
            problems: vec!["Maxquad".into()],
            schedules: vec![EpsSchedule::Constant { eps: 1e-300 }],
            threads: Some(1),
            ..Default::default()
        };
        cfg.appo.inner_cap = 2;
        let report = run_benchmark(&cfg).unwrap();
        assert!(!report.all_converged());
        let cell = &report.cells[0];
        assert!(matches!(cell.error, Some(Error::Run { .. })));
        assert_eq!(
            cell.trace.as_ref().unwrap().summary.stop_reason,
            StopReason::Error
        );
        cfg.strict = true;
        assert!(matches!(run_benchmark(&cfg), Err(Error::Run { .. })));
    }

    #[test]
    fn file_stems() {
        let report = run_benchmark(&RunConfig {
            problems: vec!["Rosen-Suzuki".into()],
            max_outer: 1,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(
            report.cells[0].file_stem(),
            "08_RosenSuzuki_fpba1_decay_0.1"
        );
    }
}
