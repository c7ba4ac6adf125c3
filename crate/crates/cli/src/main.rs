use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nsbundle::harness::Format;
use nsbundle::{get_problem, list_problems, run_benchmark};

mod settings;

use settings::{Plan, Settings};

/// Runs proximal bundle solvers on the academic nonsmooth test set and
/// reports #k (outer steps), #fg (oracle calls) and f - f*.
///
/// Exits with 0 when every run reached the stopping tolerance, 1 when some
/// did not (or a run failed), 2 on usage errors.
#[derive(Parser, Debug)]
#[command(name = "nsbundle", version)]
struct Cli {
    /// Problems: `all`, names or indices 1-15, comma separated.
    #[arg(long)]
    problems: Option<String>,
    /// Algorithms: ppa, pba, fpba1, fpba2 (comma separated).
    #[arg(long)]
    algo: Option<String>,
    /// Proximal parameter (initial value when --mu-rho is given).
    #[arg(long)]
    mu: Option<f64>,
    /// Geometric decay factor of the proximal parameter, in (0, 1].
    #[arg(long)]
    mu_rho: Option<f64>,
    /// Tolerance schedules: const, decay, descent (comma separated).
    #[arg(long)]
    eps_kind: Option<String>,
    /// Initial (decay) or fixed (const) tolerances, comma separated.
    #[arg(long)]
    e0: Option<String>,
    /// Descent-test parameter in (0, 1).
    #[arg(long)]
    sigma: Option<f64>,
    /// Gap floor of the descent test.
    #[arg(long)]
    eps_floor: Option<f64>,
    /// Relative stopping tolerance on f_best - f*.
    #[arg(long)]
    ftol: Option<f64>,
    /// Maximum number of outer steps.
    #[arg(long)]
    max_k: Option<usize>,
    /// Bundle handling between steps: carry or reset.
    #[arg(long)]
    warm: Option<String>,
    /// Output directory for trace and summary files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv, json or table.
    #[arg(long)]
    format: Option<String>,
    /// Abort on the first failing run.
    #[arg(long)]
    strict: bool,
    /// Accepted for compatibility; every algorithm is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Stop when f(x^k) - model(y^{k+1}) <= eta.
    #[arg(long)]
    probe_eta: Option<f64>,
    /// Maximum bundle size (default unbounded).
    #[arg(long)]
    capacity: Option<usize>,
    /// Maximum QP solves per proximal point.
    #[arg(long)]
    inner_cap: Option<usize>,
    /// Worker threads (default: NSBUNDLE_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Settings file, JSON or `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the problem registry and exit.
    #[arg(long)]
    list_problems: bool,
}

impl Cli {
    fn settings(&self) -> Result<Settings, String> {
        let mut s = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        let text = [
            ("problems", self.problems.clone()),
            ("algo", self.algo.clone()),
            ("eps-kind", self.eps_kind.clone()),
            ("e0", self.e0.clone()),
            ("warm", self.warm.clone()),
            ("format", self.format.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        let numbers = [
            ("mu", self.mu.map(|v| v.to_string())),
            ("mu-rho", self.mu_rho.map(|v| v.to_string())),
            ("sigma", self.sigma.map(|v| v.to_string())),
            ("eps-floor", self.eps_floor.map(|v| v.to_string())),
            ("ftol", self.ftol.map(|v| v.to_string())),
            ("max-k", self.max_k.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("probe-eta", self.probe_eta.map(|v| v.to_string())),
            ("capacity", self.capacity.map(|v| v.to_string())),
            ("inner-cap", self.inner_cap.map(|v| v.to_string())),
            ("threads", self.threads.map(|v| v.to_string())),
        ];
        for (k, v) in text.into_iter().chain(numbers) {
            if let Some(v) = v {
                flags.set(k, v)?;
            }
        }
        if self.strict {
            flags.set("strict", "true")?;
        }
        s.merge(flags);
        Ok(s)
    }
}

fn print_registry() {
    println!("{:>3}  {:<13} {:>3}  {:>20}", "Pb", "Name", "n", "f*");
    for name in list_problems() {
        let p = get_problem(name).expect("registered problem");
        println!(
            "{:>3}  {:<13} {:>3}  {:>20}",
            p.index, p.name, p.dimension, p.fstar
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_problems {
        print_registry();
        return ExitCode::SUCCESS;
    }
    let plan = match cli.settings().and_then(|s| Plan::from_settings(&s)) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run_benchmark(&plan.config) {
        Ok(r) => r,
        Err(e @ nsbundle::Error::Config(_) | e @ nsbundle::Error::UnknownProblem(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    match plan.format {
        Format::Json if plan.out.is_none() => print!("{}", report.summary_json()),
        _ => print!("{}", report.render_table()),
    }
    if let Some(dir) = &plan.out {
        if let Err(e) = report.write(dir, plan.format) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }

    let failed = report.failures().count();
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failed} of {} runs did not converge", report.cells.len());
        ExitCode::from(1)
    }
}
