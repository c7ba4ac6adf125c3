use nsbundle::diagnostics::{bound_radius, monitor_bound};
use nsbundle::harness::Format;
use nsbundle::*;

fn config(variant: Variant, eps: EpsSchedule, fstar: Option<f64>) -> DriverConfig {
    let mut cfg = DriverConfig::new(variant, eps);
    cfg.stop.fstar = fstar;
    cfg
}

#[test]
fn reference_values_of_problems_without_closed_form_minimizer() {
    for name in ["CB2", "Shor", "Maxquad"] {
        let p = get_problem(name).unwrap();
        let mut cfg = config(
            Variant::ClassicPba,
            EpsSchedule::Constant { eps: 1e-10 },
            None,
        );
        cfg.stop.max_outer = 400;
        let t = run(&p, &p.x0, &cfg).unwrap();
        let f = t.summary.f_best;
        // the registered values carry six decimals
        assert!(
            (f - p.fstar).abs() <= 1e-6 * (1.0 + p.fstar.abs()),
            "{name}: {f} vs {}",
            p.fstar
        );
        assert!(f >= p.fstar - 1e-6, "{name}: {f} below the reference value");
    }
}

#[test]
fn descent_runs_never_increase_f_on_serious_steps() {
    for p in all_problems() {
        for variant in [Variant::ClassicPba, Variant::Fpba1, Variant::Fpba2] {
            let cfg = config(
                variant,
                EpsSchedule::Descent {
                    sigma: 0.5,
                    floor: None,
                },
                Some(p.fstar),
            );
            let t = run(&p, &p.x0, &cfg).unwrap();
            assert_eq!(t.summary.audit.descent, 0, "{} {variant}", p.name);
            assert_eq!(t.summary.audit.positive_diff, 0, "{} {variant}", p.name);
        }
    }
}

#[test]
fn traces_are_monotone() {
    for p in all_problems() {
        let cfg = config(
            Variant::Fpba2,
            EpsSchedule::Decay { e0: 1e-2 },
            Some(p.fstar),
        );
        let t = run(&p, &p.x0, &cfg).unwrap();
        for w in t.records.windows(2) {
            assert!(w[1].fg_cum >= w[0].fg_cum);
            assert!(w[1].f_best <= w[0].f_best);
            assert_eq!(w[1].k, w[0].k + 1);
        }
        assert_eq!(t.summary.iterations, t.records.len());
        assert_eq!(t.summary.oracle_calls, t.records.last().unwrap().fg_cum);
    }
}

#[test]
fn reset_mode_and_bounded_bundles_still_converge() {
    for name in ["DEM", "LQ", "CB2", "Mifflin1", "Goffin"] {
        let p = get_problem(name).unwrap();
        let mut cfg = config(
            Variant::Fpba1,
            EpsSchedule::Decay { e0: 1e-1 },
            Some(p.fstar),
        );
        cfg.warm = WarmStart::Reset;
        cfg.stop.max_outer = 1000;
        let t = run(&p, &p.x0, &cfg).unwrap();
        assert!(
            t.summary.converged,
            "{name} reset: {:?}",
            t.summary.stop_reason
        );

        let mut cfg = config(
            Variant::Fpba1,
            EpsSchedule::Decay { e0: 1e-1 },
            Some(p.fstar),
        );
        cfg.capacity = Some(p.dimension + 2);
        cfg.stop.max_outer = 1000;
        let t = run(&p, &p.x0, &cfg).unwrap();
        assert!(
            t.summary.converged,
            "{name} capped: {:?}",
            t.summary.stop_reason
        );
        assert_eq!(t.summary.audit.violations(), 0);
    }
}

#[test]
fn probe_stops_runs_without_reference_value() {
    let p = get_problem("DEM").unwrap();
    let mut cfg = config(Variant::Fpba1, EpsSchedule::Decay { e0: 1e-3 }, None);
    cfg.stop.probe_eta = Some(1e-8);
    let t = run(&p, &p.x0, &cfg).unwrap();
    assert_eq!(t.summary.stop_reason, StopReason::Probe);
    assert!(t.summary.f_gap.is_none());
    assert!(t.summary.f_best - p.fstar <= 1e-6);
}

#[test]
fn user_objective_without_reference_runs_to_the_cap() {
    // f(x) = |x1 - 1| + 2|x2 + 0.5|, minimum 0 at (1, -0.5)
    let sign = |v: f64| if v == 0.0 { 0.0 } else { v.signum() };
    let f = FnObjective::new(2, move |x: &[f64], g: &mut [f64]| {
        let (a, b) = (x[0] - 1.0, x[1] + 0.5);
        g[0] = sign(a);
        g[1] = 2.0 * sign(b);
        a.abs() + 2.0 * b.abs()
    });
    let mut cfg = config(Variant::Fpba2, EpsSchedule::Decay { e0: 1e-2 }, None);
    cfg.stop.max_outer = 60;
    let t = run(&f, &[4.0, 3.0], &cfg).unwrap();
    assert!(matches!(
        t.summary.stop_reason,
        StopReason::MaxOuter | StopReason::Gnorm
    ));
    assert!(t.summary.f_best < 1e-6);
}

#[test]
fn variable_mu_respects_the_bound_with_the_initial_mu() {
    let p = get_problem("Maxl").unwrap();
    let mut cfg = config(
        Variant::Fpba1,
        EpsSchedule::Decay { e0: 1e-2 },
        Some(p.fstar),
    );
    cfg.mu = MuSchedule::Geometric {
        mu0: 2.0,
        rho: 0.99,
    };
    let t = run(&p, &p.x0, &cfg).unwrap();
    assert!(t.summary.converged);
    let (r, advisory) = bound_radius(&p.x0, p.xstar.as_deref(), &t);
    let report = monitor_bound(&t, Variant::Fpba1, 2.0, r, p.fstar, advisory).unwrap();
    assert!(report.passed() && !report.advisory);
}

#[test]
fn increasing_mu_schedule_is_rejected() {
    let p = get_problem("DEM").unwrap();
    let mut cfg = config(Variant::Fpba1, EpsSchedule::Decay { e0: 1e-2 }, None);
    cfg.mu = MuSchedule::Table {
        values: vec![1.0, 2.0],
    };
    assert!(matches!(run(&p, &p.x0, &cfg), Err(Error::Config(_))));
}

#[test]
fn surrogate_radius_marks_bound_advisory() {
    let p = get_problem("Shor").unwrap();
    let cfg = config(
        Variant::Fpba2,
        EpsSchedule::Decay { e0: 1e-1 },
        Some(p.fstar),
    );
    let t = run(&p, &p.x0, &cfg).unwrap();
    let (_, advisory) = bound_radius(&p.x0, p.xstar.as_deref(), &t);
    assert!(advisory);
}

#[test]
fn report_exports() {
    let report = run_benchmark(&RunConfig {
        problems: vec!["LQ".into(), "Goffin".into()],
        variants: vec![Variant::Fpba1, Variant::Fpba2],
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path(), Format::Json).unwrap();
    report.write(dir.path(), Format::Csv).unwrap();
    report.write(dir.path(), Format::Table).unwrap();

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 4);
    assert_eq!(summary[0]["name"], "LQ");

    let cell: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("13_Goffin_fpba2_decay_0.1.json")).unwrap(),
    )
    .unwrap();
    assert!(["ftol", "gnorm", "max_outer", "probe"]
        .contains(&cell["summary"]["stop_reason"].as_str().unwrap()));
    assert_eq!(cell["records"][0]["y"].as_array().unwrap().len(), 50);

    let csv = std::fs::read_to_string(dir.path().join("05_LQ_fpba1_decay_0.1.csv")).unwrap();
    assert!(csv.starts_with("k,f_y,f_best,eps_k,fg_cum,vartheta,stop\n"));
    let text = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert_eq!(text.lines().count(), 5);
}
