use radcool::observables::Regime;
use radcool::sweep::{
    find_optimum_j, load_summary, run_scenario, sweep, Axis, AxisParam, Drive, Outputs, RunOptions,
    Scenario, SweepError, SweepOptions, SweepSpec,
};

fn quick_options(t_end: f64) -> RunOptions {
    RunOptions {
        t_end: Some(t_end),
        ..RunOptions::default()
    }
}

fn spec(name: &str, values: Vec<f64>) -> SweepSpec {
    SweepSpec {
        name: name.into(),
        base: Scenario::resonant(2.0, Drive::Coupling { j: 0.5 }, 10.0),
        axis: Axis {
            param: AxisParam::J,
            values,
        },
        options: quick_options(200.0),
    }
}

#[test]
fn runs_are_deterministic() {
    let s = Scenario::resonant(2.0, Drive::Coupling { j: 0.5 }, 10.0);
    let a = run_scenario(&s, &quick_options(150.0)).unwrap();
    let b = run_scenario(&s, &quick_options(150.0)).unwrap();
    assert_eq!(a.summary, b.summary);
    assert_eq!(a.series, b.series);
}

#[test]
fn uncoupled_run_is_equilibrium() {
    let s = Scenario::resonant(2.0, Drive::Intensity { e: 0.0 }, 100.0);
    let run = run_scenario(&s, &quick_options(200.0)).unwrap();
    assert_eq!(run.summary.regime(), Regime::Equilibrium);
    let n = run.summary.n_mf().unwrap();
    assert!((n - 100.0).abs() < 1e-6 * 100.0, "n_mf = {n}");
    for row in &run.series {
        assert!((row.n_m_total - 100.0).abs() < 1e-4, "t = {}: {}", row.t, row.n_m_total);
    }
}

#[test]
fn cooling_run_reports_parts() {
    let s = Scenario::resonant(2.0, Drive::Coupling { j: 0.5 }, 10.0);
    let run = run_scenario(&s, &quick_options(200.0)).unwrap().summary;
    assert_eq!(run.regime(), Regime::Cooling);
    let ph = run.final_phonon.unwrap();
    let parts = ph.n_s + ph.n_n_cav + ph.n_n_mech_bs + ph.n_n_mech_sq;
    assert!((parts - ph.n_total).abs() < 1e-9 * ph.n_total.max(1.0));
    assert!(run.final_purity.unwrap() > run.initial_purity);
    assert!(run.thermal_equivalent.is_some());
}

#[test]
fn worker_count_does_not_change_rows() {
    let sp = spec("", vec![0.2, 0.5, 0.8]);
    let one = sweep(
        &sp,
        &SweepOptions {
            workers: Some(1),
            ..SweepOptions::default()
        },
    )
    .unwrap();
    let three = sweep(
        &sp,
        &SweepOptions {
            workers: Some(3),
            ..SweepOptions::default()
        },
    )
    .unwrap();
    assert_eq!(one, three);
    let order: Vec<f64> = one.rows.iter().map(|r| r.axis_value).collect();
    assert_eq!(order, vec![0.2, 0.5, 0.8]);
}

#[test]
fn single_row_table_and_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let sp = spec("single", vec![0.5]);
    let opts = SweepOptions {
        workers: Some(1),
        out: Some(dir.path().to_path_buf()),
        resume: false,
    };
    let table = sweep(&sp, &opts).unwrap();
    assert_eq!(table.rows.len(), 1);

    let text = std::fs::read_to_string(dir.path().join("sweeps/single/table.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("value,regime,t_s,n_mf"));
    assert!(lines[1].contains("cooling"));

    let id = table.rows[0].run_id.clone().unwrap();
    let series = std::fs::read_to_string(dir.path().join("runs").join(&id).join("series.csv")).unwrap();
    assert_eq!(
        series.lines().next().unwrap(),
        "t,n_m_total,n_m_sys,n_m_cav,n_m_bs,n_m_sq,n_photon_total,n_photon_coh,q_m0,p_m0"
    );
    let summary = load_summary(dir.path(), &id).unwrap();
    assert_eq!(summary.id, id);
    assert_eq!(summary.report.n_mf, table.rows[0].n_mf);

    // resume reads the manifest back instead of recomputing
    let resumed = sweep(
        &sp,
        &SweepOptions {
            resume: true,
            ..opts
        },
    )
    .unwrap();
    assert_eq!(resumed, table);
}

#[test]
fn bad_points_become_error_rows() {
    let mut sp = spec("", vec![2.0, -1.0]);
    sp.axis.param = AxisParam::OmegaM;
    let table = sweep(&sp, &SweepOptions::default()).unwrap();
    assert!(table.rows[0].error.is_none());
    assert!(table.rows[1].regime.is_none());
    assert!(table.rows[1].error.as_deref().unwrap().contains("omega_m"));
}

#[test]
fn empty_axis_is_rejected() {
    let sp = spec("", vec![]);
    assert!(matches!(sweep(&sp, &SweepOptions::default()), Err(SweepError::InvalidSpec(_))));
}

#[test]
fn run_ids_follow_content() {
    let s = Scenario::resonant(2.0, Drive::Coupling { j: 0.5 }, 10.0);
    let opts = RunOptions {
        t_end: Some(50.0),
        outputs: Outputs::none(),
        ..RunOptions::default()
    };
    let a = run_scenario(&s, &opts).unwrap().summary.id;
    let b = run_scenario(&s.with_coupling(0.6), &opts).unwrap().summary.id;
    assert_ne!(a, b);
    assert_eq!(a.len(), 16);
}

#[test]
fn optimum_search_reports_not_found_when_nothing_cools() {
    let base = Scenario::resonant(10.0, Drive::Coupling { j: 3.0 }, 100.0);
    let r = find_optimum_j(&base, &quick_options(300.0), (3.0, 4.0), 0.05, 2);
    assert!(matches!(r, Err(SweepError::NotFound { .. })), "{r:?}");
}

#[test]
fn optimum_search_finds_interior_minimum() {
    let base = Scenario::resonant(2.0, Drive::Coupling { j: 0.5 }, 10.0);
    let opt = find_optimum_j(&base, &quick_options(300.0), (0.2, 1.4), 0.05, 5).unwrap();
    let coarse_best = opt
        .evaluations
        .iter()
        .filter_map(|e| e.n_mf.map(|v| (e.j, v)))
        .fold(f64::INFINITY, |m, (_, v)| m.min(v));
    assert!(opt.n_mf_min <= coarse_best);
    assert!(opt.j_opt > 0.2 && opt.j_opt < 1.4, "J_opt = {}", opt.j_opt);
}
