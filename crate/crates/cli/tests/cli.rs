use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use radcool::sweep::{AxisParam, Detuning, Drive};
use radcool::Scheme;
use radcool_cli::presets::Overlay;
use radcool_cli::{figure_preset, parse_and_validate, run, DriveSpec, FigureId, RunConfig};

const MINIMAL: &str = "g = 1e-5\ngamma_m = 1e-3\nomega_m = 10\ndelta = 10\nJ = 1.0\nn_th = 1\n";

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("radcool").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn limit_prints_strong_branch_constant() {
    let (code, out, _) = call(&["limit", "--J", "0.6", "--gamma-m", "1e-3", "--n-th", "100"]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "0.1");
}

#[test]
fn minimal_document_is_accepted() {
    let c = parse_and_validate(MINIMAL).unwrap();
    assert_eq!(c.drive, DriveSpec::Coupling(1.0));
    assert_eq!(c.omega_m, 10.0);
    let s = c.scenario();
    assert_eq!(s.detuning, Detuning::Absolute(10.0));
    assert_eq!(s.drive, Drive::Coupling { j: 1.0 });
    let p = s.params().unwrap();
    assert!((p.drive_e - 1e6).abs() < 1e-6);
}

#[test]
fn both_drive_keys_are_rejected() {
    let v = parse_and_validate(&format!("{MINIMAL}drive_E = 5.0\n")).unwrap_err();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].key, "drive_E/J");
    assert!(v[0].message.contains("both"));
}

#[test]
fn missing_drive_is_rejected() {
    let doc = MINIMAL.replace("J = 1.0\n", "");
    let v = parse_and_validate(&doc).unwrap_err();
    assert!(v.iter().any(|x| x.message.contains("neither")));
}

#[test]
fn zero_frequency_is_rejected() {
    let doc = MINIMAL.replace("omega_m = 10", "omega_m = 0");
    let v = parse_and_validate(&doc).unwrap_err();
    assert!(v.iter().any(|x| x.key == "omega_m"), "{v:?}");
}

#[test]
fn every_violation_is_reported() {
    let doc = "g = -1\ngamma_m = -1e-3\nomega_m = 10\ndelta = \"x\"\nn_th = 1\ncolour = 3\nscheme = \"rk4\"\n";
    let v = parse_and_validate(doc).unwrap_err();
    let keys: Vec<&str> = v.iter().map(|x| x.key.as_str()).collect();
    for k in ["colour", "g", "gamma_m", "delta", "drive_E/J", "scheme"] {
        assert!(keys.contains(&k), "{k} missing from {keys:?}");
    }
}

#[test]
fn malformed_document_is_one_violation() {
    let v = parse_and_validate("g = = 1").unwrap_err();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].key, "document");
}

#[test]
fn optional_keys_are_parsed() {
    let doc = format!("{MINIMAL}t_end = 50\ndt = 0.002\nscheme = \"euler_product\"\noutputs = [\"phonon\", \"spectrum\"]\n");
    let c = parse_and_validate(&doc).unwrap();
    let o = c.run_options();
    assert_eq!(o.t_end, Some(50.0));
    assert_eq!(o.dt, Some(0.002));
    assert_eq!(o.scheme, Scheme::EulerProduct);
    assert!(o.outputs.phonon && o.outputs.spectrum && !o.outputs.photon);
}

fn config_strategy() -> impl Strategy<Value = RunConfig> {
    let rate = 1e-6f64..1e3;
    (
        (0.0f64..1e-2, rate.clone(), rate.clone(), -100.0f64..100.0, 0.0f64..1e3),
        (
            any::<bool>(),
            0.0f64..4.0,
            prop::option::of(1.0f64..1e4),
            prop::option::of(1e-4f64..1e-2),
            prop::option::of(prop_oneof![Just(Scheme::MidpointExp), Just(Scheme::EulerProduct)]),
            prop::option::of(prop::sample::subsequence(vec!["phonon", "photon", "gaussian", "spectrum"], 0..4)),
        ),
    )
        .prop_map(|((g, gamma_m, omega_m, delta, n_th), (by_e, d, t_end, dt, scheme, outputs))| RunConfig {
            g: g + 1e-9,
            gamma_m,
            omega_m,
            delta,
            drive: if by_e { DriveSpec::Intensity(d * 1e5) } else { DriveSpec::Coupling(d) },
            n_th,
            t_end,
            dt,
            scheme,
            outputs: outputs.map(|v| v.into_iter().map(String::from).collect()),
        })
}

proptest! {
    #[test]
    fn emit_then_parse_is_identity(c in config_strategy()) {
        let text = c.emit();
        let back = parse_and_validate(&text);
        prop_assert_eq!(back, Ok(c), "{}", text);
    }
}

#[test]
fn presets_cover_their_stated_parameters() {
    for id in FigureId::ALL {
        let p = figure_preset(id);
        assert_eq!(p.id, id);
        assert_eq!(p.spec.id(), id.name());
        assert!(!p.spec.axis.values.is_empty(), "{id}");
        assert!(p.spec.base.params().is_ok(), "{id}");
        for v in &p.spec.axis.values {
            assert!(p.spec.axis.param.apply(&p.spec.base, *v).params().is_ok(), "{id} at {v}");
        }
        assert!(!p.stated.is_empty(), "{id}");
        assert!(!p.defaults.is_empty(), "{id} has no defaults ledger");
        let ledger = p.ledger();
        for e in p.stated.iter().chain(&p.defaults) {
            assert!(ledger.contains(e.key), "{id}: {}", e.key);
        }
        assert_eq!(id.name().parse::<FigureId>(), Ok(id));
    }
    assert!("fig9".parse::<FigureId>().is_err());
}

#[test]
fn fig2b_preset_matches_caption() {
    let p = figure_preset(FigureId::Fig2b);
    let b = p.spec.base;
    assert_eq!((b.g, b.gamma_m, b.n_th), (1e-5, 1e-3, 1.0));
    assert_eq!(b.detuning, Detuning::Relative(1.0));
    assert_eq!(b.drive, Drive::Coupling { j: 1.0 });
    assert_eq!(p.spec.axis.param, AxisParam::OmegaM);
}

#[test]
fn fig3d_preset_overlays_prior_predictions() {
    let p = figure_preset(FigureId::Fig3d);
    assert_eq!(p.spec.base.n_th, 0.0);
    assert_eq!(p.spec.base.detuning, Detuning::Relative(1.0));
    assert!(p.overlays.contains(&Overlay::PriorWeak));
    assert!(p.overlays.contains(&Overlay::PriorStrong { e: 1e6 }));
    // the weak-coupling curve is κ²/(4ω_m²) at zero temperature
    let s = p.spec.axis.param.apply(&p.spec.base, 10.0);
    let w = Overlay::PriorWeak.evaluate(&s).unwrap();
    assert!((w - 0.0025).abs() < 1e-4, "{w}");
}

#[test]
fn figs5_preset_is_the_spectrum_pair() {
    let p = figure_preset(FigureId::FigS5);
    let b = p.spec.base;
    assert_eq!((b.gamma_m, b.n_th, b.omega_m), (1e-3, 100.0, 200.0));
    assert_eq!(p.spec.axis.param, AxisParam::J);
    assert_eq!(p.spec.axis.values, vec![0.3, 2.0]);
    assert!(p.spec.options.outputs.spectrum);
}

#[test]
fn validate_reports_ok_and_violations() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", MINIMAL);
    let (code, out, _) = call(&["validate", "--config", &good]);
    assert_eq!((code, out.trim()), (0, "ok"));

    let bad = write(dir.path(), "bad.toml", &MINIMAL.replace("omega_m = 10", "omega_m = 0"));
    let (code, _, err) = call(&["simulate", "--config", &bad]);
    assert_eq!(code, 1);
    assert!(err.contains("omega_m"), "{err}");
}

#[test]
fn unknown_command_line_is_a_validation_error() {
    assert_eq!(call(&["frobnicate"]).0, 1);
    assert_eq!(call(&["sweep", "--config", "x.toml", "--axis", "J"]).0, 1);
}

#[test]
fn simulate_writes_run_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let doc = "g = 1e-5\ngamma_m = 1e-3\nomega_m = 2\ndelta = 2\nJ = 0.5\nn_th = 10\nt_end = 200\n";
    let cfg = write(dir.path(), "run.toml", doc);
    let out_dir = dir.path().join("o");
    let (code, out, err) = call(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let line = out.lines().last().unwrap();
    assert!(line.starts_with("t_s=") && line.contains("regime=cooling"), "{out}");
    let runs: Vec<_> = std::fs::read_dir(out_dir.join("runs")).unwrap().collect();
    assert_eq!(runs.len(), 1);
    let run = runs[0].as_ref().unwrap().path();
    assert!(run.join("manifest.json").exists());
    assert!(run.join("series.csv").exists());
    assert!(run.join("wigner.csv").exists());

    let (code, out, _) = call(&["--quiet", "simulate", "--config", &cfg]);
    assert_eq!((code, out.as_str()), (0, ""));
}

#[test]
fn divergent_run_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let doc = "g = 1e-5\ngamma_m = 1e-3\nomega_m = 10\ndelta = 10\nJ = 3.0\nn_th = 100\nt_end = 400\n";
    let cfg = write(dir.path(), "hot.toml", doc);
    let (code, out, _) = call(&["simulate", "--config", &cfg]);
    assert_eq!(code, 2, "{out}");
    assert!(out.contains("regime=heating"), "{out}");
}

#[test]
fn sweep_command_writes_named_table() {
    let dir = tempfile::tempdir().unwrap();
    let doc = "g = 1e-5\ngamma_m = 1e-3\nomega_m = 2\ndelta = 2\nJ = 0.5\nn_th = 10\nt_end = 200\n";
    let cfg = write(dir.path(), "base.toml", doc);
    let out_dir = dir.path().join("o");
    let args = [
        "sweep", "--config", &cfg, "--axis", "J", "--values", "0.3,0.6", "--name", "js", "--workers", "2",
        "--out", out_dir.to_str().unwrap(),
    ];
    let (code, out, err) = call(&args);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().filter(|l| l.starts_with("J=")).count(), 2);
    let table = std::fs::read_to_string(out_dir.join("sweeps/js/table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);

    let (code, _, err) = call(&["sweep", "--config", &cfg, "--axis", "colour", "--values", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("colour"));
}

#[test]
fn figure_fig2b_creates_table() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_radcool"))
        .args(["figure", "fig2b", "--out"])
        .arg(dir.path().join("out"))
        .env_remove("RADCOOL_OUT")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert!(stdout.contains("default:"), "ledger missing: {stdout}");
    let table = dir.path().join("out/sweeps/fig2b/table.csv");
    let text = std::fs::read_to_string(table).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(2).unwrap().contains("cooling"));
}

#[test]
fn environment_overrides_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let env_root = dir.path().join("env");
    let flag_root = dir.path().join("flag");
    let cfg = write(
        dir.path(),
        "run.toml",
        "g = 1e-5\ngamma_m = 1e-3\nomega_m = 2\ndelta = 2\nJ = 0.5\nn_th = 10\nt_end = 100\n",
    );
    let status = Command::new(env!("CARGO_BIN_EXE_radcool"))
        .args(["--quiet", "simulate", "--config", &cfg, "--out"])
        .arg(&flag_root)
        .env("RADCOOL_OUT", &env_root)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(env_root.join("runs").is_dir());
    assert!(!flag_root.exists());
}
