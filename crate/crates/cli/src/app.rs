use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use radcool::analytics::limit_phonon;
use radcool::sweep::{
    find_optimum_j, persist_run, run_scenario, sweep, Axis, AxisParam, RunOptions, RunResult, RunSummary, SweepOptions,
    SweepSpec, SWEEPS_DIR,
};
use radcool::Scheme;

use crate::config::{parse_and_validate, RunConfig, Violation};
use crate::presets::{figure_preset, FigureId, Preset};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;

/// Environment variable that takes precedence over `--out`.
pub const OUT_ENV: &str = "RADCOOL_OUT";

#[derive(Debug, Parser)]
#[command(name = "radcool", version, about = "Dynamical optomechanical cooling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output root for runs/ and sweeps/.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Integration step override (1/κ).
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Integration scheme override.
    #[arg(long, global = true)]
    scheme: Option<Scheme>,
    /// Suppress summaries and ledgers.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate one configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sweep one parameter of a configuration.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// J, omega_m, drive_E, g, n_th, delta_ratio or gamma_m.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "")]
        name: String,
        /// Reuse finished runs found under the output root.
        #[arg(long)]
        resume: bool,
    },
    /// Infinite-resolution cooling limit.
    Limit {
        #[arg(long = "J")]
        j: f64,
        #[arg(long)]
        gamma_m: f64,
        #[arg(long)]
        n_th: f64,
    },
    /// Cavity noise spectrum of a stabilized configuration.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a figure preset.
    Figure {
        id: FigureId,
        #[arg(long)]
        resume: bool,
    },
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

macro_rules! say {
    ($w:expr, $($arg:tt)*) => {{
        let _ = writeln!($w, $($arg)*);
    }};
}

/// Runs the command line `args` and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut io = Io { out, err };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                say!(io.err, "{}", text.trim_end());
            } else {
                say!(io.out, "{}", text.trim_end());
            }
            return code;
        }
    };
    let out_root = std::env::var_os(OUT_ENV).map(PathBuf::from).or(cli.out.clone());

    match &cli.command {
        Command::Validate { config } => match load_config(config, &mut io) {
            Some(_) => {
                say!(io.out, "ok");
                EXIT_OK
            }
            None => EXIT_INVALID,
        },
        Command::Limit { j, gamma_m, n_th } => match limit_phonon(*j, *gamma_m, *n_th) {
            Ok(l) => {
                say!(io.out, "{}", format_value(l.value));
                EXIT_OK
            }
            Err(e) => {
                say!(io.err, "error: {e}");
                EXIT_INVALID
            }
        },
        Command::Simulate { config } => {
            let Some(cfg) = load_config(config, &mut io) else {
                return EXIT_INVALID;
            };
            let opts = overrides(cfg.run_options(), &cli);
            simulate(&cfg, &opts, out_root.as_deref(), &cli, &mut io)
        }
        Command::Spectrum { config } => {
            let Some(cfg) = load_config(config, &mut io) else {
                return EXIT_INVALID;
            };
            let mut opts = overrides(cfg.run_options(), &cli);
            opts.outputs.spectrum = true;
            spectrum(&cfg, &opts, out_root.as_deref(), &cli, &mut io)
        }
        Command::Sweep {
            config,
            axis,
            values,
            name,
            resume,
        } => {
            let Some(cfg) = load_config(config, &mut io) else {
                return EXIT_INVALID;
            };
            let Some(param) = AxisParam::parse(axis) else {
                let names: Vec<&str> = AxisParam::ALL.iter().map(|a| a.name()).collect();
                say!(io.err, "axis: unknown parameter `{axis}` ({})", names.join(", "));
                return EXIT_INVALID;
            };
            let spec = SweepSpec {
                name: name.clone(),
                base: cfg.scenario(),
                axis: Axis {
                    param,
                    values: values.clone(),
                },
                options: overrides(cfg.run_options(), &cli),
            };
            run_sweep(&spec, out_root, *resume, &cli, &mut io)
        }
        Command::Figure { id, resume } => {
            let mut preset = figure_preset(*id);
            preset.spec.options = overrides(preset.spec.options, &cli);
            if !cli.quiet {
                let _ = write!(io.out, "{}", preset.ledger());
            }
            let root = out_root.unwrap_or_else(|| PathBuf::from("out"));
            let code = run_sweep(&preset.spec, Some(root.clone()), *resume, &cli, &mut io);
            if code != EXIT_OK {
                return code;
            }
            figure_extras(&preset, &root, &cli, &mut io)
        }
    }
}

fn format_value(v: f64) -> String {
    // 12 significant digits hide last-ulp noise such as 0.10000000000000002
    let s = format!("{:.*e}", 11, v);
    let parsed: f64 = s.parse().unwrap_or(v);
    format!("{parsed}")
}

fn load_config(path: &Path, io: &mut Io) -> Option<RunConfig> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            say!(io.err, "{}: {e}", path.display());
            return None;
        }
    };
    match parse_and_validate(&text) {
        Ok(c) => Some(c),
        Err(violations) => {
            report_violations(path, &violations, io);
            None
        }
    }
}

fn report_violations(path: &Path, violations: &[Violation], io: &mut Io) {
    say!(io.err, "{}: {} violation(s)", path.display(), violations.len());
    for v in violations {
        say!(io.err, "  {v}");
    }
}

fn overrides(mut opts: RunOptions, cli: &Cli) -> RunOptions {
    if let Some(dt) = cli.dt {
        opts.dt = Some(dt);
    }
    if let Some(s) = cli.scheme {
        opts.scheme = s;
    }
    opts
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

fn summary_line(s: &RunSummary) -> String {
    let mut line = format!("t_s={} n_mf={} regime={}", opt(s.report.t_s), opt(s.report.n_mf), s.report.regime);
    if let Some(t) = s.diverged_at {
        let _ = write!(line, " diverged_at={t:.3}");
    }
    line
}

/// Runs, persists and summarizes one configuration; Err carries the exit
/// code of a failed setup.
fn execute(cfg: &RunConfig, opts: &RunOptions, root: Option<&Path>, cli: &Cli, io: &mut Io) -> Result<RunResult, i32> {
    let run = run_scenario(&cfg.scenario(), opts).map_err(|e| {
        say!(io.err, "error: {e}");
        EXIT_INVALID
    })?;
    if let Some(root) = root {
        match persist_run(root, &run) {
            Ok(dir) if !cli.quiet => say!(io.out, "wrote {}", dir.display()),
            Ok(_) => {}
            Err(e) => {
                say!(io.err, "error: {e}");
                return Err(EXIT_INVALID);
            }
        }
    }
    if !cli.quiet {
        say!(io.out, "{}", summary_line(&run.summary));
    }
    Ok(run)
}

fn simulate(cfg: &RunConfig, opts: &RunOptions, root: Option<&Path>, cli: &Cli, io: &mut Io) -> i32 {
    match execute(cfg, opts, root, cli, io) {
        Ok(run) if run.summary.diverged_at.is_some() => EXIT_DIVERGED,
        Ok(_) => EXIT_OK,
        Err(code) => code,
    }
}

fn spectrum(cfg: &RunConfig, opts: &RunOptions, root: Option<&Path>, cli: &Cli, io: &mut Io) -> i32 {
    let run = match execute(cfg, opts, root, cli, io) {
        Ok(r) => r,
        Err(code) => return code,
    };
    if run.summary.diverged_at.is_some() {
        return EXIT_DIVERGED;
    }
    match &run.spectrum {
        Some(s) => {
            for p in &s.peaks {
                say!(io.out, "peak omega={:.4} height={:.6e}", p.omega, p.height);
            }
            EXIT_OK
        }
        None => {
            say!(
                io.err,
                "no spectrum: the run is {}, a stabilized run is required",
                run.summary.report.regime
            );
            EXIT_INVALID
        }
    }
}

fn run_sweep(spec: &SweepSpec, root: Option<PathBuf>, resume: bool, cli: &Cli, io: &mut Io) -> i32 {
    let opts = SweepOptions {
        workers: cli.workers,
        out: root.clone(),
        resume,
    };
    let table = match sweep(spec, &opts) {
        Ok(t) => t,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    if !cli.quiet {
        for r in &table.rows {
            match (&r.error, r.regime) {
                (Some(e), None) => say!(io.out, "{}={} error: {e}", spec.axis.param.name(), r.axis_value),
                _ => say!(
                    io.out,
                    "{}={} t_s={} n_mf={} regime={}",
                    spec.axis.param.name(),
                    r.axis_value,
                    opt(r.t_s),
                    opt(r.n_mf),
                    r.regime.map_or("error", |g| g.name())
                ),
            }
        }
        if let Some(root) = &root {
            say!(io.out, "wrote {}", root.join(SWEEPS_DIR).join(&table.id).join("table.csv").display());
        }
    }
    EXIT_OK
}

fn figure_extras(preset: &Preset, root: &Path, cli: &Cli, io: &mut Io) -> i32 {
    let dir = root.join(SWEEPS_DIR).join(&preset.spec.id());
    if !preset.overlays.is_empty() {
        let mut text = String::from("value");
        for o in &preset.overlays {
            text.push(',');
            text.push_str(o.column());
        }
        text.push('\n');
        for &v in &preset.spec.axis.values {
            let s = preset.spec.axis.param.apply(&preset.spec.base, v);
            let _ = write!(text, "{v}");
            for o in &preset.overlays {
                let _ = write!(text, ",{}", o.evaluate(&s).map_or(String::new(), |x| x.to_string()));
            }
            text.push('\n');
        }
        if let Err(e) = std::fs::write(dir.join("overlay.csv"), text) {
            say!(io.err, "error: {e}");
            return EXIT_INVALID;
        }
    }
    if let Some(search) = preset.optimum {
        match find_optimum_j(
            &preset.spec.base,
            &preset.spec.options,
            search.range,
            search.tolerance,
            search.coarse,
        ) {
            Ok(o) => {
                if !cli.quiet {
                    say!(io.out, "optimum J={:.4} n_mf={:.6}", o.j_opt, o.n_mf_min);
                }
                let text = serde_json::to_string_pretty(&o).unwrap_or_default();
                if let Err(e) = std::fs::write(dir.join("optimum.json"), text) {
                    say!(io.err, "error: {e}");
                    return EXIT_INVALID;
                }
            }
            Err(e) => say!(io.err, "optimum search: {e}"),
        }
    }
    EXIT_OK
}
