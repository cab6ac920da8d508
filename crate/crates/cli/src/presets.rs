//! Scenario presets for the figures of the cooling study.
//!
//! Each preset carries the parameters stated for its figure plus a ledger of
//! the values that had to be chosen here.

use std::fmt;
use std::str::FromStr;

use radcool::analytics::{limit_phonon, prior_strong_prediction, prior_weak_prediction};
use radcool::sweep::{Axis, AxisParam, Detuning, Drive, Outputs, RunOptions, Scenario, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig3c,
    Fig3d,
    Fig4,
    FigS1,
    FigS3,
    FigS4,
    FigS5,
}

impl FigureId {
    pub const ALL: [FigureId; 11] = [
        Self::Fig2a,
        Self::Fig2b,
        Self::Fig3a,
        Self::Fig3b,
        Self::Fig3c,
        Self::Fig3d,
        Self::Fig4,
        Self::FigS1,
        Self::FigS3,
        Self::FigS4,
        Self::FigS5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig2a => "fig2a",
            Self::Fig2b => "fig2b",
            Self::Fig3a => "fig3a",
            Self::Fig3b => "fig3b",
            Self::Fig3c => "fig3c",
            Self::Fig3d => "fig3d",
            Self::Fig4 => "fig4",
            Self::FigS1 => "figS1",
            Self::FigS3 => "figS3",
            Self::FigS4 => "figS4",
            Self::FigS5 => "figS5",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownFigure(pub String);

impl fmt::Display for UnknownFigure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let known: Vec<&str> = FigureId::ALL.iter().map(|f| f.name()).collect();
        write!(f, "unknown figure `{}` (known: {})", self.0, known.join(", "))
    }
}

impl std::error::Error for UnknownFigure {}

impl FromStr for FigureId {
    type Err = UnknownFigure;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownFigure(s.to_string()))
    }
}

/// A parameter value and where it comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: &'static str,
    pub value: String,
    pub note: &'static str,
}

fn entry(key: &'static str, value: impl ToString, note: &'static str) -> Entry {
    Entry {
        key,
        value: value.to_string(),
        note,
    }
}

/// Analytic curves evaluated alongside a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Overlay {
    /// Infinite-resolution cooling limit at each point's J.
    Limit,
    /// Rate-equation weak-coupling prediction.
    PriorWeak,
    /// Earlier strong-coupling prediction at the given drive intensity.
    PriorStrong { e: f64 },
}

impl Overlay {
    pub fn column(self) -> &'static str {
        match self {
            Self::Limit => "limit_phonon",
            Self::PriorWeak => "prior_weak",
            Self::PriorStrong { .. } => "prior_strong",
        }
    }

    pub fn evaluate(self, scenario: &Scenario) -> Option<f64> {
        let params = scenario.params().ok()?;
        match self {
            Self::Limit => limit_phonon(params.coupling(), params.gamma_m, params.n_th)
                .ok()
                .map(|l| l.value),
            Self::PriorWeak => Some(prior_weak_prediction(&params).n_mf_weak),
            Self::PriorStrong { e } => {
                let mut p = params;
                p.drive_e = e;
                Some(prior_strong_prediction(&p))
            }
        }
    }
}

/// Golden-section search for the optimum J at the base ω_m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimumSearch {
    pub range: (f64, f64),
    pub tolerance: f64,
    pub coarse: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub id: FigureId,
    pub spec: SweepSpec,
    /// Values stated for the figure.
    pub stated: Vec<Entry>,
    /// Values chosen here because the figure leaves them open.
    pub defaults: Vec<Entry>,
    pub overlays: Vec<Overlay>,
    pub optimum: Option<OptimumSearch>,
}

const G: f64 = 1e-5;
const GAMMA_M: f64 = 1e-3;

fn resonant(omega_m: f64, drive: Drive, n_th: f64) -> Scenario {
    Scenario {
        g: G,
        gamma_m: GAMMA_M,
        omega_m,
        detuning: Detuning::Relative(1.0),
        drive,
        n_th,
    }
}

fn spec(id: FigureId, base: Scenario, param: AxisParam, values: &[f64], options: RunOptions) -> SweepSpec {
    SweepSpec {
        name: id.name().to_string(),
        base,
        axis: Axis {
            param,
            values: values.to_vec(),
        },
        options,
    }
}

fn common_stated() -> Vec<Entry> {
    vec![
        entry("g", G, "stated"),
        entry("gamma_m", GAMMA_M, "stated"),
    ]
}

const RESOLUTIONS: [f64; 13] = [2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 30.0, 40.0, 50.0];

pub fn figure_preset(id: FigureId) -> Preset {
    let opts = RunOptions::default();
    let mut stated = common_stated();
    let mut defaults = Vec::new();
    let mut overlays = Vec::new();
    let mut optimum = None;

    let spec = match id {
        FigureId::Fig2a => {
            let values = [0.5, 1.0, 1.5, 2.0, 2.5];
            stated.extend([
                entry("delta/omega_m", 1, "stated"),
                entry("omega_m", 10, "stated"),
                entry("n_th", 100, "stated"),
            ]);
            defaults.push(entry("J", "0.5, 1.0, 1.5, 2.0, 2.5", "curve values not printed; 2.5 is the transitional inset"));
            spec(id, resonant(10.0, Drive::Coupling { j: 1.0 }, 100.0), AxisParam::J, &values, opts)
        }
        FigureId::Fig2b => {
            let values = [4.0, 8.0, 12.0, 20.0];
            stated.extend([
                entry("delta/omega_m", 1, "stated"),
                entry("J", 1.0, "stated"),
                entry("n_th", 1, "stated"),
            ]);
            defaults.push(entry("omega_m", "4, 8, 12, 20", "curve values not printed; 4 is the transitional inset"));
            spec(id, resonant(8.0, Drive::Coupling { j: 1.0 }, 1.0), AxisParam::OmegaM, &values, opts)
        }
        FigureId::Fig3a | FigureId::Fig3c => {
            let n_th = if id == FigureId::Fig3a { 100.0 } else { 0.0 };
            stated.extend([entry("drive_E", 8e5, "stated"), entry("n_th", n_th, "stated")]);
            defaults.extend([
                entry("delta/omega_m", 1, "detuning not stated for this panel"),
                entry("omega_m", "2..50 (13 points)", "grid not printed"),
            ]);
            let base = resonant(10.0, Drive::Intensity { e: 8e5 }, n_th);
            spec(id, base, AxisParam::OmegaM, &RESOLUTIONS, opts)
        }
        FigureId::Fig3b | FigureId::Fig3d => {
            let n_th = if id == FigureId::Fig3b { 100.0 } else { 0.0 };
            stated.extend([entry("delta/omega_m", 1, "stated"), entry("n_th", n_th, "stated")]);
            defaults.extend([
                entry("drive_E", 5e5, "the curves' intensities are not printed; one curve"),
                entry("omega_m", "2..50 (13 points)", "grid not printed"),
            ]);
            if id == FigureId::Fig3d {
                stated.push(entry("prior_strong drive_E", 1e6, "stated"));
                overlays.extend([Overlay::PriorWeak, Overlay::PriorStrong { e: 1e6 }]);
            }
            let base = resonant(10.0, Drive::Intensity { e: 5e5 }, n_th);
            spec(id, base, AxisParam::OmegaM, &RESOLUTIONS, opts)
        }
        FigureId::Fig4 => {
            let values = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.2];
            stated.push(entry("delta/omega_m", 1, "stated"));
            defaults.extend([
                entry("n_th", 100, "not stated; matches the limit curve's bath"),
                entry("omega_m", 8, "one curve of the family"),
                entry("J", "0.1..1.2 (11 points)", "grid not printed"),
                entry("optimum search", "J in [0.3, 1.5], tolerance 0.02", "locates the ending dot"),
            ]);
            overlays.push(Overlay::Limit);
            optimum = Some(OptimumSearch {
                range: (0.3, 1.5),
                tolerance: 0.02,
                coarse: 7,
            });
            spec(id, resonant(8.0, Drive::Coupling { j: 1.0 }, 100.0), AxisParam::J, &values, opts)
        }
        FigureId::FigS1 => {
            let values = [0.15, 0.20, 0.25];
            stated.retain(|e| e.key != "g");
            stated.extend([
                entry("drive_E", 1e3, "stated"),
                entry("delta/omega_m", 1, "stated"),
                entry("omega_m", 10, "stated"),
                entry("n_th", 100, "stated"),
                entry("J", "0.15, 0.20, 0.25 via g", "stated"),
            ]);
            let base = resonant(10.0, Drive::CouplingAtFixedDrive { j: 0.2, e: 1e3 }, 100.0);
            let opts = RunOptions {
                t_end: Some(1000.0),
                ..opts
            };
            defaults.push(entry("t_end", 1000, "long enough for the stable oscillation phase"));
            spec(id, base, AxisParam::J, &values, opts)
        }
        FigureId::FigS3 => {
            stated.extend([
                entry("J", 0.5, "stated"),
                entry("delta/omega_m", 1, "stated"),
                entry("n_th", 1, "stated for panels a, c, d"),
                entry("omega_m", "10, 15, 30", "stated"),
            ]);
            defaults.push(entry("panel b", "n_th = 10 at omega_m = 10", "run separately with an n_th axis"));
            let base = resonant(10.0, Drive::Coupling { j: 0.5 }, 1.0);
            spec(id, base, AxisParam::OmegaM, &[10.0, 15.0, 30.0], opts)
        }
        FigureId::FigS4 => {
            let g = (0.5e-5f64).sqrt();
            let e = 1e5f64.sqrt();
            stated = vec![
                entry("g", g, "stated via g^2 = 5e-6"),
                entry("gamma_m", 1e-4, "stated"),
                entry("drive_E", e, "stated via E^2 = 1e5"),
                entry("delta/omega_m", 1, "stated"),
                entry("n_th", 100, "stated"),
            ];
            defaults.extend([
                entry("omega_m", "5, 10, 15, 20, 30", "grid not printed"),
                entry("panel b", "n_th = 0, g = 1e-5, gamma_m = 1e-3, omega_m = 10", "run separately"),
            ]);
            overlays.push(Overlay::PriorWeak);
            let base = Scenario {
                g,
                gamma_m: 1e-4,
                omega_m: 10.0,
                detuning: Detuning::Relative(1.0),
                drive: Drive::Intensity { e },
                n_th: 100.0,
            };
            spec(id, base, AxisParam::OmegaM, &[5.0, 10.0, 15.0, 20.0, 30.0], opts)
        }
        FigureId::FigS5 => {
            stated.extend([
                entry("n_th", 100, "stated"),
                entry("delta/omega_m", 1, "stated"),
                entry("J", "0.3, 2.0", "stated"),
            ]);
            defaults.push(entry("omega_m", 200, "finite stand-in for the infinite-resolution limit"));
            let mut outputs = Outputs::default();
            outputs.spectrum = true;
            let opts = RunOptions {
                t_end: Some(300.0),
                outputs,
                ..opts
            };
            defaults.push(entry("t_end", 300, "stabilized well before"));
            spec(id, resonant(200.0, Drive::Coupling { j: 0.3 }, 100.0), AxisParam::J, &[0.3, 2.0], opts)
        }
    };

    Preset {
        id,
        spec,
        stated,
        defaults,
        overlays,
        optimum,
    }
}

impl Preset {
    /// Human-readable parameter ledger.
    pub fn ledger(&self) -> String {
        let mut out = format!("{} (axis {})\n", self.id, self.spec.axis.param.name());
        for e in &self.stated {
            out += &format!("  {:<22} {:<28} {}\n", e.key, e.value, e.note);
        }
        for e in &self.defaults {
            out += &format!("  {:<22} {:<28} default: {}\n", e.key, e.value, e.note);
        }
        out
    }
}
