//! Flat key-value run configuration (TOML syntax).
//!
//! ```toml
//! g = 1e-5
//! gamma_m = 1e-3
//! omega_m = 10.0
//! delta = 10.0
//! J = 1.0          # or drive_E, never both
//! n_th = 1.0
//! t_end = 400.0    # optional
//! dt = 0.005       # optional
//! scheme = "midpoint_exp"
//! outputs = ["phonon", "photon"]
//! ```

use std::fmt;

use radcool::sweep::{Detuning, Drive, Outputs, RunOptions, Scenario};
use radcool::Scheme;
use serde::Serialize;
use toml::{Table, Value};

pub const KEYS: [&str; 11] = [
    "g", "gamma_m", "omega_m", "delta", "drive_E", "J", "n_th", "t_end", "dt", "scheme", "outputs",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveSpec {
    Intensity(f64),
    Coupling(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub g: f64,
    pub gamma_m: f64,
    pub omega_m: f64,
    pub delta: f64,
    pub drive: DriveSpec,
    pub n_th: f64,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub scheme: Option<Scheme>,
    pub outputs: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl Violation {
    fn new(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Clone, Copy)]
enum Bound {
    Any,
    NonNegative,
    Positive,
}

struct Reader<'a> {
    table: &'a Table,
    violations: Vec<Violation>,
}

impl Reader<'_> {
    fn number(&mut self, key: &str, bound: Bound, required: bool) -> Option<f64> {
        let v = match self.table.get(key) {
            None => {
                if required {
                    self.violations.push(Violation::new(key, "missing"));
                }
                return None;
            }
            Some(Value::Float(x)) => *x,
            Some(Value::Integer(i)) => *i as f64,
            Some(other) => {
                self.violations
                    .push(Violation::new(key, format!("expected a number, got {}", other.type_str())));
                return None;
            }
        };
        let ok = v.is_finite()
            && match bound {
                Bound::Any => true,
                Bound::NonNegative => v >= 0.0,
                Bound::Positive => v > 0.0,
            };
        if !ok {
            let what = match bound {
                Bound::Any => "finite",
                Bound::NonNegative => "finite and non-negative",
                Bound::Positive => "finite and positive",
            };
            self.violations.push(Violation::new(key, format!("must be {what}, got {v}")));
            return None;
        }
        Some(v)
    }
}

/// Parses a document and collects every violation rather than stopping at
/// the first.
pub fn parse_and_validate(doc: &str) -> Result<RunConfig, Vec<Violation>> {
    let table: Table = doc
        .parse()
        .map_err(|e: toml::de::Error| vec![Violation::new("document", e.message().to_string())])?;
    let mut r = Reader {
        table: &table,
        violations: Vec::new(),
    };
    for key in table.keys() {
        if !KEYS.contains(&key.as_str()) {
            r.violations.push(Violation::new(key, "unknown key"));
        }
    }

    let g = r.number("g", Bound::NonNegative, true);
    let gamma_m = r.number("gamma_m", Bound::Positive, true);
    let omega_m = r.number("omega_m", Bound::Positive, true);
    let delta = r.number("delta", Bound::Any, true);
    let n_th = r.number("n_th", Bound::NonNegative, true);
    let t_end = r.number("t_end", Bound::Positive, false);
    let dt = r.number("dt", Bound::Positive, false);

    let drive = match (table.contains_key("drive_E"), table.contains_key("J")) {
        (true, true) => {
            r.violations
                .push(Violation::new("drive_E/J", "both given; specify exactly one"));
            None
        }
        (false, false) => {
            r.violations
                .push(Violation::new("drive_E/J", "neither given; specify exactly one"));
            None
        }
        (true, false) => r.number("drive_E", Bound::NonNegative, true).map(DriveSpec::Intensity),
        (false, true) => r.number("J", Bound::NonNegative, true).map(DriveSpec::Coupling),
    };
    if let (Some(DriveSpec::Coupling(j)), Some(g)) = (drive, g) {
        if j > 0.0 && g == 0.0 {
            r.violations.push(Violation::new("g", "a nonzero J needs g > 0"));
        }
    }

    let scheme = match table.get("scheme") {
        None => None,
        Some(Value::String(s)) => match s.parse::<Scheme>() {
            Ok(sch) => Some(sch),
            Err(_) => {
                r.violations.push(Violation::new(
                    "scheme",
                    format!("unknown scheme `{s}` (midpoint_exp, euler_product)"),
                ));
                None
            }
        },
        Some(other) => {
            r.violations
                .push(Violation::new("scheme", format!("expected a string, got {}", other.type_str())));
            None
        }
    };

    let outputs = match table.get("outputs") {
        None => None,
        Some(Value::Array(items)) => {
            let mut names = Vec::new();
            for item in items {
                match item.as_str() {
                    Some(s) if Outputs::NAMES.contains(&s) => names.push(s.to_string()),
                    Some(s) => r.violations.push(Violation::new(
                        "outputs",
                        format!("unknown output `{s}` ({})", Outputs::NAMES.join(", ")),
                    )),
                    None => r.violations.push(Violation::new("outputs", "entries must be strings")),
                }
            }
            Some(names)
        }
        Some(other) => {
            r.violations
                .push(Violation::new("outputs", format!("expected an array, got {}", other.type_str())));
            None
        }
    };

    let mut violations = r.violations;
    if !violations.is_empty() {
        return Err(violations);
    }
    let config = RunConfig {
        g: g.unwrap(),
        gamma_m: gamma_m.unwrap(),
        omega_m: omega_m.unwrap(),
        delta: delta.unwrap(),
        drive: drive.unwrap(),
        n_th: n_th.unwrap(),
        t_end,
        dt,
        scheme,
        outputs,
    };
    if let Err(e) = config.scenario().params() {
        violations.push(Violation::new("params", e.to_string()));
        return Err(violations);
    }
    Ok(config)
}

#[derive(Serialize)]
struct Emitted<'a> {
    g: f64,
    gamma_m: f64,
    omega_m: f64,
    delta: f64,
    #[serde(rename = "drive_E", skip_serializing_if = "Option::is_none")]
    drive_e: Option<f64>,
    #[serde(rename = "J", skip_serializing_if = "Option::is_none")]
    j: Option<f64>,
    n_th: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outputs: Option<&'a [String]>,
}

impl RunConfig {
    pub fn emit(&self) -> String {
        let (drive_e, j) = match self.drive {
            DriveSpec::Intensity(e) => (Some(e), None),
            DriveSpec::Coupling(j) => (None, Some(j)),
        };
        let doc = Emitted {
            g: self.g,
            gamma_m: self.gamma_m,
            omega_m: self.omega_m,
            delta: self.delta,
            drive_e,
            j,
            n_th: self.n_th,
            t_end: self.t_end,
            dt: self.dt,
            scheme: self.scheme.map(Scheme::name),
            outputs: self.outputs.as_deref(),
        };
        toml::to_string(&doc).expect("flat numeric document always serializes")
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            g: self.g,
            gamma_m: self.gamma_m,
            omega_m: self.omega_m,
            detuning: Detuning::Absolute(self.delta),
            drive: match self.drive {
                DriveSpec::Intensity(e) => Drive::Intensity { e },
                DriveSpec::Coupling(j) => Drive::Coupling { j },
            },
            n_th: self.n_th,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        let outputs = match &self.outputs {
            None => Outputs::default(),
            Some(names) => {
                let mut o = Outputs::none();
                for n in names {
                    o.enable(n);
                }
                o
            }
        };
        RunOptions {
            t_end: self.t_end,
            dt: self.dt,
            scheme: self.scheme.unwrap_or_default(),
            outputs,
            ..RunOptions::default()
        }
    }
}
