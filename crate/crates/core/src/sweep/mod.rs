//! Single runs, parameter sweeps and optimum-coupling searches.

mod persist;

pub use persist::{load_summary, persist_run, persist_table, RUNS_DIR, SWEEPS_DIR};

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gaussian::{purity, to_gaussian, wigner, GaussianState, ModeSelect};
use crate::model::{drive_displacement, ModelError, SystemParams};
use crate::observables::{
    detect_stabilization, phonon_parts, photon_parts, DetectorConfig, PhononDecomposition,
    PhotonDecomposition, Regime, StabilizationReport,
};
use crate::propagator::{propagate, IntegrationSettings, PropagationError, Record, Scheme, SecondMoments, Tracks};
use crate::spectrum::{noise_spectrum, two_time_correlation, Peak, SpectrumConfig, SpectrumResult};
use crate::Vec4;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serialize(String),
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("no cooling run in J ∈ [{lo}, {hi}]")]
    NotFound { lo: f64, hi: f64 },
}

/// How the drive strength is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drive {
    /// Drive intensity E.
    Intensity { e: f64 },
    /// Effective coupling J with E solved at fixed g.
    Coupling { j: f64 },
    /// Effective coupling J with g solved at fixed E.
    CouplingAtFixedDrive { j: f64, e: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Detuning {
    Absolute(f64),
    /// Δ/ω_m
    Relative(f64),
}

/// One parameter point before the drive and detuning are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub g: f64,
    pub gamma_m: f64,
    pub omega_m: f64,
    pub detuning: Detuning,
    pub drive: Drive,
    pub n_th: f64,
}

impl Scenario {
    /// g = 10⁻⁵, γ_m = 10⁻³, Δ = ω_m.
    pub fn resonant(omega_m: f64, drive: Drive, n_th: f64) -> Self {
        Self {
            g: 1e-5,
            gamma_m: 1e-3,
            omega_m,
            detuning: Detuning::Relative(1.0),
            drive,
            n_th,
        }
    }

    pub fn delta(&self) -> f64 {
        match self.detuning {
            Detuning::Absolute(d) => d,
            Detuning::Relative(r) => r * self.omega_m,
        }
    }

    pub fn params(&self) -> Result<SystemParams, ModelError> {
        let delta = self.delta();
        match self.drive {
            Drive::Intensity { e } => SystemParams::new(self.g, self.gamma_m, self.omega_m, delta, e, self.n_th),
            Drive::Coupling { j } => {
                SystemParams::with_coupling(self.g, self.gamma_m, self.omega_m, delta, j, self.n_th)
            }
            Drive::CouplingAtFixedDrive { j, e } => {
                let g = if j == 0.0 { 0.0 } else { j * self.omega_m / e };
                SystemParams::new(g, self.gamma_m, self.omega_m, delta, e, self.n_th)
            }
        }
    }

    pub fn with_coupling(mut self, j: f64) -> Self {
        self.drive = match self.drive {
            Drive::CouplingAtFixedDrive { e, .. } => Drive::CouplingAtFixedDrive { j, e },
            _ => Drive::Coupling { j },
        };
        self
    }
}

/// Which artifacts a run produces beyond the summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outputs {
    pub phonon: bool,
    pub photon: bool,
    pub displacement: bool,
    pub gaussian: bool,
    pub spectrum: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            phonon: true,
            photon: true,
            displacement: true,
            gaussian: true,
            spectrum: false,
        }
    }
}

impl Outputs {
    pub const NAMES: [&'static str; 5] = ["phonon", "photon", "displacement", "gaussian", "spectrum"];

    pub fn none() -> Self {
        Self {
            phonon: false,
            photon: false,
            displacement: false,
            gaussian: false,
            spectrum: false,
        }
    }

    /// Sets the named output; false for an unknown name.
    pub fn enable(&mut self, name: &str) -> bool {
        let slot = match name {
            "phonon" => &mut self.phonon,
            "photon" => &mut self.photon,
            "displacement" => &mut self.displacement,
            "gaussian" => &mut self.gaussian,
            "spectrum" => &mut self.spectrum,
            _ => return false,
        };
        *slot = true;
        true
    }

    pub fn names(&self) -> Vec<&'static str> {
        let flags = [self.phonon, self.photon, self.displacement, self.gaussian, self.spectrum];
        Self::NAMES.iter().zip(flags).filter(|(_, on)| *on).map(|(n, _)| *n).collect()
    }
}

/// Integration and post-processing settings shared by the runs of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Horizon; chosen from the expected relaxation rate when None.
    pub t_end: Option<f64>,
    /// Step; the resolution-based default when None.
    pub dt: Option<f64>,
    pub scheme: Scheme,
    pub detector: DetectorConfig,
    pub outputs: Outputs,
    pub spectrum: SpectrumConfig,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            t_end: None,
            dt: None,
            scheme: Scheme::MidpointExp,
            detector: DetectorConfig::default(),
            outputs: Outputs::default(),
            spectrum: SpectrumConfig::default(),
        }
    }
}

/// Horizon long enough for the slowest rotating-wave mode to decay by e^{-10}
/// and for three averaging windows, within [300, 4000]/κ.
pub fn auto_t_end(params: &SystemParams, detector: &DetectorConfig) -> f64 {
    let gm = params.gamma_m / params.kappa;
    let disc = (1.0 - gm).powi(2) - 4.0 * params.coupling().powi(2);
    let slow = if disc > 0.0 {
        0.5 * (1.0 + gm - disc.sqrt())
    } else {
        0.5 * (1.0 + gm)
    };
    let rate = 2.0 * slow.max(1e-12) * params.kappa;
    (10.0 / rate + 3.0 * detector.window).clamp(300.0, 4000.0)
}

impl RunOptions {
    pub fn settings(&self, params: &SystemParams) -> IntegrationSettings {
        let t_end = self.t_end.unwrap_or_else(|| auto_t_end(params, &self.detector));
        let dt = self.dt.unwrap_or_else(|| IntegrationSettings::default_step(params));
        IntegrationSettings::with_step(params, t_end, dt, self.scheme)
    }
}

/// One row of series.csv.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub n_m_total: f64,
    pub n_m_sys: f64,
    pub n_m_cav: f64,
    pub n_m_bs: f64,
    pub n_m_sq: f64,
    pub n_photon_total: f64,
    pub n_photon_coh: f64,
    pub q_m0: f64,
    pub p_m0: f64,
}

/// Everything persisted in a run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub scenario: Scenario,
    pub params: SystemParams,
    pub settings: IntegrationSettings,
    pub options: RunOptions,
    pub report: StabilizationReport,
    pub photon_report: StabilizationReport,
    pub final_phonon: Option<PhononDecomposition>,
    pub final_photon: Option<PhotonDecomposition>,
    pub final_state: Option<GaussianState>,
    pub initial_purity: f64,
    pub final_purity: Option<f64>,
    /// Final-window mean of √det σ_m − ½.
    pub thermal_equivalent: Option<f64>,
    pub diverged_at: Option<f64>,
    pub commutator_violation: Option<(f64, f64)>,
    pub peaks: Option<Vec<Peak>>,
}

impl RunSummary {
    pub fn regime(&self) -> Regime {
        self.report.regime
    }

    pub fn n_mf(&self) -> Option<f64> {
        self.report.n_mf
    }
}

/// Wigner function of the mechanical mode on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    /// Row-major over (q, p).
    pub w: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: RunSummary,
    pub series: Vec<SeriesRow>,
    pub spectrum: Option<SpectrumResult>,
    pub wigner: Option<WignerGrid>,
}

/// Content hash of everything that determines a run's output.
pub fn run_id(params: &SystemParams, settings: &IntegrationSettings, options: &RunOptions) -> String {
    let doc = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "params": params,
        "settings": settings,
        "detector": options.detector,
        "outputs": options.outputs,
        "spectrum": options.spectrum,
    });
    digest(&doc.to_string())
}

fn digest(text: &str) -> String {
    let hash = Sha256::digest(text.as_bytes());
    hex::encode(&hash[..8])
}

fn series_rows(rec: &Record, params: &SystemParams) -> (Vec<PhononDecomposition>, Vec<PhotonDecomposition>, Vec<SeriesRow>) {
    let n = rec.len();
    let mut phonon = Vec::with_capacity(n);
    let mut photon = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let t = rec.times[k];
        let ph = phonon_parts(t, &rec.transition[k], &rec.sources[k], params);
        let c = rec.mean[k];
        let pt = photon_parts(t, &rec.moments[k], &rec.sources[k], c[0], params);
        rows.push(SeriesRow {
            t,
            n_m_total: ph.n_total,
            n_m_sys: ph.n_s,
            n_m_cav: ph.n_n_cav,
            n_m_bs: ph.n_n_mech_bs,
            n_m_sq: ph.n_n_mech_sq,
            n_photon_total: pt.n_total,
            n_photon_coh: pt.n_coh,
            q_m0: std::f64::consts::SQRT_2 * c[2].re,
            p_m0: std::f64::consts::SQRT_2 * c[2].im,
        });
        phonon.push(ph);
        photon.push(pt);
    }
    (phonon, photon, rows)
}

/// Operator means in the lab frame: the coupling-induced mean plus the pure
/// drive displacement of the cavity.
pub fn lab_frame_mean(params: &SystemParams, t: f64, c: &Vec4) -> Vec4 {
    let u = drive_displacement(params, t);
    Vec4::new(c[0] + u, c[1] + u.conj(), c[2], c[3])
}

fn mechanical_wigner(state: &GaussianState, points: usize) -> WignerGrid {
    let sigma = state.mechanical_sigma();
    let mean = state.mechanical_mean();
    let half = 4.0 * sigma[(0, 0)].max(sigma[(1, 1)]).sqrt();
    let axis = |c: f64| -> Vec<f64> {
        (0..points)
            .map(|k| c - half + 2.0 * half * k as f64 / (points - 1) as f64)
            .collect()
    };
    let q = axis(mean[0]);
    let p = axis(mean[1]);
    let pts: Vec<[f64; 2]> = q.iter().flat_map(|&x| p.iter().map(move |&y| [x, y])).collect();
    let w = wigner(state, &pts, ModeSelect::Mechanical).unwrap_or_else(|_| vec![f64::NAN; pts.len()]);
    WignerGrid { q, p, w }
}

/// Propagates one scenario and post-processes it. Divergence is not an
/// error: the run is returned truncated with the heating regime.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<RunResult, SweepError> {
    let params = scenario.params()?;
    let settings = options.settings(&params);
    settings.validate()?;
    let id = run_id(&params, &settings, options);

    let rec = propagate(&params, &settings, Tracks::all());
    let (phonon, photon, series) = series_rows(&rec, &params);
    let dt_sample = settings.record_interval();
    let detector = options.detector.with_period(params.mechanical_period());

    // Without coupling the total stays at n_th while its split drifts, so
    // the total is what gets classified.
    let mut report = if params.coupling() == 0.0 {
        let total: Vec<f64> = phonon.iter().map(|x| x.n_total).collect();
        detect_stabilization(&total, dt_sample, None, params.n_th, &detector)
    } else {
        let noise: Vec<f64> = phonon.iter().map(PhononDecomposition::noise).collect();
        let system: Vec<f64> = phonon.iter().map(|x| x.n_s).collect();
        detect_stabilization(&noise, dt_sample, Some(&system), params.n_th, &detector)
    };
    let photon_noise: Vec<f64> = photon.iter().map(|x| x.n_noise).collect();
    let mut photon_report = detect_stabilization(&photon_noise, dt_sample, None, 0.0, &detector);
    if rec.diverged_at.is_some() {
        for r in [&mut report, &mut photon_report] {
            r.regime = Regime::Heating;
            r.growing = true;
            r.n_mf = None;
            r.t_s = None;
        }
    }

    let initial_purity = 1.0 / (1.0 + 2.0 * params.n_th);
    let state_at = |k: usize| -> Option<GaussianState> {
        let m = SecondMoments {
            t: rec.times[k],
            g: rec.moments[k],
        };
        to_gaussian(&m, &lab_frame_mean(&params, rec.times[k], &rec.mean[k])).ok()
    };
    let last = rec.len().checked_sub(1);
    let final_state = if rec.diverged_at.is_none() { last.and_then(state_at) } else { None };
    let final_purity = final_state.as_ref().map(|s| purity(s, ModeSelect::Mechanical));

    let thermal_equivalent = if report.regime.is_stable() {
        let w = ((report.window / dt_sample).round() as usize).clamp(1, rec.len());
        let vals: Vec<f64> = (rec.len() - w..rec.len())
            .filter_map(|k| state_at(k).map(|s| s.thermal_equivalent_occupation()))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    } else {
        None
    };

    let spectrum = if options.outputs.spectrum && report.regime.is_stable() {
        two_time_correlation(&params, &report, &settings, &options.spectrum)
            .ok()
            .and_then(|c| noise_spectrum(&c, &options.spectrum).ok())
    } else {
        None
    };
    let wigner = match (&final_state, options.outputs.gaussian) {
        (Some(s), true) => Some(mechanical_wigner(s, 101)),
        _ => None,
    };

    let summary = RunSummary {
        id,
        scenario: *scenario,
        params,
        settings,
        options: *options,
        report,
        photon_report,
        final_phonon: phonon.last().copied(),
        final_photon: photon.last().copied(),
        final_state,
        initial_purity,
        final_purity,
        thermal_equivalent,
        diverged_at: rec.diverged_at,
        commutator_violation: rec.commutator_violation,
        peaks: spectrum.as_ref().map(|s| s.peaks.clone()),
    };
    Ok(RunResult {
        summary,
        series,
        spectrum,
        wigner,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AxisParam {
    #[serde(rename = "J")]
    J,
    #[serde(rename = "omega_m")]
    OmegaM,
    #[serde(rename = "drive_E")]
    DriveE,
    #[serde(rename = "g")]
    G,
    #[serde(rename = "n_th")]
    NTh,
    #[serde(rename = "delta_ratio")]
    DeltaRatio,
    #[serde(rename = "gamma_m")]
    GammaM,
}

impl AxisParam {
    pub const ALL: [AxisParam; 7] = [
        Self::J,
        Self::OmegaM,
        Self::DriveE,
        Self::G,
        Self::NTh,
        Self::DeltaRatio,
        Self::GammaM,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::J => "J",
            Self::OmegaM => "omega_m",
            Self::DriveE => "drive_E",
            Self::G => "g",
            Self::NTh => "n_th",
            Self::DeltaRatio => "delta_ratio",
            Self::GammaM => "gamma_m",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// Scenario with this parameter set to `value`. For ω_m, a J-specified
    /// drive keeps J fixed and an intensity-specified drive keeps E fixed.
    pub fn apply(self, base: &Scenario, value: f64) -> Scenario {
        let mut s = *base;
        match self {
            Self::J => s = s.with_coupling(value),
            Self::OmegaM => s.omega_m = value,
            Self::DriveE => s.drive = Drive::Intensity { e: value },
            Self::G => s.g = value,
            Self::NTh => s.n_th = value,
            Self::DeltaRatio => s.detuning = Detuning::Relative(value),
            Self::GammaM => s.gamma_m = value,
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: AxisParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Used as the sweep id when nonempty.
    pub name: String,
    pub base: Scenario,
    pub axis: Axis,
    pub options: RunOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.axis.values.is_empty() {
            return Err(SweepError::InvalidSpec("axis has no values".into()));
        }
        if let Some(v) = self.axis.values.iter().find(|v| !v.is_finite()) {
            return Err(SweepError::InvalidSpec(format!("axis value {v} is not finite")));
        }
        Ok(())
    }

    pub fn settings_hash(&self) -> String {
        let doc = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "base": self.base,
            "axis": self.axis,
            "options": self.options,
        });
        digest(&doc.to_string())
    }

    pub fn id(&self) -> String {
        if self.name.is_empty() {
            self.settings_hash()
        } else {
            self.name.clone()
        }
    }
}

/// Where and how a sweep runs.
#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; the rayon default when None.
    pub workers: Option<usize>,
    /// Output root; nothing is written when None.
    pub out: Option<PathBuf>,
    /// Reuse manifests already present under the output root.
    pub resume: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub run_id: Option<String>,
    /// None when the run could not be set up; see `error`.
    pub regime: Option<Regime>,
    pub t_s: Option<f64>,
    pub n_mf: Option<f64>,
    pub n_s: Option<f64>,
    pub n_cav: Option<f64>,
    pub n_bs: Option<f64>,
    pub n_sq: Option<f64>,
    pub n_photon: Option<f64>,
    pub purity: Option<f64>,
    pub diverged_at: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn from_summary(axis_value: f64, s: &RunSummary) -> Self {
        let ph = s.final_phonon;
        Self {
            axis_value,
            run_id: Some(s.id.clone()),
            regime: Some(s.report.regime),
            t_s: s.report.t_s,
            n_mf: s.report.n_mf,
            n_s: ph.map(|x| x.n_s),
            n_cav: ph.map(|x| x.n_n_cav),
            n_bs: ph.map(|x| x.n_n_mech_bs),
            n_sq: ph.map(|x| x.n_n_mech_sq),
            n_photon: s.final_photon.map(|x| x.n_total),
            purity: s.final_purity,
            diverged_at: s.diverged_at,
            error: None,
        }
    }

    fn failed(axis_value: f64, error: String) -> Self {
        Self {
            axis_value,
            run_id: None,
            regime: None,
            t_s: None,
            n_mf: None,
            n_s: None,
            n_cav: None,
            n_bs: None,
            n_sq: None,
            n_photon: None,
            purity: None,
            diverged_at: None,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub id: String,
    pub axis: AxisParam,
    pub settings_hash: String,
    pub rows: Vec<SweepRow>,
}

fn run_point(spec: &SweepSpec, value: f64, opts: &SweepOptions) -> SweepRow {
    let scenario = spec.axis.param.apply(&spec.base, value);
    if opts.resume {
        if let (Some(out), Ok(params)) = (&opts.out, scenario.params()) {
            let settings = spec.options.settings(&params);
            let id = run_id(&params, &settings, &spec.options);
            if let Ok(summary) = load_summary(out, &id) {
                return SweepRow::from_summary(value, &summary);
            }
        }
    }
    match run_scenario(&scenario, &spec.options) {
        Ok(result) => {
            if let Some(out) = &opts.out {
                if let Err(e) = persist_run(out, &result) {
                    return SweepRow {
                        error: Some(e.to_string()),
                        ..SweepRow::from_summary(value, &result.summary)
                    };
                }
            }
            SweepRow::from_summary(value, &result.summary)
        }
        Err(e) => SweepRow::failed(value, e.to_string()),
    }
}

/// Runs every axis value; rows follow the axis order whatever the
/// completion order. Per-row failures are recorded in the row.
pub fn sweep(spec: &SweepSpec, opts: &SweepOptions) -> Result<SweepTable, SweepError> {
    spec.validate()?;
    let compute = || -> Vec<SweepRow> {
        spec.axis
            .values
            .par_iter()
            .map(|&v| run_point(spec, v, opts))
            .collect()
    };
    let rows = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| SweepError::InvalidSpec(format!("worker pool: {e}")))?
            .install(compute),
        None => compute(),
    };
    let table = SweepTable {
        id: spec.id(),
        axis: spec.axis.param,
        settings_hash: spec.settings_hash(),
        rows,
    };
    if let Some(out) = &opts.out {
        persist_table(out, &table)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub j: f64,
    pub n_mf: Option<f64>,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub j_opt: f64,
    pub n_mf_min: f64,
    /// Every run performed, in evaluation order.
    pub evaluations: Vec<Evaluation>,
    /// First coarse J that was not cooling, where the scan stopped.
    pub halted_at: Option<f64>,
}

/// Minimum of the stabilized occupation over J at fixed ω_m.
///
/// A coarse ascending scan of `coarse` points over `range` stops at the first
/// run that is not cooling; the best cooling point is then refined by
/// golden-section search inside its neighbouring interval until the bracket
/// is narrower than `tolerance`.
pub fn find_optimum_j(
    base: &Scenario,
    options: &RunOptions,
    range: (f64, f64),
    tolerance: f64,
    coarse: usize,
) -> Result<Optimum, SweepError> {
    let (lo, hi) = range;
    if !(lo < hi && lo >= 0.0 && tolerance > 0.0 && coarse >= 2) {
        return Err(SweepError::InvalidSpec(format!(
            "bad search range [{lo}, {hi}] / tolerance {tolerance} / {coarse} points"
        )));
    }
    let mut evaluations = Vec::new();
    let mut eval = |j: f64| -> Result<f64, SweepError> {
        let run = run_scenario(&base.with_coupling(j), options)?;
        let regime = run.summary.report.regime;
        let n_mf = run.summary.report.n_mf;
        evaluations.push(Evaluation { j, n_mf, regime });
        Ok(match (regime, n_mf) {
            (Regime::Cooling, Some(v)) => v,
            _ => f64::INFINITY,
        })
    };

    let grid: Vec<f64> = (0..coarse)
        .map(|k| lo + (hi - lo) * k as f64 / (coarse - 1) as f64)
        .collect();
    let mut values = Vec::new();
    let mut halted_at = None;
    for &j in &grid {
        let v = eval(j)?;
        if !v.is_finite() {
            halted_at = Some(j);
            break;
        }
        values.push(v);
    }
    let Some((best, _)) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
    else {
        return Err(SweepError::NotFound { lo, hi });
    };

    let mut a = if best > 0 { grid[best - 1] } else { grid[0] };
    let mut b = grid.get(best + 1).copied().unwrap_or(grid[best]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    if b - a > tolerance {
        let mut x1 = b - inv_phi * (b - a);
        let mut x2 = a + inv_phi * (b - a);
        let mut f1 = eval(x1)?;
        let mut f2 = eval(x2)?;
        while b - a > tolerance {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = eval(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = eval(x2)?;
            }
        }
    }
    let best = evaluations
        .iter()
        .filter(|e| e.regime == Regime::Cooling)
        .filter_map(|e| e.n_mf.map(|v| (e.j, v)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or(SweepError::NotFound { lo, hi })?;
    Ok(Optimum {
        j_opt: best.0,
        n_mf_min: best.1,
        evaluations,
        halted_at,
    })
}
