//! Phonon and photon number decompositions, stabilization detection and
//! regime classification.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{drive_displacement, NoiseSource, SystemParams};
use crate::propagator::{initial_moments, MeanTrajectory, MomentSeries, NoiseSplit, TransitionGrid};
use crate::Mat4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("moment series carries no per-channel noise parts")]
    MissingSources,
}

/// Thermal phonon number split into the system-operator part and the three
/// reservoir-noise parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhononDecomposition {
    pub t: f64,
    pub n_s: f64,
    /// Cavity noise entering through the squeezing channel.
    pub n_n_cav: f64,
    /// Mechanical noise through the beam-splitter channel.
    pub n_n_mech_bs: f64,
    /// Mechanical noise through the squeezing channel.
    pub n_n_mech_sq: f64,
    pub n_total: f64,
}

impl PhononDecomposition {
    pub fn noise(&self) -> f64 {
        self.n_n_cav + self.n_n_mech_bs + self.n_n_mech_sq
    }
}

/// Cavity photon number split into system, noise and coherent parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhotonDecomposition {
    pub t: f64,
    pub n_sys: f64,
    pub n_noise: f64,
    pub n_coh: f64,
    pub n_total: f64,
}

impl PhotonDecomposition {
    /// Photon number with the coherent amplitude removed.
    pub fn thermal(&self) -> f64 {
        self.n_sys + self.n_noise
    }
}

/// System-operator part D G(0) Dᵀ of the second moments.
pub fn system_moments(d: &Mat4, params: &SystemParams) -> Mat4 {
    d * initial_moments(params) * d.transpose()
}

/// Decomposition at a single time from D(t,0) and the per-channel noise
/// moments.
pub fn phonon_parts(t: f64, d: &Mat4, split: &NoiseSplit, params: &SystemParams) -> PhononDecomposition {
    let n_s = system_moments(d, params)[(3, 2)].re;
    let part = |s: NoiseSource| split.get(s)[(3, 2)].re;
    let (cav, bs, sq) = (
        part(NoiseSource::Cavity),
        part(NoiseSource::MechanicalBs),
        part(NoiseSource::MechanicalSq),
    );
    PhononDecomposition {
        t,
        n_s,
        n_n_cav: cav,
        n_n_mech_bs: bs,
        n_n_mech_sq: sq,
        n_total: n_s + cav + bs + sq,
    }
}

fn same_times(a: &[f64], b: impl Iterator<Item = f64>, what: &str) -> Result<(), ObservableError> {
    let mut n = 0;
    for (i, tb) in b.enumerate() {
        match a.get(i) {
            Some(&ta) if (ta - tb).abs() <= 1e-9 * ta.abs().max(1.0) => n += 1,
            _ => {
                return Err(ObservableError::GridMismatch(format!(
                    "{what}: sample {i} at t = {tb} has no counterpart"
                )))
            }
        }
    }
    if n != a.len() {
        return Err(ObservableError::GridMismatch(format!(
            "{what}: {} samples against {n}",
            a.len()
        )));
    }
    Ok(())
}

/// Phonon decomposition over a run. The noise parts come from the three
/// single-channel Lyapunov systems carried by `moments`; n_s is evaluated
/// from the stored D(t,0).
pub fn phonon_decomposition(
    moments: &MomentSeries,
    grid: &TransitionGrid,
    params: &SystemParams,
) -> Result<Vec<PhononDecomposition>, ObservableError> {
    let sources = moments.sources.as_ref().ok_or(ObservableError::MissingSources)?;
    same_times(&grid.times, moments.times(), "moments vs transition grid")?;
    Ok(grid
        .times
        .iter()
        .zip(&grid.d0)
        .zip(sources)
        .map(|((&t, d), split)| phonon_parts(t, d, split, params))
        .collect())
}

/// Photon decomposition at a single time.
pub fn photon_parts(
    t: f64,
    g: &Mat4,
    split: &NoiseSplit,
    cavity_mean: crate::C64,
    params: &SystemParams,
) -> PhotonDecomposition {
    let n_noise = split.total()[(1, 0)].re;
    let n_sys = g[(1, 0)].re - n_noise;
    let n_coh = (drive_displacement(params, t) + cavity_mean).norm_sqr();
    PhotonDecomposition {
        t,
        n_sys,
        n_noise,
        n_coh,
        n_total: n_sys + n_noise + n_coh,
    }
}

/// Photon decomposition over a run: n_sys and n_noise from the moment
/// series, n_coh = |u(t) + ⟨a(t)⟩|² with u the pure-drive displacement.
pub fn photon_decomposition(
    moments: &MomentSeries,
    mean: &MeanTrajectory,
    params: &SystemParams,
) -> Result<Vec<PhotonDecomposition>, ObservableError> {
    let sources = moments.sources.as_ref().ok_or(ObservableError::MissingSources)?;
    same_times(&mean.times, moments.times(), "moments vs mean trajectory")?;
    Ok(moments
        .moments
        .iter()
        .zip(sources)
        .zip(&mean.mean)
        .map(|((m, split), c)| photon_parts(m.t, &m.g, split, c[0], params))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Stabilized below the bath occupation.
    Cooling,
    /// Stabilized at or above the bath occupation, e.g. the zero-temperature
    /// back-action floor.
    Elevated,
    /// Unbounded growth or a non-finite series.
    Heating,
    /// Bounded but persistently oscillating window means.
    Transitional,
    /// Series constant at the bath occupation.
    Equilibrium,
    /// Too short, or not settled by the end of the series.
    Inconclusive,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Self::Cooling => "cooling",
            Self::Elevated => "elevated",
            Self::Heating => "heating",
            Self::Transitional => "transitional",
            Self::Equilibrium => "equilibrium",
            Self::Inconclusive => "inconclusive",
        }
    }

    pub fn is_stable(self) -> bool {
        matches!(self, Self::Cooling | Self::Elevated | Self::Equilibrium)
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Averaging window (1/κ).
    pub window: f64,
    /// Relative change between adjacent window means counted as settled.
    pub tolerance: f64,
    /// Upper bound on the system-operator part at t_s, relative to the
    /// reference occupation.
    pub system_fraction: f64,
    /// Offset between successive candidate window starts (1/κ).
    pub stride: f64,
    /// Relative peak-to-peak spread of window means flagged as oscillating.
    pub oscillation: f64,
    /// Consecutive increasing window means that signal heating.
    pub growth_windows: usize,
    /// Growth factor over the running minimum that signals heating.
    pub growth_factor: f64,
    /// When set, the window is rounded to a whole number of these periods.
    pub period_hint: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window: 50.0,
            tolerance: 1e-3,
            system_fraction: 1e-2,
            stride: 0.25,
            oscillation: 0.1,
            growth_windows: 3,
            growth_factor: 2.0,
            period_hint: None,
        }
    }
}

impl DetectorConfig {
    pub fn with_period(mut self, period: f64) -> Self {
        self.period_hint = Some(period);
        self
    }

    /// Window actually used: a whole number of periods when a hint is set.
    pub fn effective_window(&self) -> f64 {
        match self.period_hint {
            Some(p) if p > 0.0 && p < self.window => (self.window / p).round() * p,
            _ => self.window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizationReport {
    /// Stabilization time (1/κ); None when the series never settles.
    pub t_s: Option<f64>,
    /// Mean over the final window; None for heating runs.
    pub n_mf: Option<f64>,
    pub regime: Regime,
    /// Window used (1/κ).
    pub window: f64,
    /// Unbounded-growth flag.
    pub growing: bool,
    /// Peak-to-peak spread of window means after t_s relative to their mean.
    pub oscillation: f64,
}

/// Prefix sums for O(1) window means.
struct Prefix(Vec<f64>);

impl Prefix {
    fn new(xs: &[f64]) -> Self {
        let mut acc = Vec::with_capacity(xs.len() + 1);
        let mut s = 0.0;
        acc.push(0.0);
        for &x in xs {
            s += x;
            acc.push(s);
        }
        Self(acc)
    }

    fn mean(&self, start: usize, len: usize) -> f64 {
        (self.0[start + len] - self.0[start]) / len as f64
    }
}

/// Scans a sampled occupation series for the first settled window pair.
///
/// Window pairs [s, s+W) and [s+W, s+2W) are compared for s on a grid of
/// `stride`; t_s is the first s where the means agree within `tolerance`
/// and, if `system` is given, the system-operator part at s is below
/// `system_fraction` of the reference occupation (or of the settled value
/// when the reference is zero). `reference` is the bath occupation n_th.
pub fn detect_stabilization(
    series: &[f64],
    dt_sample: f64,
    system: Option<&[f64]>,
    reference: f64,
    config: &DetectorConfig,
) -> StabilizationReport {
    let window = config.effective_window();
    let w = ((window / dt_sample).round() as usize).max(1);
    let mut report = StabilizationReport {
        t_s: None,
        n_mf: None,
        regime: Regime::Inconclusive,
        window: w as f64 * dt_sample,
        growing: false,
        oscillation: 0.0,
    };

    if series.iter().any(|x| !x.is_finite()) {
        report.regime = Regime::Heating;
        report.growing = true;
        return report;
    }
    let n = series.len();
    if n < 3 * w {
        return report;
    }
    let prefix = Prefix::new(series);
    if !prefix.0[n].is_finite() {
        report.regime = Regime::Heating;
        report.growing = true;
        return report;
    }

    // non-overlapping block means, aligned to the end of the series
    let n_blocks = n / w;
    let first = n - n_blocks * w;
    let blocks: Vec<f64> = (0..n_blocks).map(|k| prefix.mean(first + k * w, w)).collect();

    if growth_detected(&blocks, config) {
        report.regime = Regime::Heating;
        report.growing = true;
        return report;
    }

    let stride = ((config.stride / dt_sample).round() as usize).max(1);
    let mut s = 0;
    while s + 2 * w <= n {
        let m1 = prefix.mean(s, w);
        let m2 = prefix.mean(s + w, w);
        let scale = m2.abs().max(f64::MIN_POSITIVE);
        let settled = (m2 - m1).abs() / scale < config.tolerance;
        let small_system = match system {
            None => true,
            Some(sys) => {
                let floor = if reference > 0.0 { reference } else { m2.abs() };
                sys.get(s).map_or(false, |&v| v.abs() < config.system_fraction * floor)
            }
        };
        if settled && small_system {
            report.t_s = Some(s as f64 * dt_sample);
            break;
        }
        s += stride;
    }

    let final_mean = prefix.mean(n - w, w);
    report.n_mf = Some(final_mean);

    let tail: Vec<f64> = match report.t_s {
        Some(ts) => {
            let start = (ts / dt_sample).round() as usize;
            let k0 = blocks
                .iter()
                .enumerate()
                .position(|(k, _)| first + k * w >= start)
                .unwrap_or(n_blocks);
            blocks[k0.min(n_blocks.saturating_sub(2))..].to_vec()
        }
        None => blocks[n_blocks / 2..].to_vec(),
    };
    report.oscillation = relative_spread(&tail);

    let constant = series
        .iter()
        .all(|&x| (x - reference).abs() <= 1e-6 * reference.abs().max(1e-300));
    report.regime = if constant {
        Regime::Equilibrium
    } else if report.oscillation > config.oscillation {
        Regime::Transitional
    } else if report.t_s.is_none() {
        Regime::Inconclusive
    } else if final_mean < reference {
        Regime::Cooling
    } else {
        Regime::Elevated
    };
    report
}

/// Window means still rising at the end of the series: the last
/// `growth_windows` steps increase, the final mean is the largest seen and
/// exceeds `growth_factor` times the smallest.
fn growth_detected(blocks: &[f64], config: &DetectorConfig) -> bool {
    let need = config.growth_windows;
    if blocks.len() < need + 1 {
        return false;
    }
    let tail = &blocks[blocks.len() - need - 1..];
    let rising = tail.windows(2).all(|p| p[1] > p[0]);
    let last = blocks[blocks.len() - 1];
    let lo = blocks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = blocks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    rising && last >= hi && last > config.growth_factor * lo
}

fn relative_spread(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if mean.abs() == 0.0 {
        return if hi > lo { f64::INFINITY } else { 0.0 };
    }
    (hi - lo) / mean.abs()
}
