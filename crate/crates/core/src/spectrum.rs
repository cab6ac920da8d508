//! Stabilized two-time cavity correlation and its noise spectrum.
//!
//! C(τ) = [D(t+τ, t) G_n(t)]_21 by quantum regression: noise entering after
//! t is uncorrelated with c(t), so only the noise-accumulated moments at t
//! are carried forward. Because the stabilized state oscillates with the
//! mechanical period, C(τ) is averaged over start times spread across one
//! period.

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SystemParams;
use crate::observables::{Regime, StabilizationReport};
use crate::propagator::{advance_moments, step_at, IntegrationSettings};
use crate::{Mat4, Vec4, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("run is not stabilized (regime: {regime})")]
    Unstabilized { regime: Regime },
    #[error("correlation series needs at least two uniformly spaced samples")]
    TooShort,
    #[error("correlation samples are not uniformly spaced")]
    NonUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    /// Start times averaged over, evenly spread across one mechanical period.
    pub phases: usize,
    /// Fixed correlation length; when None the series is cut once the
    /// regressed vector has decayed by `decay`.
    pub tau_max: Option<f64>,
    pub decay: f64,
    /// Hard upper bound on τ when `tau_max` is None.
    pub tau_cap: f64,
    /// Zero-padding factor of the transform length.
    pub padding: usize,
    /// Local maxima above this fraction of the global maximum are peaks.
    pub peak_fraction: f64,
    /// Only frequencies with |ω| ≤ limit are reported.
    pub omega_limit: Option<f64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            phases: 8,
            tau_max: None,
            decay: 1e-4,
            tau_cap: 4000.0,
            padding: 4,
            peak_fraction: 0.05,
            omega_limit: None,
        }
    }
}

/// C(τ) on a uniform grid starting at τ = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub tau: Vec<f64>,
    pub c: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub omega: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub tau: Vec<f64>,
    pub c_tau: Vec<C64>,
    /// Frequencies in κ units, measured from the cavity resonance (the
    /// frame in which Δ = ω_m sits at zero offset).
    pub omega: Vec<f64>,
    pub c_omega: Vec<f64>,
    pub peaks: Vec<Peak>,
    /// Largest imaginary residue of the transform relative to its maximum.
    pub imag_residual: f64,
}

/// Two-time correlation after the stabilization time of `report`.
pub fn two_time_correlation(
    params: &SystemParams,
    report: &StabilizationReport,
    settings: &IntegrationSettings,
    config: &SpectrumConfig,
) -> Result<CorrelationSeries, SpectrumError> {
    let t_s = match (report.regime.is_stable(), report.t_s) {
        (true, Some(t)) => t,
        _ => {
            return Err(SpectrumError::Unstabilized {
                regime: report.regime,
            })
        }
    };
    Ok(correlation_from(params, t_s, settings, config))
}

/// Regression from fixed start time `t_s` without a stability check.
pub fn correlation_from(
    params: &SystemParams,
    t_s: f64,
    settings: &IntegrationSettings,
    config: &SpectrumConfig,
) -> CorrelationSeries {
    let dt = settings.dt;
    let scheme = settings.scheme;
    let phases = config.phases.max(1);
    let period_steps = (params.mechanical_period() / dt).round() as usize;
    let k0 = (t_s / dt).round() as usize;
    let starts: Vec<usize> = (0..phases).map(|p| k0 + p * period_steps / phases).collect();

    // noise-only moments from zero, captured at each start
    let mut g = Mat4::zeros();
    let mut columns = Vec::with_capacity(phases);
    let last = *starts.last().unwrap();
    let mut next = 0;
    for k in 0..=last {
        while next < phases && starts[next] == k {
            columns.push(g.column(0).into_owned());
            next += 1;
        }
        if k < last {
            let step = step_at(params, k as f64 * dt, dt, scheme);
            g = advance_moments(&g, &step, params, dt, scheme);
        }
    }

    // sample spacing resolving the fastest phase factor in M(t)
    let omega_max = (2.0 * params.omega_m)
        .max(params.delta.abs() + params.omega_m)
        .max(params.kappa);
    let stride = ((std::f64::consts::PI / (2.0 * omega_max) / dt).floor() as usize).max(1);
    let tau_steps = match config.tau_max {
        Some(t) => (t / dt).round() as usize,
        None => (config.tau_cap / dt).round() as usize,
    };

    let runs: Vec<Vec<C64>> = starts
        .par_iter()
        .zip(columns.par_iter())
        .map(|(&start, v0)| regress(params, settings, start, *v0, tau_steps, stride, config))
        .collect();

    let len = runs.iter().map(Vec::len).max().unwrap_or(1);
    let mut c = vec![C64::from(0.0); len];
    for run in &runs {
        for (acc, v) in c.iter_mut().zip(run) {
            *acc += v;
        }
    }
    let scale = 1.0 / runs.len() as f64;
    c.iter_mut().for_each(|z| *z *= scale);
    let tau = (0..len).map(|k| (k * stride) as f64 * dt).collect();
    CorrelationSeries { tau, c }
}

fn regress(
    params: &SystemParams,
    settings: &IntegrationSettings,
    start: usize,
    v0: Vec4,
    max_steps: usize,
    stride: usize,
    config: &SpectrumConfig,
) -> Vec<C64> {
    let dt = settings.dt;
    let norm0 = v0.norm();
    let mut out = vec![v0[1]];
    if norm0 == 0.0 {
        return out;
    }
    let mut v = v0;
    for k in 1..=max_steps {
        let t = (start + k - 1) as f64 * dt;
        v = step_at(params, t, dt, settings.scheme).full * v;
        if k % stride == 0 {
            out.push(v[1]);
            if config.tau_max.is_none() && v.norm() < config.decay * norm0 {
                break;
            }
        }
    }
    out
}

/// Fourier transform C(ω) = ∫ C(τ) e^{iωτ} dτ over the Hermitian extension
/// C(−τ) = C*(τ), followed by peak extraction.
pub fn noise_spectrum(corr: &CorrelationSeries, config: &SpectrumConfig) -> Result<SpectrumResult, SpectrumError> {
    let n = corr.c.len();
    if n < 2 || corr.tau.len() != n {
        return Err(SpectrumError::TooShort);
    }
    let dtau = corr.tau[1] - corr.tau[0];
    if !(dtau > 0.0) {
        return Err(SpectrumError::NonUniform);
    }
    for (k, &t) in corr.tau.iter().enumerate() {
        if (t - k as f64 * dtau).abs() > 1e-9 * dtau.max(t) {
            return Err(SpectrumError::NonUniform);
        }
    }

    let len = ((2 * n - 1) * config.padding.max(1)).next_power_of_two();
    let mut buf = vec![C64::from(0.0); len];
    buf[0] = C64::from(corr.c[0].re);
    for k in 1..n {
        buf[k] = corr.c[k];
        buf[len - k] = corr.c[k].conj();
    }
    // e^{+iωτ} kernel
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);

    let domega = std::f64::consts::TAU / (len as f64 * dtau);
    let half = len / 2;
    let mut omega = Vec::with_capacity(len);
    let mut values = Vec::with_capacity(len);
    let mut imag: f64 = 0.0;
    let mut peak_abs: f64 = 0.0;
    for m in 0..len {
        // ascending frequency order
        let idx = (m + half) % len;
        let signed = if idx >= half { idx as i64 - len as i64 } else { idx as i64 };
        let w = signed as f64 * domega;
        let z = buf[idx] * dtau;
        imag = imag.max(z.im.abs());
        peak_abs = peak_abs.max(z.re.abs());
        if config.omega_limit.map_or(true, |lim| w.abs() <= lim) {
            omega.push(w);
            values.push(z.re);
        }
    }
    let peaks = find_peaks(&omega, &values, config.peak_fraction);
    Ok(SpectrumResult {
        tau: corr.tau.clone(),
        c_tau: corr.c.clone(),
        omega,
        c_omega: values,
        peaks,
        imag_residual: if peak_abs > 0.0 { imag / peak_abs } else { 0.0 },
    })
}

/// Local maxima above `fraction` of the global maximum. Flat tops count
/// once, at their centre.
pub fn find_peaks(omega: &[f64], values: &[f64], fraction: f64) -> Vec<Peak> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let threshold = fraction * max;
    let mut peaks = Vec::new();
    let n = values.len();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] && values[i] >= threshold {
                let mid = (i + j) / 2;
                peaks.push(Peak {
                    omega: omega[mid],
                    height: values[mid],
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}
