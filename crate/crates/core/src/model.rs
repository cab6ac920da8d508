//! Time-dependent ingredients of the linearized optomechanical dynamics.
//!
//! All rates are stored in units of the cavity damping rate κ, which is
//! therefore exactly 1. The operator vector is ordered `(a, a†, b, b†)`
//! throughout the crate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Mat4, Vec4, C64};

/// Ratio g/ω_m above which the neglected cubic coupling is no longer small.
pub const WEAK_COUPLING_LIMIT: f64 = 1e-3;

/// Below this |Δ·t| the drive kernel switches to its Taylor branch.
pub const KERNEL_SERIES_SWITCH: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> ModelError {
    ModelError::InvalidParameter {
        name,
        value,
        reason,
    }
}

/// Physical rates of the optomechanical system in units of κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Single-photon optomechanical coupling g.
    pub g: f64,
    /// Cavity damping rate; always 1.
    pub kappa: f64,
    /// Mechanical damping rate γ_m.
    pub gamma_m: f64,
    /// Mechanical frequency ω_m.
    pub omega_m: f64,
    /// Drive detuning Δ = ω_c − ω_l.
    pub delta: f64,
    /// Drive intensity E.
    pub drive_e: f64,
    /// Thermal occupation of the mechanical reservoir.
    pub n_th: f64,
}

impl SystemParams {
    pub fn new(
        g: f64,
        gamma_m: f64,
        omega_m: f64,
        delta: f64,
        drive_e: f64,
        n_th: f64,
    ) -> Result<Self, ModelError> {
        let params = Self {
            g,
            kappa: 1.0,
            gamma_m,
            omega_m,
            delta,
            drive_e,
            n_th,
        };
        params.validate()?;
        Ok(params)
    }

    /// Builds parameters from the effective coupling J = (g/ω_m)(E/κ),
    /// solving for the drive intensity at fixed g.
    pub fn with_coupling(
        g: f64,
        gamma_m: f64,
        omega_m: f64,
        delta: f64,
        coupling: f64,
        n_th: f64,
    ) -> Result<Self, ModelError> {
        if coupling != 0.0 && g <= 0.0 {
            return Err(invalid("g", g, "a nonzero J needs g > 0"));
        }
        let drive_e = if coupling == 0.0 {
            0.0
        } else {
            coupling * omega_m / g
        };
        Self::new(g, gamma_m, omega_m, delta, drive_e, n_th)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.kappa != 1.0 {
            return Err(invalid("kappa", self.kappa, "rates are stored in units of kappa"));
        }
        let checks: [(&'static str, f64); 5] = [
            ("g", self.g),
            ("gamma_m", self.gamma_m),
            ("omega_m", self.omega_m),
            ("drive_E", self.drive_e),
            ("n_th", self.n_th),
        ];
        for (name, value) in checks {
            if !value.is_finite() {
                return Err(invalid(name, value, "must be finite"));
            }
            if value < 0.0 {
                return Err(invalid(name, value, "must be nonnegative"));
            }
        }
        if !self.delta.is_finite() {
            return Err(invalid("delta", self.delta, "must be finite"));
        }
        if self.omega_m <= 0.0 {
            return Err(invalid("omega_m", self.omega_m, "must be positive"));
        }
        Ok(())
    }

    /// Whether g/ω_m is small enough for the linear model to apply.
    pub fn is_weak_coupling(&self) -> bool {
        self.g / self.omega_m <= WEAK_COUPLING_LIMIT
    }

    /// Effective coupling J = (g/ω_m)(E/κ).
    pub fn coupling(&self) -> f64 {
        self.g * self.drive_e / (self.omega_m * self.kappa)
    }

    /// Period of the mechanical oscillation, 2π/ω_m.
    pub fn mechanical_period(&self) -> f64 {
        std::f64::consts::TAU / self.omega_m
    }

    /// True when the drive sits on the beam-splitter resonance Δ = ω_m.
    pub fn is_resonant(&self) -> bool {
        (self.delta - self.omega_m).abs() <= 1e-12 * self.omega_m
    }
}

/// Dimensionless groups of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    /// J = (g/ω_m)(E/κ)
    pub coupling: f64,
    /// G_m = g/κ
    pub g_m: f64,
    /// ℰ = E/κ
    pub drive: f64,
    /// s_m = ω_m/κ
    pub sideband_resolution: f64,
    /// Q = ω_m/γ_m
    pub quality: f64,
    /// δ = Δ/ω_m
    pub delta_rel: f64,
    /// Γ_m = γ_m/κ
    pub gamma_rel: f64,
}

pub fn dimensionless(params: &SystemParams) -> Result<DimensionlessParams, ModelError> {
    params.validate()?;
    if params.gamma_m == 0.0 {
        return Err(invalid("gamma_m", 0.0, "quality factor is undefined"));
    }
    let kappa = params.kappa;
    let g_m = params.g / kappa;
    let drive = params.drive_e / kappa;
    let s_m = params.omega_m / kappa;
    Ok(DimensionlessParams {
        coupling: g_m * drive / s_m,
        g_m,
        drive,
        sideband_resolution: s_m,
        quality: params.omega_m / params.gamma_m,
        delta_rel: params.delta / params.omega_m,
        gamma_rel: params.gamma_m / kappa,
    })
}

/// f(t) = (e^{iΔt} − 1)/Δ, continuous through Δ = 0.
pub fn drive_kernel(t: f64, delta: f64) -> C64 {
    let x = delta * t;
    if x.abs() < KERNEL_SERIES_SWITCH {
        // i t (1 + iΔt/2 − (Δt)²/6)
        C64::i() * t * C64::new(1.0 - x * x / 6.0, 0.5 * x)
    } else {
        // e^{ix} − 1 = −2 sin²(x/2) + i sin x, without cancellation
        let half = (0.5 * x).sin();
        C64::new(-2.0 * half * half, x.sin()) / delta
    }
}

/// Dynamical matrix M(t) acting on `(a, a†, b, b†)`.
pub fn dynamical_matrix(params: &SystemParams, t: f64) -> Mat4 {
    let ge = params.g * params.drive_e;
    let f = drive_kernel(t, params.delta) * ge;
    let fc = f.conj();
    let rot = Complex64::from_polar(1.0, params.omega_m * t);
    let rot_c = rot.conj();
    let k = C64::from(-params.kappa);
    let gm = C64::from(-params.gamma_m);
    let z = C64::from(0.0);
    Mat4::new(
        k, z, f * rot_c, f * rot, //
        z, k, fc * rot_c, fc * rot, //
        -fc * rot, f * rot, gm, z, //
        fc * rot_c, -f * rot_c, z, gm,
    )
}

/// Coherent drive vector λ(t).
pub fn coherent_drive(params: &SystemParams, t: f64) -> Vec4 {
    let fe = drive_kernel(t, params.delta) * params.drive_e;
    let cav = C64::i() * params.kappa * fe;
    let mech = C64::i() * params.g * fe.norm_sqr() * Complex64::from_polar(1.0, params.omega_m * t);
    Vec4::new(cav, cav.conj(), mech, mech.conj())
}

/// Displacement −i f(t) E imparted by the drive alone; the lab-frame cavity
/// amplitude is this plus the mean of `a` in the displaced frame.
pub fn drive_displacement(params: &SystemParams, t: f64) -> C64 {
    -C64::i() * drive_kernel(t, params.delta) * params.drive_e
}

/// One of the three independent reservoir channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    /// Vacuum cavity noise, N_12 = 2κ.
    Cavity,
    /// Mechanical noise entering through N_43 = 2γ_m n_th.
    MechanicalBs,
    /// Mechanical noise entering through N_34 = 2γ_m (n_th + 1).
    MechanicalSq,
}

impl NoiseSource {
    pub const ALL: [NoiseSource; 3] = [Self::Cavity, Self::MechanicalBs, Self::MechanicalSq];

    /// Zero-based `(row, col)` of the single nonzero entry.
    pub fn entry(self) -> (usize, usize) {
        match self {
            Self::Cavity => (0, 1),
            Self::MechanicalBs => (3, 2),
            Self::MechanicalSq => (2, 3),
        }
    }
}

/// Instantaneous noise correlations ⟨η_i(t) η_j(t′)⟩ = N_ij δ(t − t′).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMoments {
    pub n: Mat4,
}

impl NoiseMoments {
    pub fn strength(params: &SystemParams, source: NoiseSource) -> f64 {
        match source {
            NoiseSource::Cavity => 2.0 * params.kappa,
            NoiseSource::MechanicalBs => 2.0 * params.gamma_m * params.n_th,
            NoiseSource::MechanicalSq => 2.0 * params.gamma_m * (params.n_th + 1.0),
        }
    }

    /// Matrix with only the entry belonging to `source`.
    pub fn single(params: &SystemParams, source: NoiseSource) -> Self {
        let mut n = Mat4::zeros();
        let (i, j) = source.entry();
        n[(i, j)] = C64::from(Self::strength(params, source));
        Self { n }
    }
}

pub fn noise_moments(params: &SystemParams) -> NoiseMoments {
    let mut n = Mat4::zeros();
    for source in NoiseSource::ALL {
        let (i, j) = source.entry();
        n[(i, j)] = C64::from(NoiseMoments::strength(params, source));
    }
    NoiseMoments { n }
}

/// Swap permutation (1↔2, 3↔4) applied as P·conj(X)·P.
pub fn conjugate_partner(m: &Mat4) -> Mat4 {
    const P: [usize; 4] = [1, 0, 3, 2];
    Mat4::from_fn(|i, j| m[(P[i], P[j])].conj())
}

pub fn conjugate_partner_vec(v: &Vec4) -> Vec4 {
    Vec4::new(v[1].conj(), v[0].conj(), v[3].conj(), v[2].conj())
}
