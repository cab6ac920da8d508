//! Radiation-pressure cooling of a mechanical oscillator as a dynamical
//! process.
//!
//! The linearized optomechanical system is propagated through time-ordered
//! transition matrices. Thermal phonon and cavity photon numbers are split
//! into system-operator, noise, and coherent-drive parts; closed-form cooling
//! limits, noise spectra, and parameter sweeps are built on top.
//!
//! Units: every rate is measured in units of the cavity damping rate κ and
//! every time in units of 1/κ.

pub mod analytics;
pub mod gaussian;
pub mod model;
pub mod observables;
pub mod propagator;
pub mod spectrum;
pub mod sweep;

use nalgebra::{Matrix4, Vector4};
pub use num_complex::Complex64 as C64;

/// 4×4 complex matrix over `(a, a†, b, b†)`.
pub type Mat4 = Matrix4<C64>;
/// Complex 4-vector over `(a, a†, b, b†)`.
pub type Vec4 = Vector4<C64>;

/// Largest entry modulus of a complex matrix or vector.
pub fn max_abs<R: nalgebra::Dim, Cc: nalgebra::Dim, S>(m: &nalgebra::Matrix<C64, R, Cc, S>) -> f64
where
    S: nalgebra::RawStorage<C64, R, Cc>,
{
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub use model::{SystemParams, DimensionlessParams};
pub use propagator::{IntegrationSettings, Scheme};
