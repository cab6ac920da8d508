//! Closed-form results: the large sideband-resolution cooling limit, the
//! steady-state predictions of the rate-equation picture, the classical
//! sideband series of the cavity field, and strong-coupling mode splitting.

mod bessel;

pub use bessel::{bessel_j, bessel_j_upto};

use serde::Serialize;
use thiserror::Error;

use crate::model::SystemParams;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("Γ_m = {0} lies outside 0 < Γ_m < 1")]
    OutOfModel(f64),
    #[error("{name} = {value} must be nonnegative and finite")]
    Negative { name: &'static str, value: f64 },
}

/// Eigenvalue data of the resonant rotating-wave dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitEigenData {
    pub lambda_plus: C64,
    pub lambda_minus: C64,
    pub eta_plus: C64,
    pub eta_minus: C64,
    pub gamma_m: f64,
    pub coupling: f64,
}

impl LimitEigenData {
    /// λ_± = ½(−1 − Γ_m ± s), η_± = −1 + Γ_m ± s with s = √((1−Γ_m)² − 4J²).
    pub fn new(coupling: f64, gamma_m: f64) -> Self {
        let s = C64::from((1.0 - gamma_m).powi(2) - 4.0 * coupling * coupling).sqrt();
        let base = C64::from(-1.0 - gamma_m);
        Self {
            lambda_plus: (base + s) * 0.5,
            lambda_minus: (base - s) * 0.5,
            eta_plus: C64::from(-1.0 + gamma_m) + s,
            eta_minus: C64::from(-1.0 + gamma_m) - s,
            gamma_m,
            coupling,
        }
    }

    pub fn is_weak(&self) -> bool {
        2.0 * self.coupling < 1.0 - self.gamma_m
    }
}

/// Coupling at which the limiting occupation jumps, J = ½(1 − Γ_m).
pub fn jump_coupling(gamma_m: f64) -> f64 {
    0.5 * (1.0 - gamma_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitPhonon {
    pub value: f64,
    /// Strong-coupling branch, Γ_m n_th.
    pub strong: bool,
    /// Evaluated exactly at the jump coupling.
    pub jump_point: bool,
}

fn check_limit_inputs(coupling: f64, gamma_m: f64, n_th: f64) -> Result<(), AnalyticsError> {
    if !(gamma_m > 0.0 && gamma_m < 1.0) {
        return Err(AnalyticsError::OutOfModel(gamma_m));
    }
    for (name, value) in [("J", coupling), ("n_th", n_th)] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(AnalyticsError::Negative { name, value });
        }
    }
    Ok(())
}

/// Stabilized occupation for ω_m/κ → ∞ at Δ = ω_m. Below the jump the
/// eigenvalue formula is used; at and above it the constant Γ_m n_th.
pub fn limit_phonon(coupling: f64, gamma_m: f64, n_th: f64) -> Result<LimitPhonon, AnalyticsError> {
    check_limit_inputs(coupling, gamma_m, n_th)?;
    let jump = jump_coupling(gamma_m);
    if coupling >= jump {
        return Ok(LimitPhonon {
            value: gamma_m * n_th,
            strong: true,
            jump_point: coupling == jump,
        });
    }
    Ok(LimitPhonon {
        value: weak_branch(&LimitEigenData::new(coupling, gamma_m), n_th),
        strong: false,
        jump_point: false,
    })
}

fn weak_branch(e: &LimitEigenData, n_th: f64) -> f64 {
    let (lp, lm, ep, em) = (e.lambda_plus, e.lambda_minus, e.eta_plus, e.eta_minus);
    let cross = 4.0 * (ep.conj() * em / (lp.conj() + lm)).re;
    let bracket = cross - ep.norm_sqr() / lm.re - em.norm_sqr() / lp.re;
    e.gamma_m * n_th * bracket / (ep - em).norm_sqr()
}

/// Left limit of the weak branch at the jump, Γ_m n_th [2/u + 2(1−Γ_m)/u² +
/// (1−Γ_m)²/u³] with u = 1 + Γ_m.
pub fn jump_left_limit(gamma_m: f64, n_th: f64) -> f64 {
    let u = 1.0 + gamma_m;
    let v = 1.0 - gamma_m;
    gamma_m * n_th * (2.0 / u + 2.0 * v / u.powi(2) + v * v / u.powi(3))
}

/// Stationary occupation of the resonant rotating-wave dynamics,
/// Γ n_th (1+Γ+J²) / (Γ(1+Γ+J²) + J²), valid on both sides of the jump.
/// It coincides with [`limit_phonon`] below the jump and is continuous
/// across it.
pub fn rotating_wave_phonon(coupling: f64, gamma_m: f64, n_th: f64) -> Result<f64, AnalyticsError> {
    check_limit_inputs(coupling, gamma_m, n_th)?;
    let j2 = coupling * coupling;
    let a = 1.0 + gamma_m + j2;
    Ok(gamma_m * n_th * a / (gamma_m * a + j2))
}

/// |α|² = (E/κ)² / (1 + (Δ/κ)²)
pub fn steady_amplitude_sq(params: &SystemParams) -> f64 {
    let k = params.kappa;
    (params.drive_e / k).powi(2) / (1.0 + (params.delta / k).powi(2))
}

/// A_± = g²|α|² · 2κ / (κ² + (Δ ± ω_m)²)
pub fn transition_rates(params: &SystemParams) -> (f64, f64) {
    let k = params.kappa;
    let base = params.g.powi(2) * steady_amplitude_sq(params) * 2.0 * k;
    let rate = |w: f64| base / (k * k + w * w);
    (
        rate(params.delta + params.omega_m),
        rate(params.delta - params.omega_m),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorPrediction {
    pub gamma_opt: f64,
    pub n_m0: f64,
    pub alpha_sq: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub n_mf_weak: f64,
    pub n_mf_strong: f64,
}

/// Steady state of the rate-equation picture built on a time-independent
/// cavity amplitude.
pub fn prior_weak_prediction(params: &SystemParams) -> PriorPrediction {
    let k = params.kappa;
    let alpha_sq = steady_amplitude_sq(params);
    let res = (k / (2.0 * params.omega_m)).powi(2);
    let gamma_opt = 2.0 * params.g.powi(2) * alpha_sq / k / (1.0 + res);
    let n_m0 = res;
    let damping = 2.0 * params.gamma_m;
    let n_mf_weak = if gamma_opt + damping > 0.0 {
        (gamma_opt * n_m0 + damping * params.n_th) / (gamma_opt + damping)
    } else {
        params.n_th
    };
    let (a_plus, a_minus) = transition_rates(params);
    PriorPrediction {
        gamma_opt,
        n_m0,
        alpha_sq,
        a_plus,
        a_minus,
        n_mf_weak,
        n_mf_strong: prior_strong_prediction(params),
    }
}

/// κ²/(4ω_m²) + g²|α|²/(2ω_m²)
pub fn prior_strong_prediction(params: &SystemParams) -> f64 {
    let w2 = params.omega_m.powi(2);
    params.kappa.powi(2) / (4.0 * w2) + params.g.powi(2) * steady_amplitude_sq(params) / (2.0 * w2)
}

/// Fourier coefficients of the cavity mean field driven by a mechanical
/// orbit ⟨b⟩ = β e^{−iω_m t} with real β.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SidebandSeries {
    pub n_max: usize,
    pub omega_m: f64,
    /// Modulation index 2gβ/ω_m of the global phase.
    pub modulation: f64,
    /// α_n for n = −n_max..=n_max.
    pub coefficients: Vec<C64>,
}

impl SidebandSeries {
    pub fn coefficient(&self, n: i64) -> C64 {
        if n.unsigned_abs() as usize > self.n_max {
            return C64::from(0.0);
        }
        self.coefficients[(n + self.n_max as i64) as usize]
    }

    /// φ(t) = (2gβ/ω_m) sin ω_m t
    pub fn global_phase(&self, t: f64) -> f64 {
        self.modulation * (self.omega_m * t).sin()
    }

    /// Σ α_n e^{inω_m t}, without the global phase.
    pub fn envelope(&self, t: f64) -> C64 {
        (-(self.n_max as i64)..=self.n_max as i64)
            .map(|n| self.coefficient(n) * C64::from_polar(1.0, n as f64 * self.omega_m * t))
            .sum()
    }

    /// Full mean field α(t) = e^{iφ(t)} Σ α_n e^{inω_m t}.
    pub fn amplitude(&self, t: f64) -> C64 {
        C64::from_polar(1.0, self.global_phase(t)) * self.envelope(t)
    }

    /// |α(t)|² from the full truncated series.
    pub fn photon_number(&self, t: f64) -> f64 {
        self.envelope(t).norm_sqr()
    }

    /// |α_0 + α_{−1}e^{−iω_m t} + α_1 e^{iω_m t}|²
    pub fn three_term_photon_number(&self, t: f64) -> f64 {
        let ph = C64::from_polar(1.0, self.omega_m * t);
        (self.coefficient(0) + self.coefficient(-1) * ph.conj() + self.coefficient(1) * ph).norm_sqr()
    }
}

/// α_n = E J_n(−2gβ/ω_m) / (i(nω_m + Δ) + κ) for |n| ≤ n_max: the
/// stationary solution of α̇ = −κα − (iΔ − 2igβ cos ω_m t)α + E.
pub fn classical_sidebands(params: &SystemParams, beta: f64, n_max: usize) -> SidebandSeries {
    let modulation = 2.0 * params.g * beta / params.omega_m;
    let j = bessel_j_upto(n_max, -modulation);
    let coefficients = (-(n_max as i64)..=n_max as i64)
        .map(|n| {
            let jn = if n < 0 && n % 2 != 0 {
                -j[n.unsigned_abs() as usize]
            } else {
                j[n.unsigned_abs() as usize]
            };
            C64::from(params.drive_e * jn)
                / C64::new(params.kappa, n as f64 * params.omega_m + params.delta)
        })
        .collect();
    SidebandSeries {
        n_max,
        omega_m: params.omega_m,
        modulation,
        coefficients,
    }
}

/// Normal-mode splitting √(4J² − (1−Γ_m)²) in the strong-coupling regime;
/// None below the jump coupling.
pub fn mode_splitting(coupling: f64, gamma_m: f64) -> Option<f64> {
    let d = 4.0 * coupling * coupling - (1.0 - gamma_m).powi(2);
    if 2.0 * coupling < 1.0 - gamma_m {
        None
    } else {
        Some(d.max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn eigen_data_is_real_below_jump() {
        let e = LimitEigenData::new(0.3, 1e-3);
        for z in [e.lambda_plus, e.lambda_minus, e.eta_plus, e.eta_minus] {
            assert_eq!(z.im, 0.0);
        }
        assert!(e.lambda_plus.re < 0.0 && e.lambda_minus.re < 0.0);
        assert!(e.is_weak());
        let s = LimitEigenData::new(2.0, 1e-3);
        assert!(!s.is_weak());
        assert!((s.lambda_plus.im - s.lambda_minus.im - mode_splitting(2.0, 1e-3).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn limit_reduces_to_thermal_without_coupling() {
        for gm in [1e-4, 1e-3, 0.3] {
            let v = limit_phonon(0.0, gm, 100.0).unwrap();
            assert_relative_eq!(v.value, 100.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn strong_branch_constant() {
        let v = limit_phonon(0.6, 1e-3, 100.0).unwrap();
        assert!(v.strong && !v.jump_point);
        assert_relative_eq!(v.value, 0.1, max_relative = 1e-12);
        let at = limit_phonon(jump_coupling(1e-3), 1e-3, 100.0).unwrap();
        assert!(at.strong && at.jump_point);
        assert_relative_eq!(at.value, 0.1, max_relative = 1e-12);
    }

    #[test]
    fn left_limit_expansion() {
        let (gm, n) = (1e-3, 100.0);
        let left = limit_phonon(jump_coupling(gm) - 1e-6, gm, n).unwrap().value;
        assert_relative_eq!(left, jump_left_limit(gm, n), max_relative = 1e-4);
        assert!((jump_left_limit(gm, n) - 0.4987).abs() < 1e-4);
        let eps = 1e-4;
        let ratio = limit_phonon(jump_coupling(gm) - eps, gm, n).unwrap().value
            / limit_phonon(jump_coupling(gm) + eps, gm, n).unwrap().value;
        assert_relative_eq!(ratio, jump_left_limit(gm, n) / (gm * n), max_relative = 2e-2);
    }

    #[test]
    fn limit_rejects_bad_inputs() {
        assert_eq!(limit_phonon(0.3, 1.0, 1.0), Err(AnalyticsError::OutOfModel(1.0)));
        assert_eq!(limit_phonon(0.3, 0.0, 1.0), Err(AnalyticsError::OutOfModel(0.0)));
        assert!(matches!(limit_phonon(-0.1, 1e-3, 1.0), Err(AnalyticsError::Negative { name: "J", .. })));
    }

    /// Stationary Lyapunov solution of the resonant rotating-wave model,
    /// solved as a 3×3 linear system for (⟨a†a⟩, ⟨b†b⟩, ⟨a†b⟩ + c.c.).
    fn rwa_oracle(j: f64, gm: f64, n_th: f64) -> f64 {
        // d⟨a†a⟩/dt = −2⟨a†a⟩ + J y,  d⟨b†b⟩/dt = −2Γ⟨b†b⟩ + 2Γ n_th − J y,
        // dy/dt = −(1+Γ) y + 2J(⟨b†b⟩ − ⟨a†a⟩)
        let m = nalgebra::Matrix3::new(-2.0, 0.0, j, 0.0, -2.0 * gm, -j, -2.0 * j, 2.0 * j, -(1.0 + gm));
        let rhs = nalgebra::Vector3::new(0.0, -2.0 * gm * n_th, 0.0);
        m.lu().solve(&rhs).unwrap()[1]
    }

    proptest! {
        #[test]
        fn weak_branch_is_rotating_wave_steady_state(j in 0.0f64..0.49, gm in 1e-4f64..0.02, n in 0.0f64..200.0) {
            prop_assume!(j < jump_coupling(gm) - 1e-3);
            let eq = limit_phonon(j, gm, n).unwrap().value;
            let closed = rotating_wave_phonon(j, gm, n).unwrap();
            let oracle = rwa_oracle(j, gm, n);
            prop_assert!((eq - oracle).abs() <= 1e-9 * oracle.max(1e-12));
            prop_assert!((closed - oracle).abs() <= 1e-9 * oracle.max(1e-12));
        }

        #[test]
        fn prior_weak_decreases_with_damping(gopt in 0.0f64..1.0, extra in 1e-6f64..1.0) {
            let n_m0 = 0.0025;
            let f = |g: f64| (g * n_m0 + 2e-3 * 100.0) / (g + 2e-3);
            prop_assert!(f(gopt + extra) < f(gopt));
        }

        #[test]
        fn sideband_parity(beta in 0.0f64..500.0, n in 1usize..6) {
            let p = SystemParams::new(1e-5, 1e-3, 10.0, 10.0, 1e3, 0.0).unwrap();
            let plus = classical_sidebands(&p, beta, n);
            let minus = classical_sidebands(&p, -beta, n);
            for k in -(n as i64)..=n as i64 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                prop_assert!((minus.coefficient(k) - plus.coefficient(k) * sign).norm() <= 1e-12 * plus.coefficient(0).norm());
            }
        }
    }

    #[test]
    fn rotating_wave_is_continuous_at_jump() {
        let (gm, n) = (1e-3, 100.0);
        let j = jump_coupling(gm);
        let lo = rotating_wave_phonon(j - 1e-9, gm, n).unwrap();
        let hi = rotating_wave_phonon(j + 1e-9, gm, n).unwrap();
        assert!((lo - hi).abs() < 1e-6);
        assert_relative_eq!(lo, jump_left_limit(gm, n), max_relative = 1e-6);
        assert_relative_eq!(rotating_wave_phonon(0.6, gm, n).unwrap(), rwa_oracle(0.6, gm, n), max_relative = 1e-12);
    }

    #[test]
    fn prior_predictions() {
        let p = SystemParams::new(1e-5, 1e-3, 10.0, 10.0, 0.0, 100.0).unwrap();
        let w = prior_weak_prediction(&p);
        assert_eq!(w.gamma_opt, 0.0);
        assert_eq!(w.n_mf_weak, 100.0);
        assert_relative_eq!(w.n_m0, 0.0025, max_relative = 1e-14);

        // (g/κ)² = ½·10⁻⁵ with |α|² = 1 at ω_m → ∞
        let g = (0.5e-5f64).sqrt();
        let big = SystemParams::new(g, 1e-4, 1e9, 0.0, 1.0, 100.0).unwrap();
        let w = prior_weak_prediction(&big);
        assert_relative_eq!(w.alpha_sq, 1.0);
        assert_relative_eq!(w.gamma_opt / 1e-4, 0.1, max_relative = 1e-12);

        let s = SystemParams::new(1e-5, 1e-3, 10.0, 10.0, 1e6, 0.0).unwrap();
        let want = 0.0025 + 1e-10 * (1e12 / 101.0) / 200.0;
        assert_relative_eq!(prior_strong_prediction(&s), want, max_relative = 1e-12);
        let free = SystemParams { g: 0.0, ..s };
        assert_relative_eq!(prior_strong_prediction(&free), 0.0025, max_relative = 1e-14);
        let fast = SystemParams { omega_m: 1e9, delta: 1e9, ..s };
        assert!(prior_strong_prediction(&fast) < 1e-17);
    }

    #[test]
    fn resonant_rates_give_optical_damping() {
        let p = SystemParams::new(1e-5, 1e-3, 10.0, 10.0, 1e5, 0.0).unwrap();
        let (a_plus, a_minus) = transition_rates(&p);
        let w = prior_weak_prediction(&p);
        assert_relative_eq!(a_minus - a_plus, w.gamma_opt, max_relative = 1e-12);
    }

    #[test]
    fn splitting_values() {
        assert_relative_eq!(mode_splitting(2.0, 1e-3).unwrap(), (16.0f64 - 0.999f64.powi(2)).sqrt(), max_relative = 1e-14);
        assert!((mode_splitting(2.0, 1e-3).unwrap() - 3.874).abs() < 1e-3);
        assert_eq!(mode_splitting(jump_coupling(1e-3), 1e-3), Some(0.0));
        assert_eq!(mode_splitting(0.3, 1e-3), None);
    }

    #[test]
    fn sidebands_without_orbit() {
        let p = SystemParams::new(1e-5, 1e-3, 10.0, 10.0, 1e3, 0.0).unwrap();
        let s = classical_sidebands(&p, 0.0, 3);
        assert_eq!(s.coefficient(0), C64::from(1e3) / C64::new(1.0, 10.0));
        for n in [-3, -2, -1, 1, 2, 3] {
            assert_eq!(s.coefficient(n), C64::from(0.0));
        }
    }

    #[test]
    fn sidebands_decay_with_order() {
        let p = SystemParams::new(1e-5, 1e-3, 10.0, 10.0, 1e3, 0.0).unwrap();
        let s = classical_sidebands(&p, 2e4, 5);
        let total: f64 = s.coefficients.iter().map(|c| c.norm_sqr()).sum();
        let core: f64 = (-1..=1).map(|n| s.coefficient(n).norm_sqr()).sum();
        assert!(total.is_finite());
        assert!(core / total > 0.999);
    }

    /// Steady orbit of α̇ = −κα − (iΔ − 2igβ cos ω_m t)α + E integrated with
    /// RK4 past the transient, compared with the truncated series.
    #[test]
    fn sidebands_match_direct_integration() {
        for (beta, e) in [(2e4, 1e3), (8e4, 1e3)] {
            let p = SystemParams::new(1e-5, 1e-3, 10.0, 10.0, e, 0.0).unwrap();
            let series = classical_sidebands(&p, beta, 5);
            assert!(series.modulation / 2.0 < 0.1);
            let rhs = |t: f64, a: C64| {
                let drive = C64::new(0.0, p.delta - 2.0 * p.g * beta * (p.omega_m * t).cos());
                -a * p.kappa - drive * a + C64::from(e)
            };
            let h = 1e-4;
            let mut a = C64::from(0.0);
            let mut t = 0.0;
            let (mut err, mut norm) = (0.0, 0.0);
            let settle = 30.0;
            let period = p.mechanical_period();
            while t < settle + 2.0 * period {
                if t >= settle {
                    let d = a - series.amplitude(t);
                    err += d.norm_sqr();
                    norm += a.norm_sqr();
                }
                let k1 = rhs(t, a);
                let k2 = rhs(t + h / 2.0, a + k1 * (h / 2.0));
                let k3 = rhs(t + h / 2.0, a + k2 * (h / 2.0));
                let k4 = rhs(t + h, a + k3 * h);
                a += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                t += h;
            }
            let rel = (err / norm).sqrt();
            assert!(rel < 1e-3, "relative L2 error {rel}");
        }
    }
}
