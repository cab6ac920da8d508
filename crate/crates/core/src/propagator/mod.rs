//! Time-ordered transition matrices and moment propagation.
//!
//! The time-ordered exponential D(t, 0) is built as a product of one-step
//! propagators with M evaluated at each interval midpoint. Second moments
//! follow the matrix ODE dG/dt = M G + G Mᵀ + N, which is the noise-averaged
//! outer product of the Langevin solution written as a differential equation;
//! it costs O(N) steps where the direct history integral costs O(N²).
//! [`history_noise_oracle`] keeps the direct integral form for validation.

mod expm;

pub use expm::{expm, one_norm};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    coherent_drive, dynamical_matrix, NoiseMoments, NoiseSource, SystemParams,
};
use crate::{Mat4, Vec4, C64};

/// Upper bound on stored samples per run when the record interval is chosen
/// automatically.
pub const MAX_AUTO_RECORDS: usize = 20_000;

/// Commutator drift tolerated for the exponential scheme.
pub const COMMUTATOR_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("propagation diverged: non-finite state at t = {t}")]
    Divergence { t: f64 },
    #[error("time {t} is not a recorded grid point")]
    OffGrid { t: f64 },
    #[error("transition requested backwards in time (t = {t} < tau = {tau})")]
    Backwards { t: f64, tau: f64 },
    #[error(
        "commutator drift {residual:.3e} at t = {t} exceeds tolerance; refine the step (dt = {dt})"
    )]
    StepSize { t: f64, residual: f64, dt: f64 },
    #[error("invalid integration settings: {0}")]
    Settings(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Products of (I + M δt), first order.
    EulerProduct,
    /// Products of exp(M(t + δt/2) δt), second order.
    #[default]
    MidpointExp,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::EulerProduct => "euler_product",
            Self::MidpointExp => "midpoint_exp",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler_product" => Ok(Self::EulerProduct),
            "midpoint_exp" => Ok(Self::MidpointExp),
            other => Err(format!(
                "unknown scheme `{other}` (expected euler_product or midpoint_exp)"
            )),
        }
    }
}

/// Step size, horizon, scheme and sampling of one propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Store a sample every this many steps.
    pub record_every: usize,
}

impl IntegrationSettings {
    /// Default step: 64 points per period of the fastest phase factor in
    /// M(t), capped at 0.01/κ. On the beam-splitter resonance the step is
    /// shrunk to divide the mechanical period into a multiple of 16 steps so
    /// that samples and averaging windows align with the period.
    pub fn default_step(params: &SystemParams) -> f64 {
        let omega_max = (2.0 * params.omega_m)
            .max(params.delta.abs() + params.omega_m)
            .max(params.kappa);
        let dt = (std::f64::consts::TAU / (64.0 * omega_max)).min(1e-2);
        if params.is_resonant() {
            let period = params.mechanical_period();
            let per_period = ((period / dt).ceil() / 16.0).ceil() * 16.0;
            period / per_period
        } else {
            dt
        }
    }

    /// Settings with the default step and an automatic record interval.
    pub fn for_params(params: &SystemParams, t_end: f64) -> Self {
        Self::with_step(params, t_end, Self::default_step(params), Scheme::MidpointExp)
    }

    /// Settings with a chosen step; samples are taken at multiples of 1/16
    /// of the mechanical period on resonance, otherwise every 0.01/κ, thinned
    /// so that at most [`MAX_AUTO_RECORDS`] samples are kept.
    pub fn with_step(params: &SystemParams, t_end: f64, dt: f64, scheme: Scheme) -> Self {
        let n_steps = (t_end / dt).round().max(1.0) as usize;
        let base = if params.is_resonant() {
            let sub = params.mechanical_period() / 16.0;
            ((sub / dt).round() as usize).max(1)
        } else {
            ((0.01 / dt).round() as usize).max(1)
        };
        let mut record_every = base;
        while n_steps / record_every > MAX_AUTO_RECORDS {
            record_every *= 2;
        }
        Self {
            dt,
            t_end,
            scheme,
            record_every,
        }
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PropagationError::Settings(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(PropagationError::Settings(format!(
                "t_end = {} must be positive",
                self.t_end
            )));
        }
        if self.record_every == 0 {
            return Err(PropagationError::Settings("record_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    pub fn record_interval(&self) -> f64 {
        self.dt * self.record_every as f64
    }

    /// Tolerated commutator drift: fixed for the exponential scheme; the
    /// Euler product drifts by O(δt·‖M‖²), so its bound scales with the step.
    pub fn commutator_tolerance(&self, params: &SystemParams) -> f64 {
        match self.scheme {
            Scheme::MidpointExp => COMMUTATOR_TOLERANCE,
            Scheme::EulerProduct => {
                let j = params.coupling();
                COMMUTATOR_TOLERANCE + 4.0 * self.dt * (1.0 + 4.0 * j * j)
            }
        }
    }
}

/// One-step propagator for an already evaluated M.
pub fn step_matrix(m_eval: &Mat4, dt: f64, scheme: Scheme) -> Mat4 {
    match scheme {
        Scheme::EulerProduct => Mat4::identity() + m_eval * C64::from(dt),
        Scheme::MidpointExp => expm(&(m_eval * C64::from(dt))),
    }
}

/// Full- and half-interval propagators for the step starting at `t`.
#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub full: Mat4,
    pub half: Mat4,
    pub t_mid: f64,
}

pub fn step_at(params: &SystemParams, t: f64, dt: f64, scheme: Scheme) -> Step {
    let t_mid = t + 0.5 * dt;
    let m = dynamical_matrix(params, t_mid);
    match scheme {
        Scheme::EulerProduct => Step {
            full: Mat4::identity() + m * C64::from(dt),
            half: Mat4::identity() + m * C64::from(0.5 * dt),
            t_mid,
        },
        Scheme::MidpointExp => {
            let half = expm(&(m * C64::from(0.5 * dt)));
            Step {
                full: half * half,
                half,
                t_mid,
            }
        }
    }
}

/// X N Xᵀ for a noise matrix with a single nonzero entry.
fn sandwich_single(x: &Mat4, (i, j): (usize, usize), strength: f64) -> Mat4 {
    x.column(i) * x.column(j).transpose() * C64::from(strength)
}

/// Noise accumulated over one step by a single channel.
fn noise_increment(step: &Step, entry: (usize, usize), strength: f64, dt: f64, scheme: Scheme) -> Mat4 {
    match scheme {
        Scheme::EulerProduct => {
            let mut q = Mat4::zeros();
            q[entry] = C64::from(strength * dt);
            q
        }
        // Simpson rule for ∫₀^δt e^{Ms} N e^{Mᵀs} ds
        Scheme::MidpointExp => {
            let mut q = sandwich_single(&step.half, entry, 4.0 * strength)
                + sandwich_single(&step.full, entry, strength);
            q[entry] += C64::from(strength);
            q * C64::from(dt / 6.0)
        }
    }
}

fn lyapunov_step(g: &Mat4, step: &Step) -> Mat4 {
    step.full * g * step.full.transpose()
}

/// One Lyapunov step with the full noise matrix.
pub fn advance_moments(g: &Mat4, step: &Step, params: &SystemParams, dt: f64, scheme: Scheme) -> Mat4 {
    let mut next = lyapunov_step(g, step);
    for source in NoiseSource::ALL {
        let strength = NoiseMoments::strength(params, source);
        if strength != 0.0 {
            next += noise_increment(step, source.entry(), strength, dt, scheme);
        }
    }
    next
}

/// Initial centered moments: cavity vacuum ⊗ mechanical thermal state.
pub fn initial_moments(params: &SystemParams) -> Mat4 {
    let mut g = Mat4::zeros();
    g[(0, 1)] = C64::from(1.0);
    g[(2, 3)] = C64::from(params.n_th + 1.0);
    g[(3, 2)] = C64::from(params.n_th);
    g
}

/// What a propagation keeps track of.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tracks {
    pub transition: bool,
    pub moments: bool,
    pub sources: bool,
    pub mean: bool,
}

impl Tracks {
    pub fn all() -> Self {
        Self {
            transition: true,
            moments: true,
            sources: true,
            mean: true,
        }
    }
}

/// Noise-driven second moments split by reservoir channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSplit {
    pub cavity: Mat4,
    pub mechanical_bs: Mat4,
    pub mechanical_sq: Mat4,
}

impl NoiseSplit {
    pub fn zeros() -> Self {
        Self {
            cavity: Mat4::zeros(),
            mechanical_bs: Mat4::zeros(),
            mechanical_sq: Mat4::zeros(),
        }
    }

    pub fn get(&self, source: NoiseSource) -> &Mat4 {
        match source {
            NoiseSource::Cavity => &self.cavity,
            NoiseSource::MechanicalBs => &self.mechanical_bs,
            NoiseSource::MechanicalSq => &self.mechanical_sq,
        }
    }

    fn get_mut(&mut self, source: NoiseSource) -> &mut Mat4 {
        match source {
            NoiseSource::Cavity => &mut self.cavity,
            NoiseSource::MechanicalBs => &mut self.mechanical_bs,
            NoiseSource::MechanicalSq => &mut self.mechanical_sq,
        }
    }

    pub fn total(&self) -> Mat4 {
        self.cavity + self.mechanical_bs + self.mechanical_sq
    }
}

/// Samples produced by [`propagate`]. Vectors for untracked quantities stay
/// empty.
#[derive(Debug, Clone)]
pub struct Record {
    pub params: SystemParams,
    pub settings: IntegrationSettings,
    pub times: Vec<f64>,
    pub transition: Vec<Mat4>,
    pub moments: Vec<Mat4>,
    pub sources: Vec<NoiseSplit>,
    pub mean: Vec<Vec4>,
    /// First sample time with a non-finite state; recording stops there.
    pub diverged_at: Option<f64>,
    /// First commutator violation above tolerance: (t, residual).
    pub commutator_violation: Option<(f64, f64)>,
}

impl Record {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn all_finite<'a, I: IntoIterator<Item = &'a C64>>(it: I) -> bool {
    it.into_iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Relative drift of the two commutators [a, a†] = [b, b†] = 1.
pub fn commutator_residual(g: &Mat4) -> f64 {
    let cav = (g[(0, 1)] - g[(1, 0)] - C64::from(1.0)).norm() / g[(1, 0)].norm().max(1.0);
    let mech = (g[(2, 3)] - g[(3, 2)] - C64::from(1.0)).norm() / g[(3, 2)].norm().max(1.0);
    cav.max(mech)
}

/// Single pass over the time grid advancing every tracked quantity with the
/// same step propagators.
pub fn propagate(params: &SystemParams, settings: &IntegrationSettings, tracks: Tracks) -> Record {
    let n_steps = settings.n_steps();
    let dt = settings.dt;
    let scheme = settings.scheme;
    let capacity = n_steps / settings.record_every + 1;
    let alloc = |on: bool| if on { capacity } else { 0 };

    let mut rec = Record {
        params: *params,
        settings: *settings,
        times: Vec::with_capacity(capacity),
        transition: Vec::with_capacity(alloc(tracks.transition)),
        moments: Vec::with_capacity(alloc(tracks.moments)),
        sources: Vec::with_capacity(alloc(tracks.sources)),
        mean: Vec::with_capacity(alloc(tracks.mean)),
        diverged_at: None,
        commutator_violation: None,
    };

    let tolerance = settings.commutator_tolerance(params);
    let strengths: Vec<(NoiseSource, (usize, usize), f64)> = NoiseSource::ALL
        .iter()
        .map(|&s| (s, s.entry(), NoiseMoments::strength(params, s)))
        .collect();

    let mut d = Mat4::identity();
    let mut g = initial_moments(params);
    let mut split = NoiseSplit::zeros();
    let mut c = Vec4::zeros();

    let store = |rec: &mut Record, k: usize, d: &Mat4, g: &Mat4, split: &NoiseSplit, c: &Vec4| -> bool {
        let t = k as f64 * dt;
        let finite = (!tracks.transition || all_finite(d.iter()))
            && (!tracks.moments || all_finite(g.iter()))
            && (!tracks.sources || all_finite(split.total().iter()))
            && (!tracks.mean || all_finite(c.iter()));
        if !finite {
            rec.diverged_at = Some(t);
            return false;
        }
        if tracks.moments && rec.commutator_violation.is_none() {
            let r = commutator_residual(g);
            if r > tolerance {
                rec.commutator_violation = Some((t, r));
            }
        }
        rec.times.push(t);
        if tracks.transition {
            rec.transition.push(*d);
        }
        if tracks.moments {
            rec.moments.push(*g);
        }
        if tracks.sources {
            rec.sources.push(*split);
        }
        if tracks.mean {
            rec.mean.push(*c);
        }
        true
    };

    if !store(&mut rec, 0, &d, &g, &split, &c) {
        return rec;
    }
    for k in 0..n_steps {
        let step = step_at(params, k as f64 * dt, dt, scheme);
        if tracks.transition {
            d = step.full * d;
        }
        if tracks.moments {
            g = lyapunov_step(&g, &step);
            for &(_, entry, strength) in &strengths {
                if strength != 0.0 {
                    g += noise_increment(&step, entry, strength, dt, scheme);
                }
            }
        }
        if tracks.sources {
            for &(source, entry, strength) in &strengths {
                let m = split.get_mut(source);
                *m = lyapunov_step(m, &step);
                if strength != 0.0 {
                    *m += noise_increment(&step, entry, strength, dt, scheme);
                }
            }
        }
        if tracks.mean {
            let lambda = coherent_drive(params, step.t_mid);
            let kick = match scheme {
                Scheme::MidpointExp => step.half * lambda,
                Scheme::EulerProduct => lambda,
            };
            c = step.full * c + kick * C64::from(dt);
        }
        let k1 = k + 1;
        if k1 % settings.record_every == 0 || k1 == n_steps {
            if !store(&mut rec, k1, &d, &g, &split, &c) {
                return rec;
            }
        }
    }
    rec
}

/// Stored D(t_k, 0) on the record grid.
#[derive(Debug, Clone)]
pub struct TransitionGrid {
    pub params: SystemParams,
    pub settings: IntegrationSettings,
    pub times: Vec<f64>,
    pub d0: Vec<Mat4>,
}

impl TransitionGrid {
    pub fn step(&self) -> f64 {
        self.settings.dt
    }

    pub fn scheme(&self) -> Scheme {
        self.settings.scheme
    }

    /// Index of a recorded time, matched to within 10⁻⁹ of a step.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let interval = self.settings.record_interval();
        let k = (t / interval).round();
        if k < 0.0 {
            return None;
        }
        let k = k as usize;
        match self.times.get(k) {
            Some(&tk) if (tk - t).abs() <= 1e-9 * self.settings.dt => Some(k),
            _ => self
                .times
                .iter()
                .position(|&tk| (tk - t).abs() <= 1e-9 * self.settings.dt),
        }
    }

    /// Global step index of a recorded sample.
    fn step_index(&self, sample: usize) -> usize {
        (self.times[sample] / self.settings.dt).round() as usize
    }
}

pub fn evolve_transition(
    params: &SystemParams,
    settings: &IntegrationSettings,
) -> Result<TransitionGrid, PropagationError> {
    settings.validate()?;
    let rec = propagate(
        params,
        settings,
        Tracks {
            transition: true,
            ..Tracks::default()
        },
    );
    if let Some(t) = rec.diverged_at {
        return Err(PropagationError::Divergence { t });
    }
    Ok(TransitionGrid {
        params: rec.params,
        settings: rec.settings,
        times: rec.times,
        d0: rec.transition,
    })
}

/// D(t, τ) by restepping from τ to t with the grid's scheme.
pub fn transition_between(grid: &TransitionGrid, t: f64, tau: f64) -> Result<Mat4, PropagationError> {
    if tau > t {
        return Err(PropagationError::Backwards { t, tau });
    }
    let i_t = grid.index_of(t).ok_or(PropagationError::OffGrid { t })?;
    let i_tau = grid.index_of(tau).ok_or(PropagationError::OffGrid { t: tau })?;
    let (k0, k1) = (grid.step_index(i_tau), grid.step_index(i_t));
    let dt = grid.settings.dt;
    let mut d = Mat4::identity();
    for k in k0..k1 {
        d = step_at(&grid.params, k as f64 * dt, dt, grid.settings.scheme).full * d;
    }
    Ok(d)
}

/// Centered second moments G_ij = ⟨δc_i δc_j⟩ at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMoments {
    pub t: f64,
    pub g: Mat4,
}

impl SecondMoments {
    pub fn initial(params: &SystemParams) -> Self {
        Self {
            t: 0.0,
            g: initial_moments(params),
        }
    }

    /// Thermal phonon number ⟨δb† δb⟩.
    pub fn phonons(&self) -> f64 {
        self.g[(3, 2)].re
    }

    /// Centered photon number ⟨δa† δa⟩.
    pub fn photons(&self) -> f64 {
        self.g[(1, 0)].re
    }

    pub fn commutator_residual(&self) -> f64 {
        commutator_residual(&self.g)
    }
}

#[derive(Debug, Clone)]
pub struct MomentSeries {
    pub params: SystemParams,
    pub settings: IntegrationSettings,
    pub moments: Vec<SecondMoments>,
    /// Per-channel noise parts, when they were propagated alongside.
    pub sources: Option<Vec<NoiseSplit>>,
}

impl MomentSeries {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.moments.iter().map(|m| m.t)
    }
}

fn check_record(rec: &Record) -> Result<(), PropagationError> {
    if let Some(t) = rec.diverged_at {
        return Err(PropagationError::Divergence { t });
    }
    if let Some((t, residual)) = rec.commutator_violation {
        return Err(PropagationError::StepSize {
            t,
            residual,
            dt: rec.settings.dt,
        });
    }
    Ok(())
}

fn moment_series(rec: &Record, with_sources: bool) -> MomentSeries {
    MomentSeries {
        params: rec.params,
        settings: rec.settings,
        moments: rec
            .times
            .iter()
            .zip(&rec.moments)
            .map(|(&t, &g)| SecondMoments { t, g })
            .collect(),
        sources: with_sources.then(|| rec.sources.clone()),
    }
}

/// Second moments from the vacuum ⊗ thermal initial state.
pub fn evolve_second_moments(
    params: &SystemParams,
    settings: &IntegrationSettings,
) -> Result<MomentSeries, PropagationError> {
    settings.validate()?;
    let rec = propagate(
        params,
        settings,
        Tracks {
            moments: true,
            ..Tracks::default()
        },
    );
    check_record(&rec)?;
    Ok(moment_series(&rec, false))
}

/// Same as [`evolve_second_moments`] with the three single-channel noise
/// systems propagated alongside.
pub fn evolve_second_moments_split(
    params: &SystemParams,
    settings: &IntegrationSettings,
) -> Result<MomentSeries, PropagationError> {
    settings.validate()?;
    let rec = propagate(
        params,
        settings,
        Tracks {
            moments: true,
            sources: true,
            ..Tracks::default()
        },
    );
    check_record(&rec)?;
    Ok(moment_series(&rec, true))
}

/// Noise integrals of the history form, per reservoir channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ChannelTerms {
    pub cavity: f64,
    pub mechanical_bs: f64,
    pub mechanical_sq: f64,
}

impl ChannelTerms {
    pub fn total(&self) -> f64 {
        self.cavity + self.mechanical_bs + self.mechanical_sq
    }

    pub fn get(&self, source: NoiseSource) -> f64 {
        match source {
            NoiseSource::Cavity => self.cavity,
            NoiseSource::MechanicalBs => self.mechanical_bs,
            NoiseSource::MechanicalSq => self.mechanical_sq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct OracleTerms {
    pub t: f64,
    /// 2κ∫|d41|², 2γ_m n_th∫|d44|², 2γ_m(n_th+1)∫|d43|²
    pub phonon: ChannelTerms,
    /// 2κ∫d21 d12, 2γ_m n_th∫d24 d13, 2γ_m(n_th+1)∫d23 d14
    pub photon: ChannelTerms,
}

/// Direct quadrature over τ of the noise integrals at a single time `t`,
/// with every D(t, τ) obtained by multiplying step propagators from τ up to
/// t. Sweeping the whole history this way is O(N²); one time point is O(N).
pub fn history_noise_oracle(params: &SystemParams, t: f64, settings: &IntegrationSettings) -> OracleTerms {
    let dt = settings.dt;
    let n = (t / dt).round() as usize;
    let mut out = OracleTerms {
        t: n as f64 * dt,
        ..OracleTerms::default()
    };
    if n == 0 {
        return out;
    }
    let steps: Vec<Mat4> = (0..n)
        .map(|k| step_at(params, k as f64 * dt, dt, settings.scheme).full)
        .collect();

    let two_k = 2.0 * params.kappa;
    let bs = 2.0 * params.gamma_m * params.n_th;
    let sq = 2.0 * params.gamma_m * (params.n_th + 1.0);
    let mut accumulate = |d: &Mat4, w: f64| {
        out.phonon.cavity += w * two_k * d[(3, 0)].norm_sqr();
        out.phonon.mechanical_bs += w * bs * d[(3, 3)].norm_sqr();
        out.phonon.mechanical_sq += w * sq * d[(3, 2)].norm_sqr();
        out.photon.cavity += w * two_k * (d[(1, 0)] * d[(0, 1)]).re;
        out.photon.mechanical_bs += w * bs * (d[(1, 3)] * d[(0, 2)]).re;
        out.photon.mechanical_sq += w * sq * (d[(1, 2)] * d[(0, 3)]).re;
    };

    // trapezoid in τ, walking τ backwards from t
    let mut d = Mat4::identity();
    accumulate(&d, 0.5 * dt);
    for k in (0..n).rev() {
        d *= steps[k];
        let w = if k == 0 { 0.5 * dt } else { dt };
        accumulate(&d, w);
    }
    out
}

/// Coherent part of the operator means.
#[derive(Debug, Clone)]
pub struct MeanTrajectory {
    pub times: Vec<f64>,
    pub mean: Vec<Vec4>,
}

impl MeanTrajectory {
    /// q_m⁰ = √2 Re⟨b⟩
    pub fn q_m0(&self, k: usize) -> f64 {
        std::f64::consts::SQRT_2 * self.mean[k][2].re
    }

    /// p_m⁰ = √2 Im⟨b⟩
    pub fn p_m0(&self, k: usize) -> f64 {
        std::f64::consts::SQRT_2 * self.mean[k][2].im
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// ⟨c(t)⟩ from zero initial means by the running recurrence
/// ⟨c(t+δt)⟩ = S⟨c(t)⟩ + δt·S_{1/2} λ(t+δt/2), sampled on the grid.
pub fn evolve_mean(params: &SystemParams, grid: &TransitionGrid) -> MeanTrajectory {
    let rec = propagate(
        params,
        &grid.settings,
        Tracks {
            mean: true,
            ..Tracks::default()
        },
    );
    MeanTrajectory {
        times: rec.times,
        mean: rec.mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::max_abs;
    use crate::model::conjugate_partner;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(coupling: f64, s_m: f64, n_th: f64) -> SystemParams {
        SystemParams::with_coupling(1e-5, 1e-3, s_m, s_m, coupling, n_th).unwrap()
    }

    fn settings(t_end: f64, dt: f64, scheme: Scheme) -> IntegrationSettings {
        IntegrationSettings {
            dt,
            t_end,
            scheme,
            record_every: ((0.05 / dt).round() as usize).max(1),
        }
    }

    #[test]
    fn default_step_resolves_fastest_phase() {
        let p = params(1.0, 10.0, 1.0);
        let dt = IntegrationSettings::default_step(&p);
        assert!(dt <= std::f64::consts::TAU / (64.0 * 20.0) + 1e-15);
        let per_period = p.mechanical_period() / dt;
        assert!((per_period - per_period.round()).abs() < 1e-9);
        assert_eq!(per_period.round() as usize % 16, 0);
        let slow = SystemParams::new(1e-5, 1e-3, 0.1, 0.05, 0.0, 1.0).unwrap();
        assert_eq!(IntegrationSettings::default_step(&slow), 1e-2);
    }

    #[test]
    fn step_schemes_agree_to_first_order() {
        let m = dynamical_matrix(&params(1.0, 10.0, 1.0), 0.77);
        let dt = 1e-6;
        let e = step_matrix(&m, dt, Scheme::EulerProduct);
        let x = step_matrix(&m, dt, Scheme::MidpointExp);
        assert!(max_abs(&(e - x)) < 10.0 * dt * dt * max_abs(&m).powi(2));
    }

    proptest! {
        #[test]
        fn euler_remainder_bound(entries in proptest::collection::vec(-3.0f64..3.0, 32)) {
            let m = Mat4::from_fn(|i, j| C64::new(entries[2 * (4 * i + j)], entries[2 * (4 * i + j) + 1]));
            let dt = 1e-3;
            let e = step_matrix(&m, dt, Scheme::EulerProduct);
            let x = step_matrix(&m, dt, Scheme::MidpointExp);
            // induced 1-norm on both sides
            let norm = one_norm(&m);
            let bound = norm * norm * dt * dt * (norm * dt).exp() / 2.0;
            prop_assert!(one_norm(&(e - x)) <= bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn uncoupled_transition_is_exponential_decay() {
        let p = SystemParams::new(1e-5, 1e-3, 10.0, 10.0, 0.0, 3.0).unwrap();
        let s = settings(20.0, 5e-3, Scheme::MidpointExp);
        let grid = evolve_transition(&p, &s).unwrap();
        for (t, d) in grid.times.iter().zip(&grid.d0) {
            let want = [(-t).exp(), (-t).exp(), (-1e-3 * t).exp(), (-1e-3 * t).exp()];
            for i in 0..4 {
                assert_relative_eq!(d[(i, i)].re, want[i], max_relative = 1e-12);
            }
        }
        let d = transition_between(&grid, 15.0, 5.0).unwrap();
        assert_relative_eq!(d[(3, 3)].re, (-1e-3f64 * 10.0).exp(), max_relative = 1e-12);
    }

    #[test]
    fn transition_between_identity_and_errors() {
        let p = params(0.5, 10.0, 1.0);
        let s = settings(2.0, 1e-3, Scheme::MidpointExp);
        let grid = evolve_transition(&p, &s).unwrap();
        assert_eq!(transition_between(&grid, 1.0, 1.0).unwrap(), Mat4::identity());
        assert!(matches!(
            transition_between(&grid, 1.0, 1.5),
            Err(PropagationError::Backwards { .. })
        ));
        assert!(matches!(
            transition_between(&grid, 1.0123, 0.5),
            Err(PropagationError::OffGrid { .. })
        ));
        // D(t,0) from restepping matches the stored product
        let d = transition_between(&grid, 2.0, 0.0).unwrap();
        let stored = grid.d0.last().unwrap();
        assert!(max_abs(&(d - stored)) < 1e-13);
    }

    #[test]
    fn semigroup_and_conjugation_symmetry() {
        let p = params(1.0, 10.0, 1.0);
        let s = settings(30.0, 1e-3, Scheme::MidpointExp);
        let grid = evolve_transition(&p, &s).unwrap();
        let d_ts = transition_between(&grid, 25.0, 3.0).unwrap();
        let d_tt = transition_between(&grid, 25.0, 11.5).unwrap();
        let d_ss = transition_between(&grid, 11.5, 3.0).unwrap();
        let rel = max_abs(&(d_ts - d_tt * d_ss)) / max_abs(&d_ts);
        assert!(rel < 1e-8, "semigroup residual {rel}");
        for d in &grid.d0 {
            assert!(max_abs(&(conjugate_partner(d) - d)) <= 1e-12 * max_abs(d).max(1.0));
        }
    }

    #[test]
    fn red_detuned_cooling_stays_bounded() {
        let p = params(1.0, 10.0, 1.0);
        let s = IntegrationSettings::for_params(&p, 2000.0);
        let grid = evolve_transition(&p, &s).unwrap();
        let worst = grid.d0.iter().map(max_abs).fold(0.0, f64::max);
        assert!(worst < 10.0, "max |d_ij| = {worst}");
    }

    #[test]
    fn uncoupled_equilibrium_is_exact() {
        let p = SystemParams::new(1e-5, 1e-3, 10.0, 10.0, 0.0, 100.0).unwrap();
        let s = settings(200.0, 5e-3, Scheme::MidpointExp);
        let series = evolve_second_moments(&p, &s).unwrap();
        for m in &series.moments {
            assert!((m.phonons() - 100.0).abs() < 1e-6 * 100.0);
        }
        let vac = SystemParams::new(1e-5, 1e-3, 10.0, 10.0, 0.0, 0.0).unwrap();
        let series = evolve_second_moments(&vac, &s).unwrap();
        let g0 = initial_moments(&vac);
        for m in &series.moments {
            assert!(max_abs(&(m.g - g0)) < 1e-9);
        }
    }

    #[test]
    fn cooling_lowers_phonon_number() {
        let p = params(1.0, 10.0, 1.0);
        let s = IntegrationSettings::for_params(&p, 100.0);
        let series = evolve_second_moments(&p, &s).unwrap();
        let last = series.moments.last().unwrap();
        assert!(last.phonons() < 1.0);
        assert!(last.phonons() > 0.0);
        for m in &series.moments {
            assert!(m.commutator_residual() < 1e-6);
            assert!(m.phonons() > -1e-10 && m.photons() > -1e-10);
        }
    }

    #[test]
    fn oracle_closed_form_uncoupled() {
        let p = SystemParams::new(1e-5, 1e-3, 10.0, 10.0, 0.0, 100.0).unwrap();
        let s = settings(1.0, 1e-2, Scheme::MidpointExp);
        let t = 40.0;
        let o = history_noise_oracle(&p, t, &s);
        let want = 100.0 * (1.0 - (-2e-3f64 * t).exp());
        assert_relative_eq!(o.phonon.mechanical_bs, want, max_relative = 1e-5);
        assert!(o.phonon.cavity.abs() < 1e-15);
        let zero = history_noise_oracle(&p, 0.0, &s);
        assert_eq!(zero.phonon.total(), 0.0);
        assert_eq!(zero.photon.total(), 0.0);
    }

    #[test]
    fn lyapunov_matches_history_oracle() {
        let p = params(0.5, 10.0, 1.0);
        let t = 20.0;
        let s = settings(t, 1e-3, Scheme::MidpointExp);
        let series = evolve_second_moments_split(&p, &s).unwrap();
        let split = series.sources.as_ref().unwrap().last().unwrap();
        let oracle = history_noise_oracle(&p, t, &s);
        for source in NoiseSource::ALL {
            let ly = split.get(source)[(3, 2)].re;
            let or = oracle.phonon.get(source);
            assert_relative_eq!(ly, or, max_relative = 1e-4);
            let ly = split.get(source)[(1, 0)].re;
            let or = oracle.photon.get(source);
            assert!((ly - or).abs() <= 1e-4 * or.abs().max(1e-8), "{source:?}: {ly} vs {or}");
        }
    }

    #[test]
    fn mean_is_zero_without_drive_and_conjugate_symmetric() {
        let p0 = SystemParams::new(1e-5, 1e-3, 10.0, 10.0, 0.0, 1.0).unwrap();
        let s = settings(5.0, 1e-3, Scheme::MidpointExp);
        let grid = evolve_transition(&p0, &s).unwrap();
        let traj = evolve_mean(&p0, &grid);
        assert!(traj.mean.iter().all(|c| max_abs(c) == 0.0));

        let p = params(0.2, 10.0, 1.0);
        let s = settings(20.0, 1e-3, Scheme::MidpointExp);
        let grid = evolve_transition(&p, &s).unwrap();
        let traj = evolve_mean(&p, &grid);
        for c in &traj.mean {
            let sym = crate::model::conjugate_partner_vec(c);
            assert!(max_abs(&(sym - c)) <= 1e-12 * max_abs(c).max(1.0));
        }
    }

    #[test]
    fn divergence_is_reported() {
        // strongly blue-detuned, far outside the stable regime
        let p = SystemParams::with_coupling(1e-5, 1e-3, 1.0, -1.0, 40.0, 1.0).unwrap();
        let s = IntegrationSettings {
            dt: 1e-2,
            t_end: 400.0,
            scheme: Scheme::MidpointExp,
            record_every: 10,
        };
        match evolve_transition(&p, &s) {
            Err(PropagationError::Divergence { t }) => assert!(t > 0.0 && t < 400.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
