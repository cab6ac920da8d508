//! Two-mode Gaussian states: quadrature covariance, Wigner function, purity.
//!
//! Quadratures are q = (c + c†)/√2 and p = (c − c†)/(i√2), so the vacuum
//! covariance is I/2 and a thermal mode with occupation n has σ = (n + ½)I.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagator::{commutator_residual, SecondMoments};
use crate::{Mat4, Vec4, C64};

/// Commutator drift accepted when building a state from moments.
pub const MOMENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("moments violate the commutation relations (residual {residual:.3e})")]
    InconsistentMoments { residual: f64 },
    #[error("covariance block is singular or not positive definite")]
    Degenerate,
    #[error("point has {got} coordinates, expected {expected}")]
    Dimension { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelect {
    Full,
    Cavity,
    Mechanical,
}

impl ModeSelect {
    fn modes(self) -> usize {
        match self {
            Self::Full => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    /// (q_c, p_c, q_m, p_m)
    pub mean: Vector4<f64>,
    pub sigma: Matrix4<f64>,
}

/// Rows map (a, a†, b, b†) to (q_c, p_c, q_m, p_m).
fn quadrature_map() -> Mat4 {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let one = C64::new(r, 0.0);
    let mi = C64::new(0.0, -r);
    let pi = C64::new(0.0, r);
    let z = C64::new(0.0, 0.0);
    Mat4::new(
        one, one, z, z, //
        mi, pi, z, z, //
        z, z, one, one, //
        z, z, mi, pi,
    )
}

/// Builds the state from centered moments G_ij = ⟨δc_i δc_j⟩ and the
/// operator means ⟨c⟩.
pub fn to_gaussian(moments: &SecondMoments, mean4: &Vec4) -> Result<GaussianState, GaussianError> {
    let residual = commutator_residual(&moments.g);
    if residual > MOMENT_TOLERANCE {
        return Err(GaussianError::InconsistentMoments { residual });
    }
    let t = quadrature_map();
    let raw = t * moments.g * t.transpose();
    let sym = (raw + raw.transpose()) * C64::from(0.5);
    let sigma = sym.map(|z| z.re);
    let mean = (t * mean4).map(|z| z.re);
    Ok(GaussianState { mean, sigma })
}

impl GaussianState {
    pub fn vacuum() -> Self {
        Self {
            mean: Vector4::zeros(),
            sigma: Matrix4::identity() * 0.5,
        }
    }

    /// Covariance block and mean slice of the selected modes.
    pub fn block(&self, select: ModeSelect) -> (nalgebra::DMatrix<f64>, nalgebra::DVector<f64>) {
        let (start, len) = match select {
            ModeSelect::Full => (0, 4),
            ModeSelect::Cavity => (0, 2),
            ModeSelect::Mechanical => (2, 2),
        };
        (
            self.sigma.view((start, start), (len, len)).clone_owned().into(),
            self.mean.rows(start, len).clone_owned().into(),
        )
    }

    pub fn mechanical_sigma(&self) -> Matrix2<f64> {
        self.sigma.fixed_view::<2, 2>(2, 2).into_owned()
    }

    pub fn mechanical_mean(&self) -> Vector2<f64> {
        self.mean.fixed_rows::<2>(2).into_owned()
    }

    pub fn determinant(&self, select: ModeSelect) -> f64 {
        self.block(select).0.determinant()
    }

    /// Smallest eigenvalue of σ + (i/2)Ω; nonnegative for physical states.
    pub fn uncertainty_margin(&self) -> f64 {
        let half_i = C64::new(0.0, 0.5);
        let mut h = self.sigma.map(C64::from);
        for k in [0, 2] {
            h[(k, k + 1)] += half_i;
            h[(k + 1, k)] -= half_i;
        }
        SymmetricEigen::new(h).eigenvalues.min()
    }

    /// Checks symmetry, positive definiteness, the uncertainty relation and
    /// purity ≤ 1, each to 10⁻⁸.
    pub fn is_physical(&self) -> bool {
        let asym = (self.sigma - self.sigma.transpose()).amax();
        let min_eig = SymmetricEigen::new(self.sigma).eigenvalues.min();
        asym <= 1e-8 * self.sigma.amax().max(1.0)
            && min_eig > 0.0
            && self.uncertainty_margin() >= -1e-8
            && purity(self, ModeSelect::Full) <= 1.0 + 1e-8
    }

    /// Occupation of the thermal state with the same mechanical determinant,
    /// √det σ_m − ½.
    pub fn thermal_equivalent_occupation(&self) -> f64 {
        self.mechanical_sigma().determinant().sqrt() - 0.5
    }
}

/// Wigner function W(x) = exp(−½(x−x̄)ᵀσ⁻¹(x−x̄)) / ((2π)^n √det σ) of the
/// selected modes at each point. Points carry 4 coordinates for `Full`, 2
/// otherwise.
pub fn wigner<P: AsRef<[f64]>>(
    state: &GaussianState,
    points: &[P],
    select: ModeSelect,
) -> Result<Vec<f64>, GaussianError> {
    let (sigma, mean) = state.block(select);
    let dim = sigma.nrows();
    let chol = sigma.clone().cholesky().ok_or(GaussianError::Degenerate)?;
    let det = sigma.determinant();
    if !(det > 0.0) {
        return Err(GaussianError::Degenerate);
    }
    let norm = (std::f64::consts::TAU).powi(select.modes() as i32) * det.sqrt();
    points
        .iter()
        .map(|p| {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(GaussianError::Dimension {
                    got: p.len(),
                    expected: dim,
                });
            }
            let d = nalgebra::DVector::from_column_slice(p) - &mean;
            let quad = d.dot(&chol.solve(&d));
            Ok((-0.5 * quad).exp() / norm)
        })
        .collect()
}

/// P = 1/(2ⁿ √det σ) over the selected n modes.
pub fn purity(state: &GaussianState, select: ModeSelect) -> f64 {
    let det = state.determinant(select);
    1.0 / (2f64.powi(select.modes() as i32) * det.sqrt())
}
