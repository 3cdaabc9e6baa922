//! Neumann-to-Dirichlet operators on zero-mean boundary functions.
//!
//! Three maps are used throughout:
//!
//! * `Λ_σ`: interior problem `∇·σ∇u = 0`, `σ ∂u/∂ν = g`, trace with mean removed;
//! * `Λ₁`: the same with `σ ≡ 1`, diagonal with entries `R/n`;
//! * `Λᵉ`: exterior harmonic problem decaying at infinity, diagonal with `−R/n`.
//!
//! Operators are matrices over the coefficient vector `(cos 1..N, sin 1..N)`.
//! The boundary pairing is `πR` times the Euclidean product, so self-adjointness
//! of an NtD map is plain matrix symmetry.

mod fem;
pub mod radial;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::BoundaryFunction;
use crate::conductivity::{ConductivityField, RadialProfile};
use crate::error::{GptError, Result};

pub use fem::{
    fem_interior_state, fem_transmission_states, ntd_sigma_general, FemOptions, FemState,
};
pub use radial::{ntd_sigma_radial, solve_mode, ModeSolution};

/// Condition number beyond which `(Λ_σ − Λᵉ)` solves are refused.
pub const CONDITION_LIMIT: f64 = 1e12;

/// A truncated NtD operator.
#[derive(Debug, Clone, PartialEq)]
pub enum NtDOperator {
    /// Same eigenvalue `λ(n)` on `cos nθ` and `sin nθ`.
    Diagonal(Vec<f64>),
    /// Dense `2N × 2N` matrix.
    Dense(DMatrix<f64>),
}

impl NtDOperator {
    pub fn max_order(&self) -> usize {
        match self {
            Self::Diagonal(d) => d.len(),
            Self::Dense(m) => m.nrows() / 2,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, Self::Diagonal(_))
    }

    /// Eigenvalue of mode `n` for diagonal operators, diagonal entry of
    /// `cos nθ` otherwise.
    pub fn diagonal_entry(&self, order: usize) -> f64 {
        match self {
            Self::Diagonal(d) => d[order - 1],
            Self::Dense(m) => m[(order - 1, order - 1)],
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            Self::Diagonal(d) => {
                let n = d.len();
                DMatrix::from_fn(2 * n, 2 * n, |i, j| if i == j { d[i % n] } else { 0.0 })
            }
            Self::Dense(m) => m.clone(),
        }
    }

    pub fn apply_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Diagonal(d) => {
                let n = d.len();
                DVector::from_fn(2 * n, |i, _| d[i % n] * v[i])
            }
            Self::Dense(m) => m * v,
        }
    }

    pub fn apply(&self, g: &BoundaryFunction) -> BoundaryFunction {
        let n = self.max_order();
        let v = g.resized(n).to_vector();
        BoundaryFunction::from_vector(n, &self.apply_vector(&v))
    }

    /// `self − other`, staying diagonal when both are.
    pub fn difference(&self, other: &Self) -> Self {
        assert_eq!(self.max_order(), other.max_order());
        match (self, other) {
            (Self::Diagonal(a), Self::Diagonal(b)) => {
                Self::Diagonal(a.iter().zip(b).map(|(x, y)| x - y).collect())
            }
            _ => Self::Dense(self.matrix() - other.matrix()),
        }
    }

    /// Restriction to the first `max_order` modes of each parity.
    pub fn truncated(&self, max_order: usize) -> Self {
        assert!(max_order <= self.max_order());
        match self {
            Self::Diagonal(d) => Self::Diagonal(d[..max_order].to_vec()),
            Self::Dense(m) => {
                let n = self.max_order();
                let idx: Vec<usize> = (0..max_order).chain(n..n + max_order).collect();
                Self::Dense(DMatrix::from_fn(2 * max_order, 2 * max_order, |i, j| {
                    m[(idx[i], idx[j])]
                }))
            }
        }
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        match self {
            Self::Diagonal(d) => d.iter().fold(0.0, |a: f64, x| a.max(x.abs())),
            Self::Dense(m) => m.clone().svd(false, false).singular_values.max(),
        }
    }

    /// `‖A − Aᵀ‖_F / ‖A‖_F`.
    pub fn symmetry_defect(&self) -> f64 {
        match self {
            Self::Diagonal(_) => 0.0,
            Self::Dense(m) => {
                let scale = m.norm();
                if scale == 0.0 {
                    0.0
                } else {
                    (m - m.transpose()).norm() / scale
                }
            }
        }
    }

    /// Ratio of extreme singular values.
    pub fn condition_estimate(&self) -> f64 {
        match self {
            Self::Diagonal(d) => {
                let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), x| {
                    (lo.min(x.abs()), hi.max(x.abs()))
                });
                hi / lo
            }
            Self::Dense(m) => {
                let sv = m.clone().svd(false, false).singular_values;
                sv.max() / sv.min()
            }
        }
    }
}

/// `Λ₁`: diagonal `R/n`.
pub fn ntd_harmonic(max_order: usize, radius: f64) -> Result<NtDOperator> {
    check_order_radius(max_order, radius)?;
    Ok(NtDOperator::Diagonal(
        (1..=max_order).map(|n| radius / n as f64).collect(),
    ))
}

/// `Λᵉ`: diagonal `−R/n` (exterior modes `r⁻ⁿ`, normal pointing out of `B`).
pub fn ntd_exterior(max_order: usize, radius: f64) -> Result<NtDOperator> {
    check_order_radius(max_order, radius)?;
    Ok(NtDOperator::Diagonal(
        (1..=max_order).map(|n| -radius / n as f64).collect(),
    ))
}

fn check_order_radius(max_order: usize, radius: f64) -> Result<()> {
    if max_order == 0 {
        return Err(GptError::InvalidArgument(
            "truncation order must be >= 1".into(),
        ));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GptError::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    Ok(())
}

/// Diagonal `Λ_σ` for a radial profile; mode solves run in parallel.
pub fn ntd_radial_operator(
    profile: &RadialProfile,
    max_order: usize,
    radius: f64,
) -> Result<NtDOperator> {
    check_order_radius(max_order, radius)?;
    let diag = (1..=max_order)
        .into_par_iter()
        .map(|n| ntd_sigma_radial(profile, n, radius))
        .collect::<Result<Vec<_>>>()?;
    Ok(NtDOperator::Diagonal(diag))
}

/// `Λ_σ` by the spectral radial path when `σ` is radial, by finite elements otherwise.
pub fn ntd_sigma(
    sigma: &ConductivityField,
    max_order: usize,
    radius: f64,
    fem: &FemOptions,
) -> Result<NtDOperator> {
    match sigma {
        ConductivityField::Radial(p) => ntd_radial_operator(p, max_order, radius),
        ConductivityField::Gridded(_) => ntd_sigma_general(sigma, max_order, radius, fem),
    }
}

/// Solves `(Λ_σ − Λᵉ) g = f` directly.
pub fn ntd_difference_inverse_apply(
    sigma_op: &NtDOperator,
    exterior_op: &NtDOperator,
    f: &BoundaryFunction,
) -> Result<BoundaryFunction> {
    let n = sigma_op.max_order();
    let diff = sigma_op.difference(exterior_op);
    let cond = diff.condition_estimate();
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(GptError::IllConditioned { condition: cond });
    }
    let rhs = f.resized(n).to_vector();
    let g = match &diff {
        NtDOperator::Diagonal(d) => DVector::from_fn(2 * n, |i, _| rhs[i] / d[i % n]),
        NtDOperator::Dense(m) => m
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| GptError::SingularSystem("Λ_σ − Λᵉ is singular".into()))?,
    };
    Ok(BoundaryFunction::from_vector(n, &g))
}

/// Landweber iteration `g ← g + ω A (f − A g)` for `A = Λ_σ − Λᵉ`.
///
/// Converges for `0 < ω < 2/‖A‖²`; stops when `‖f − A g‖ ≤ tol ‖f‖`.
pub fn ntd_difference_inverse_landweber(
    sigma_op: &NtDOperator,
    exterior_op: &NtDOperator,
    f: &BoundaryFunction,
    omega: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BoundaryFunction> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(GptError::InvalidArgument(format!(
            "Landweber step must be positive, got {omega}"
        )));
    }
    let n = sigma_op.max_order();
    let a = sigma_op.difference(exterior_op);
    let rhs = f.resized(n).to_vector();
    let target = rhs.norm();
    let mut g = DVector::zeros(2 * n);
    if target == 0.0 {
        return Ok(BoundaryFunction::from_vector(n, &g));
    }
    let mut residual = rhs.clone();
    for iteration in 0..max_iter {
        let res_norm = residual.norm();
        if !res_norm.is_finite() || res_norm > 1e8 * target {
            return Err(GptError::Diverged {
                iteration,
                residual: res_norm,
            });
        }
        if res_norm <= tol * target {
            return Ok(BoundaryFunction::from_vector(n, &g));
        }
        g += a.apply_vector(&residual) * omega;
        residual = &rhs - a.apply_vector(&g);
    }
    let res_norm = residual.norm();
    if res_norm <= tol * target {
        Ok(BoundaryFunction::from_vector(n, &g))
    } else if !res_norm.is_finite() || res_norm > target {
        Err(GptError::Diverged {
            iteration: max_iter,
            residual: res_norm,
        })
    } else {
        Err(GptError::NotConverged {
            iterations: max_iter,
            residual: res_norm / target,
        })
    }
}
