//! Interior Neumann solves for general conductivities.
//!
//! The unknown is expanded as `u(r, θ) = a₀(r) + Σ_{k≤K} aₖ(r) cos kθ + bₖ(r) sin kθ`
//! with continuous piecewise-linear radial coefficients on a uniform mesh of
//! `[0, R]`, and the weak form `∫ σ ∇u·∇v = ∫_{∂B} g v` is tested against the
//! same space (Galerkin). The angular coupling `∫ σ eₐ e_b dθ` is computed with
//! an equispaced rule exact for the trigonometric products involved.
//!
//! Nodal blocks are coupled only to their radial neighbours, so the stiffness
//! matrix is block tridiagonal and is eliminated from the centre outwards.
//! Regularity at `r = 0` forces `aₖ(0) = bₖ(0) = 0` for `k ≥ 1`; the additive
//! constant is removed by pinning `a₀(R) = 0`, which also makes the boundary
//! trace mean-free.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::NtDOperator;
use crate::basis::{gauss_legendre, BoundaryFunction};
use crate::conductivity::ConductivityField;
use crate::error::{GptError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FemOptions {
    /// Number of radial elements.
    pub radial_elements: usize,
    /// Fourier truncation `K`; `None` picks `max(2N, N + 4)` for output order `N`.
    pub angular_order: Option<usize>,
    /// Angular quadrature points; `None` picks `max(4K + 4, 64)`.
    pub angular_samples: Option<usize>,
    /// Gauss points per radial element.
    pub gauss_points: usize,
    /// Combine meshes `h` and `h/2` by Richardson extrapolation for the NtD matrix.
    pub richardson: bool,
}

impl Default for FemOptions {
    fn default() -> Self {
        Self {
            radial_elements: 200,
            angular_order: None,
            angular_samples: None,
            gauss_points: 3,
            richardson: true,
        }
    }
}

impl FemOptions {
    pub fn angular_order_for(&self, max_order: usize) -> usize {
        self.angular_order
            .unwrap_or((2 * max_order).max(max_order + 4))
            .max(max_order)
    }

    fn angular_samples_for(&self, k: usize) -> usize {
        self.angular_samples.unwrap_or((4 * k + 4).max(64))
    }
}

/// Position of flattened NtD index `i` (cos 1..K, sin 1..K) inside a nodal
/// block ordered as (constant, cos 1..K, sin 1..K).
fn block_of(ntd_index: usize) -> usize {
    ntd_index + 1
}

struct System {
    nodes: Vec<f64>,
    k: usize,
    /// `S_i⁻¹ E_i` for each interior node `i < P`.
    sweeps: Vec<DMatrix<f64>>,
    /// LU factors of the boundary Schur complement.
    boundary: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    radius: f64,
}

impl System {
    fn block(&self) -> usize {
        2 * self.k + 1
    }

    fn assemble(
        sigma: &ConductivityField,
        radius: f64,
        k: usize,
        elements: usize,
        gauss_points: usize,
        samples: usize,
    ) -> Result<Self> {
        if elements < 2 {
            return Err(GptError::InvalidArgument(
                "need at least two radial elements".into(),
            ));
        }
        let b = 2 * k + 1;
        let nodes: Vec<f64> = (0..=elements)
            .map(|i| radius * i as f64 / elements as f64)
            .collect();
        let angles: Vec<f64> = (0..samples)
            .map(|j| 2.0 * PI * j as f64 / samples as f64)
            .collect();
        // e_α(θ_j) and e_α'(θ_j)
        let mut basis = DMatrix::zeros(b, samples);
        let mut dbasis = DMatrix::zeros(b, samples);
        for (j, &t) in angles.iter().enumerate() {
            basis[(0, j)] = 1.0;
            for m in 1..=k {
                let (s, c) = (m as f64 * t).sin_cos();
                basis[(m, j)] = c;
                basis[(k + m, j)] = s;
                dbasis[(m, j)] = -(m as f64) * s;
                dbasis[(k + m, j)] = m as f64 * c;
            }
        }
        let dtheta = 2.0 * PI / samples as f64;
        let (gx, gw) = gauss_legendre(gauss_points);

        let mut diag = vec![DMatrix::<f64>::zeros(b, b); elements + 1];
        let mut off = vec![DMatrix::<f64>::zeros(b, b); elements];
        for e in 0..elements {
            let (r0, r1) = (nodes[e], nodes[e + 1]);
            let h = r1 - r0;
            for (x, w) in gx.iter().zip(&gw) {
                let r = 0.5 * (r0 + r1) + 0.5 * h * x;
                let w = 0.5 * h * w;
                let weights = DVector::from_iterator(
                    samples,
                    angles.iter().map(|&t| sigma.value(r, t) * dtheta),
                );
                let scaled = DMatrix::from_fn(b, samples, |a, j| basis[(a, j)] * weights[j]);
                let dscaled = DMatrix::from_fn(b, samples, |a, j| dbasis[(a, j)] * weights[j]);
                let mass = &scaled * basis.transpose();
                let stiff = &dscaled * dbasis.transpose();
                let phi = [(r1 - r) / h, (r - r0) / h];
                let dphi = [-1.0 / h, 1.0 / h];
                let coef =
                    |p: usize, q: usize| (w * r * dphi[p] * dphi[q], w * phi[p] * phi[q] / r);
                let (ca, cc) = coef(0, 0);
                diag[e] += &mass * ca + &stiff * cc;
                let (ca, cc) = coef(1, 1);
                diag[e + 1] += &mass * ca + &stiff * cc;
                let (ca, cc) = coef(0, 1);
                off[e] += &mass * ca + &stiff * cc;
            }
        }
        // aₖ(0) = bₖ(0) = 0 for k ≥ 1
        for a in 1..b {
            diag[0].row_mut(a).fill(0.0);
            diag[0].column_mut(a).fill(0.0);
            diag[0][(a, a)] = 1.0;
            off[0].row_mut(a).fill(0.0);
        }
        // a₀(R) = 0
        let p = elements;
        diag[p].row_mut(0).fill(0.0);
        diag[p].column_mut(0).fill(0.0);
        diag[p][(0, 0)] = 1.0;
        off[p - 1].column_mut(0).fill(0.0);

        // S₀ = D₀, S_{i+1} = D_{i+1} − E_iᵀ S_i⁻¹ E_i
        let mut sweeps = Vec::with_capacity(p);
        let mut schur = diag[0].clone();
        for i in 0..p {
            let lu = schur.lu();
            let x = lu.solve(&off[i]).ok_or_else(|| {
                GptError::SingularSystem(format!("stiffness block at radial node {i}"))
            })?;
            schur = &diag[i + 1] - off[i].transpose() * &x;
            sweeps.push(x);
        }
        let boundary = schur.lu();
        if !boundary.is_invertible() {
            return Err(GptError::SingularSystem("boundary Schur complement".into()));
        }
        Ok(Self {
            nodes,
            k,
            sweeps,
            boundary,
            radius,
        })
    }

    /// Nodal coefficients for Neumann data `g` (flattened cos 1..K, sin 1..K).
    fn solve(&self, data: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        let b = self.block();
        let k = self.k;
        let cols = data.ncols();
        let mut load = DMatrix::zeros(b, cols);
        for c in 0..cols {
            for i in 0..2 * k {
                load[(block_of(i), c)] = PI * self.radius * data[(i, c)];
            }
        }
        let top = self
            .boundary
            .solve(&load)
            .ok_or_else(|| GptError::SingularSystem("boundary solve".into()))?;
        let p = self.nodes.len() - 1;
        let mut out = vec![DMatrix::zeros(b, cols); p + 1];
        out[p] = top;
        for i in (0..p).rev() {
            out[i] = -(&self.sweeps[i] * &out[i + 1]);
        }
        Ok(out)
    }

    /// Boundary trace matrix `Λ` at Fourier order `K` (dense `2K × 2K`).
    fn ntd_matrix(&self) -> Result<DMatrix<f64>> {
        let k = self.k;
        let eye = DMatrix::identity(2 * k, 2 * k);
        let sol = self.solve(&eye)?;
        let top = &sol[self.nodes.len() - 1];
        Ok(DMatrix::from_fn(2 * k, 2 * k, |i, j| top[(block_of(i), j)]))
    }
}

fn check(max_order: usize, radius: f64) -> Result<()> {
    if max_order == 0 {
        return Err(GptError::InvalidArgument(
            "truncation order must be >= 1".into(),
        ));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GptError::InvalidArgument(format!("radius {radius}")));
    }
    Ok(())
}

fn ntd_at_order(
    sigma: &ConductivityField,
    k: usize,
    radius: f64,
    opts: &FemOptions,
) -> Result<DMatrix<f64>> {
    let samples = opts.angular_samples_for(k);
    let coarse = System::assemble(
        sigma,
        radius,
        k,
        opts.radial_elements,
        opts.gauss_points,
        samples,
    )?
    .ntd_matrix()?;
    if !opts.richardson {
        return Ok(coarse);
    }
    let fine = System::assemble(
        sigma,
        radius,
        k,
        2 * opts.radial_elements,
        opts.gauss_points,
        samples,
    )?
    .ntd_matrix()?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// Dense `Λ_σ` at order `max_order` by the Fourier–Galerkin finite-element solve.
///
/// The solve runs at the Fourier order `K = opts.angular_order_for(N)` and the
/// result is restricted to the first `N` modes of each parity.
pub fn ntd_sigma_general(
    sigma: &ConductivityField,
    max_order: usize,
    radius: f64,
    opts: &FemOptions,
) -> Result<NtDOperator> {
    check(max_order, radius)?;
    let k = opts.angular_order_for(max_order);
    let full = NtDOperator::Dense(ntd_at_order(sigma, k, radius, opts)?);
    Ok(full.truncated(max_order))
}

/// Finite-element interior solution for one Neumann datum.
#[derive(Debug, Clone)]
pub struct FemState {
    nodes: Vec<f64>,
    k: usize,
    /// `coeffs[i]` holds the block `(a₀, a₁..a_K, b₁..b_K)` at node `i`.
    coeffs: Vec<DVector<f64>>,
    /// Neumann datum `σ ∂u/∂ν` (cos 1..K, sin 1..K).
    datum: DVector<f64>,
}

impl FemState {
    /// Gradient `(∂u/∂r, (1/r) ∂u/∂θ)` at `(r, θ)`.
    pub fn gradient_polar(&self, r: f64, theta: f64) -> (f64, f64) {
        let p = self.nodes.len() - 1;
        let h = self.nodes[1] - self.nodes[0];
        let e = ((r / h).floor() as usize).min(p - 1);
        let (r0, r1) = (self.nodes[e], self.nodes[e + 1]);
        let t = (r - r0) / (r1 - r0);
        let (c0, c1) = (&self.coeffs[e], &self.coeffs[e + 1]);
        let k = self.k;
        let mut gr = (c1[0] - c0[0]) / h;
        let mut gt = 0.0;
        for m in 1..=k {
            let (s, c) = (m as f64 * theta).sin_cos();
            let mf = m as f64;
            for (idx, ang, dang) in [(m, c, -mf * s), (k + m, s, mf * c)] {
                let slope = (c1[idx] - c0[idx]) / h;
                // aₘ(0) = 0, so aₘ(r)/r is the slope on the first element
                let over_r = if e == 0 {
                    c1[idx] / r1
                } else {
                    (c0[idx] + t * (c1[idx] - c0[idx])) / r
                };
                gr += slope * ang;
                gt += over_r * dang;
            }
        }
        (gr, gt)
    }

    /// Neumann datum `σ ∂u/∂ν` up to `max_order`.
    pub fn datum(&self, max_order: usize) -> BoundaryFunction {
        BoundaryFunction::from_vector(self.k, &self.datum).resized(max_order)
    }

    /// Boundary trace coefficients up to `max_order`.
    pub fn trace(&self, max_order: usize) -> BoundaryFunction {
        let last = &self.coeffs[self.coeffs.len() - 1];
        let k = self.k;
        let get = |i: usize| if i <= k { last[i] } else { 0.0 };
        BoundaryFunction::new(
            (1..=max_order).map(get).collect(),
            (1..=max_order)
                .map(|m| if m <= k { last[k + m] } else { 0.0 })
                .collect(),
        )
        .expect("equal lengths")
    }
}

/// Interior solutions for several Neumann data at once.
///
/// `data` holds boundary functions (any order ≤ K); returns one state each.
pub fn fem_interior_state(
    sigma: &ConductivityField,
    radius: f64,
    data: &[BoundaryFunction],
    opts: &FemOptions,
) -> Result<Vec<FemState>> {
    let max_order = data.iter().map(|d| d.max_order()).max().unwrap_or(1).max(1);
    check(max_order, radius)?;
    let k = opts.angular_order_for(max_order);
    let system = System::assemble(
        sigma,
        radius,
        k,
        opts.radial_elements,
        opts.gauss_points,
        opts.angular_samples_for(k),
    )?;
    let mut rhs = DMatrix::zeros(2 * k, data.len());
    for (c, d) in data.iter().enumerate() {
        let v = d.resized(k).to_vector();
        rhs.set_column(c, &v);
    }
    let sol = system.solve(&rhs)?;
    Ok((0..data.len())
        .map(|c| FemState {
            nodes: system.nodes.clone(),
            k,
            coeffs: sol.iter().map(|blk| blk.column(c).into_owned()).collect(),
            datum: rhs.column(c).into_owned(),
        })
        .collect())
}

/// Interior transmission states for the sources `rⁿ cos nθ`, `rⁿ sin nθ`, `n ≤ N`.
///
/// Each state carries the Neumann datum `(Λ_σ − Λᵉ)⁻¹(Λ₁ − Λᵉ)[∂h/∂ν]`, where
/// `Λ_σ` is the NtD matrix of the same discrete system at Fourier order `K`,
/// so datum and state are consistent. Order of the result: cos 1..N, sin 1..N.
/// No Richardson extrapolation is applied.
pub fn fem_transmission_states(
    sigma: &ConductivityField,
    radius: f64,
    max_order: usize,
    opts: &FemOptions,
) -> Result<Vec<FemState>> {
    check(max_order, radius)?;
    let k = opts.angular_order_for(max_order);
    let system = System::assemble(
        sigma,
        radius,
        k,
        opts.radial_elements,
        opts.gauss_points,
        opts.angular_samples_for(k),
    )?;
    let mut a = system.ntd_matrix()?;
    for i in 0..2 * k {
        let m = (i % k + 1) as f64;
        a[(i, i)] += radius / m;
    }
    // (Λ₁ − Λᵉ)[n Rⁿ⁻¹ eₙ] = 2Rⁿ eₙ
    let mut rhs = DMatrix::zeros(2 * k, 2 * max_order);
    for j in 0..2 * max_order {
        let n = j % max_order + 1;
        let row = if j < max_order { n - 1 } else { k + n - 1 };
        rhs[(row, j)] = 2.0 * radius.powi(n as i32);
    }
    let data = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| GptError::SingularSystem("Λ_σ − Λᵉ".into()))?;
    let sol = system.solve(&data)?;
    Ok((0..2 * max_order)
        .map(|c| FemState {
            nodes: system.nodes.clone(),
            k,
            coeffs: sol.iter().map(|blk| blk.column(c).into_owned()).collect(),
            datum: data.column(c).into_owned(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductivity::{benchmark_profile, GriddedField, RadialProfile};
    use crate::ntd::ntd_radial_operator;

    #[test]
    fn homogeneous_is_diagonal_r_over_n() {
        let s = ConductivityField::constant(1.0).unwrap();
        let op = ntd_sigma_general(&s, 6, 1.0, &FemOptions::default()).unwrap();
        let m = op.matrix();
        for i in 0..12 {
            let n = (i % 6 + 1) as f64;
            assert!((m[(i, i)] - 1.0 / n).abs() < 1e-5 / n, "{i}: {}", m[(i, i)]);
            for j in 0..12 {
                if i != j {
                    assert!(m[(i, j)].abs() < 1e-10, "({i},{j}) {}", m[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn constant_k_matches_closed_form() {
        let s = ConductivityField::constant(3.0).unwrap();
        let op = ntd_sigma_general(&s, 4, 0.5, &FemOptions::default()).unwrap();
        for n in 1..=4 {
            let exact = 0.5 / (3.0 * n as f64);
            assert!((op.diagonal_entry(n) - exact).abs() < 1e-5 * exact);
        }
    }

    #[test]
    fn radial_benchmark_matches_spectral_path() {
        let p = RadialProfile::from_fn(benchmark_profile, 1.0).unwrap();
        let spectral = ntd_radial_operator(&p, 5, 1.0).unwrap().matrix();
        let fem = ntd_sigma_general(
            &ConductivityField::Radial(p),
            5,
            1.0,
            &FemOptions::default(),
        )
        .unwrap()
        .matrix();
        let diff = (&fem - &spectral).abs().max();
        assert!(diff < 1e-5, "max deviation {diff}");
    }

    #[test]
    fn nonradial_operator_is_symmetric() {
        let g = GriddedField::from_fn((0..=16).map(|i| i as f64 / 16.0).collect(), 32, |r, t| {
            1.5 + 0.5 * r * t.cos() + 0.3 * r * r * (2.0 * t).sin()
        })
        .unwrap();
        let op = ntd_sigma_general(&g.into(), 4, 1.0, &FemOptions::default()).unwrap();
        assert!(op.symmetry_defect() < 1e-10);
        // genuine coupling between modes
        let m = op.matrix();
        assert!(m[(0, 1)].abs() > 1e-4);
    }

    #[test]
    fn state_flux_and_gradient_for_homogeneous_mode() {
        // σ ≡ 1, g = cos θ: u = r cos θ, ∇u = (cos θ, −sin θ) in polar components
        let s = ConductivityField::constant(1.0).unwrap();
        let g = BoundaryFunction::new(vec![1.0], vec![0.0]).unwrap();
        let st = &fem_interior_state(&s, 1.0, &[g], &FemOptions::default()).unwrap()[0];
        let (gr, gt) = st.gradient_polar(0.37, 0.8);
        assert!((gr - 0.8f64.cos()).abs() < 1e-3);
        assert!((gt + 0.8f64.sin()).abs() < 1e-3);
        assert!((st.trace(2).cos_coeffs()[0] - 1.0).abs() < 1e-4);
    }
}
