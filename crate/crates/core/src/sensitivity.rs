//! Interior transmission states, the Fréchet derivative of contracted GPTs
//! with respect to the conductivity, its adjoint, and the linearization about
//! a constant background.
//!
//! For a source `h = rⁿ cos nθ` (or `sin`) the interior state `u` solves
//! `∇·σ∇u = 0` with Neumann datum `σ ∂u/∂ν = (Λ_σ − Λᵉ)⁻¹(Λ₁ − Λᵉ)[∂h/∂ν]`,
//! i.e. `u` is the restriction to `B` of the full-plane transmission solution
//! with background `h`. Then `M'_{mn}(σ)[γ] = ∫_B γ ∇u_m · ∇u_n dx`.

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;

use crate::basis::{DiskGrid, GridField, HarmonicMode, Parity};
use crate::conductivity::{ConductivityField, RadialProfile};
use crate::error::{GptError, Result};
use crate::gpt::ForwardOptions;
use crate::ntd::fem_transmission_states;
use crate::ntd::radial::{solve_mode, DEFAULT_TOLERANCE};

/// Polar components `(∂u/∂r, (1/r) ∂u/∂θ)` of a gradient at a list of points.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    radial: Vec<f64>,
    angular: Vec<f64>,
}

impl GradientField {
    pub fn new(radial: Vec<f64>, angular: Vec<f64>) -> Result<Self> {
        if radial.len() != angular.len() {
            return Err(GptError::InvalidArgument(
                "gradient components must have equal length".into(),
            ));
        }
        Ok(Self { radial, angular })
    }

    pub fn radial(&self) -> &[f64] {
        &self.radial
    }

    pub fn angular(&self) -> &[f64] {
        &self.angular
    }

    pub fn len(&self) -> usize {
        self.radial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radial.is_empty()
    }

    /// Pointwise `∇u · ∇v`.
    pub fn dot(&self, other: &Self) -> Vec<f64> {
        self.radial
            .iter()
            .zip(&self.angular)
            .zip(other.radial.iter().zip(&other.angular))
            .map(|((a, b), (c, d))| a * c + b * d)
            .collect()
    }

    /// `Σ cᵢ fieldᵢ`.
    pub fn combination(terms: &[(f64, &Self)]) -> Result<Self> {
        let len = terms.first().map_or(0, |(_, f)| f.len());
        let mut radial = vec![0.0; len];
        let mut angular = vec![0.0; len];
        for (c, f) in terms {
            if f.len() != len {
                return Err(GptError::InvalidArgument(
                    "gradient fields differ in length".into(),
                ));
            }
            for i in 0..len {
                radial[i] += c * f.radial[i];
                angular[i] += c * f.angular[i];
            }
        }
        Ok(Self { radial, angular })
    }
}

fn grid_points(grid: &DiskGrid) -> Vec<(f64, f64)> {
    (0..grid.len()).map(|i| grid.point(i)).collect()
}

fn check_points(points: &[(f64, f64)], radius: f64) -> Result<()> {
    match points
        .iter()
        .find(|(r, _)| !(*r >= 0.0 && *r <= radius * (1.0 + 1e-12)))
    {
        Some((r, _)) => Err(GptError::InvalidArgument(format!(
            "state requested at radius {r} outside [0, {radius}]"
        ))),
        None => Ok(()),
    }
}

/// Transmission datum coefficient `ψₙ` on mode `n` for a radial conductivity
/// with NtD eigenvalue `λ`: `(λ₁ − λᵉ) n Rⁿ⁻¹ / (λ − λᵉ) = 2Rⁿ / (λ + R/n)`.
pub(crate) fn radial_datum(ntd: f64, order: usize, radius: f64) -> f64 {
    2.0 * radius.powi(order as i32) / (ntd + radius / order as f64)
}

/// States of the sources cos n, sin n for every `n ≤ max_order` (that order),
/// radial path: one ODE solve per order shared by both parities.
fn radial_states(
    profile: &RadialProfile,
    radius: f64,
    max_order: usize,
    points: &[(f64, f64)],
) -> Result<Vec<GradientField>> {
    let mut radii: Vec<f64> = points.iter().map(|p| p.0.min(radius)).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let per_order = (1..=max_order)
        .into_par_iter()
        .map(|n| {
            let sol = solve_mode(profile, n, radius, &radii, DEFAULT_TOLERANCE)?;
            let psi = radial_datum(sol.ntd(), n, radius);
            let nf = n as f64;
            let mut cos = (
                Vec::with_capacity(points.len()),
                Vec::with_capacity(points.len()),
            );
            let mut sin = (
                Vec::with_capacity(points.len()),
                Vec::with_capacity(points.len()),
            );
            for &(r, t) in points {
                let i = radii.partition_point(|&x| x < r.min(radius));
                let fp = psi * sol.derivatives()[i];
                let fr = psi * nf * sol.value_over_radius(i);
                let (s, c) = (nf * t).sin_cos();
                cos.0.push(fp * c);
                cos.1.push(-fr * s);
                sin.0.push(fp * s);
                sin.1.push(fr * c);
            }
            Ok((
                GradientField {
                    radial: cos.0,
                    angular: cos.1,
                },
                GradientField {
                    radial: sin.0,
                    angular: sin.1,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (cos, sin): (Vec<_>, Vec<_>) = per_order.into_iter().unzip();
    Ok(cos.into_iter().chain(sin).collect())
}

fn fem_states(
    sigma: &ConductivityField,
    radius: f64,
    max_order: usize,
    points: &[(f64, f64)],
    opts: &ForwardOptions,
) -> Result<Vec<GradientField>> {
    let states = fem_transmission_states(sigma, radius, max_order, &opts.fem)?;
    Ok(states
        .par_iter()
        .map(|s| {
            let (radial, angular) = points.iter().map(|&(r, t)| s.gradient_polar(r, t)).unzip();
            GradientField { radial, angular }
        })
        .collect())
}

fn all_states(
    sigma: &ConductivityField,
    radius: f64,
    max_order: usize,
    points: &[(f64, f64)],
    opts: &ForwardOptions,
) -> Result<Vec<GradientField>> {
    if max_order == 0 {
        return Err(GptError::InvalidArgument("order must be >= 1".into()));
    }
    check_points(points, radius)?;
    match sigma {
        ConductivityField::Radial(p) if !opts.force_fem => {
            radial_states(p, radius, max_order, points)
        }
        _ => fem_states(sigma, radius, max_order, points, opts),
    }
}

/// Interior transmission states of all sources up to a fixed order, evaluated
/// once and shared by every `(m, n)` pair. Read-only after construction.
#[derive(Debug, Clone)]
pub struct StateCache {
    max_order: usize,
    points: Vec<(f64, f64)>,
    grid: Option<DiskGrid>,
    states: Vec<GradientField>,
}

impl StateCache {
    /// States at the quadrature points of `grid`.
    pub fn on_grid(
        sigma: &ConductivityField,
        radius: f64,
        max_order: usize,
        grid: &DiskGrid,
        opts: &ForwardOptions,
    ) -> Result<Self> {
        let points = grid_points(grid);
        let states = all_states(sigma, radius, max_order, &points, opts)?;
        Ok(Self {
            max_order,
            points,
            grid: Some(grid.clone()),
            states,
        })
    }

    /// States at arbitrary points `(r, θ)` inside the disk.
    pub fn at_points(
        sigma: &ConductivityField,
        radius: f64,
        max_order: usize,
        points: Vec<(f64, f64)>,
        opts: &ForwardOptions,
    ) -> Result<Self> {
        let states = all_states(sigma, radius, max_order, &points, opts)?;
        Ok(Self {
            max_order,
            points,
            grid: None,
            states,
        })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn grid(&self) -> Option<&DiskGrid> {
        self.grid.as_ref()
    }

    /// `∇u` for the source `mode`.
    pub fn state(&self, mode: HarmonicMode) -> &GradientField {
        assert!(mode.order() <= self.max_order, "mode beyond cached order");
        &self.states[mode.index(self.max_order)]
    }

    /// Pointwise `∇u_m · ∇u_n`.
    pub fn kernel_values(&self, m: HarmonicMode, n: HarmonicMode) -> Vec<f64> {
        self.state(m).dot(self.state(n))
    }

    fn require_grid(&self) -> Result<&DiskGrid> {
        self.grid
            .as_ref()
            .ok_or_else(|| GptError::InvalidArgument("state cache has no quadrature grid".into()))
    }

    /// `M'_{mn}(σ)*[c] = c ∇u_m · ∇u_n` on the grid.
    pub fn adjoint(&self, m: HarmonicMode, n: HarmonicMode, c: f64) -> Result<GridField> {
        let grid = self.require_grid()?;
        let values = self
            .kernel_values(m, n)
            .into_iter()
            .map(|v| c * v)
            .collect();
        GridField::from_values(grid, values)
    }

    /// `M'_{mn}(σ)[γ] = ∫ γ ∇u_m · ∇u_n dx`.
    pub fn derivative(&self, gamma: &GridField, m: HarmonicMode, n: HarmonicMode) -> Result<f64> {
        let grid = self.require_grid()?;
        Ok(self.adjoint(m, n, 1.0)?.product(gamma).integrate(grid))
    }
}

/// `∇u` on `grid` for the transmission problem with background `rⁿ cos nθ` or `rⁿ sin nθ`.
pub fn interior_state(
    sigma: &ConductivityField,
    radius: f64,
    mode: HarmonicMode,
    grid: &DiskGrid,
    opts: &ForwardOptions,
) -> Result<GradientField> {
    let points = grid_points(grid);
    let mut states = all_states(sigma, radius, mode.order(), &points, opts)?;
    Ok(states.swap_remove(mode.index(mode.order())))
}

/// `M'_{mn}(σ)[γ]` with `m` the receiver and `n` the source.
pub fn frechet_derivative(
    sigma: &ConductivityField,
    radius: f64,
    gamma: &GridField,
    m: HarmonicMode,
    n: HarmonicMode,
    grid: &DiskGrid,
    opts: &ForwardOptions,
) -> Result<f64> {
    let order = m.order().max(n.order());
    StateCache::on_grid(sigma, radius, order, grid, opts)?.derivative(gamma, m, n)
}

/// `M'_{mn}(σ)*[c]` as a field on `grid`.
pub fn frechet_adjoint(
    sigma: &ConductivityField,
    radius: f64,
    m: HarmonicMode,
    n: HarmonicMode,
    c: f64,
    grid: &DiskGrid,
    opts: &ForwardOptions,
) -> Result<GridField> {
    let order = m.order().max(n.order());
    StateCache::on_grid(sigma, radius, order, grid, opts)?.adjoint(m, n, c)
}

/// The moment `∫_B γ r^{m+n−2} e^{i(m−n)θ} dx`.
///
/// At a constant background `k` the transmission states are `2h/(k+1)`, and
/// `∇(rᵐ e^{imθ}) · ∇(rⁿ e^{−inθ}) = 2mn r^{m+n−2} e^{i(m−n)θ}`, so this moment
/// carries the whole linearized response of the four contracted blocks
/// (see [`linearized_derivative`]).
pub fn linearized_perturbation_map(
    gamma: &GridField,
    grid: &DiskGrid,
    m: usize,
    n: usize,
) -> Complex<f64> {
    let p = (m + n) as i32 - 2;
    let d = m as f64 - n as f64;
    let w = |r: f64| if p == 0 { 1.0 } else { r.powi(p) };
    let re = grid
        .sample(|r, t| w(r) * (d * t).cos())
        .product(gamma)
        .integrate(grid);
    let im = grid
        .sample(|r, t| w(r) * (d * t).sin())
        .product(gamma)
        .integrate(grid);
    Complex::new(re, im)
}

/// Derivatives of `M^{cc}_{mn}, M^{cs}_{mn}, M^{sc}_{mn}, M^{ss}_{mn}` in
/// direction `γ` at the constant background `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedDerivative {
    pub cc: f64,
    pub cs: f64,
    pub sc: f64,
    pub ss: f64,
}

impl LinearizedDerivative {
    pub fn block(&self, receiver: Parity, source: Parity) -> f64 {
        match (receiver, source) {
            (Parity::Cos, Parity::Cos) => self.cc,
            (Parity::Cos, Parity::Sin) => self.cs,
            (Parity::Sin, Parity::Cos) => self.sc,
            (Parity::Sin, Parity::Sin) => self.ss,
        }
    }
}

/// Linearized GPT response at constant background `k` from the moment of
/// [`linearized_perturbation_map`].
pub fn linearized_derivative(
    gamma: &GridField,
    grid: &DiskGrid,
    m: usize,
    n: usize,
    k: f64,
) -> Result<LinearizedDerivative> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(GptError::InadmissibleConductivity(format!(
            "background {k}"
        )));
    }
    if m == 0 || n == 0 {
        return Err(GptError::InvalidArgument("orders must be >= 1".into()));
    }
    let scale = (2.0 / (k + 1.0)).powi(2) * (m * n) as f64;
    let moment = linearized_perturbation_map(gamma, grid, m, n);
    Ok(LinearizedDerivative {
        cc: scale * moment.re,
        ss: scale * moment.re,
        cs: -scale * moment.im,
        sc: scale * moment.im,
    })
}

/// Singular values of the linearized map from a radial perturbation, written
/// in the hat basis on `nodes`, to the diagonal GPTs `M_{nn}`, `n ≤ max_order`,
/// at constant background `k`.
///
/// Row `n` weights `γ` by `r^{2n−1}`, so high orders see only the outer part of
/// the disk; the decay of these values quantifies the loss of resolution
/// towards the centre.
pub fn radial_resolution(nodes: &[f64], max_order: usize, k: f64) -> Result<Vec<f64>> {
    if nodes.len() < 2 || nodes.windows(2).any(|w| w[1] <= w[0]) || nodes[0] < 0.0 {
        return Err(GptError::InvalidArgument(
            "resolution nodes must be increasing and non-negative".into(),
        ));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(GptError::InadmissibleConductivity(format!(
            "background {k}"
        )));
    }
    let radius = nodes[nodes.len() - 1];
    let breaks = &nodes[..nodes.len() - 1];
    let grid = DiskGrid::with_breakpoints(radius, nodes.len() - 1, breaks)?;
    let c = (2.0 / (k + 1.0)).powi(2);
    let hat = |j: usize, r: f64| -> f64 {
        let left = if j > 0 {
            nodes[j - 1]
        } else {
            f64::NEG_INFINITY
        };
        let right = nodes.get(j + 1).copied().unwrap_or(f64::INFINITY);
        let x = nodes[j];
        if r <= x && r >= left {
            if j == 0 {
                1.0
            } else {
                (r - left) / (x - left)
            }
        } else if r > x && r <= right {
            (right - r) / (right - x)
        } else {
            0.0
        }
    };
    let a = DMatrix::from_fn(max_order, nodes.len(), |row, j| {
        let n = row + 1;
        let nn = (n * n) as f64;
        c * nn * grid.integrate_radial(|r| hat(j, r) * r.powi(2 * n as i32 - 2))
    });
    let mut sv: Vec<f64> = a
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(sv)
}
