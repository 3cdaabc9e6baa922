//! Contracted generalized polarization tensors.
//!
//! For receiver `rᵐ cos mθ` / `rᵐ sin mθ` and source `rⁿ cos nθ` / `rⁿ sin nθ`
//! the contracted GPT is
//!
//! ```text
//! M_{mn} = ∫_{∂B} h_m · Λ₁⁻¹(Λ₁ − Λ_σ)(Λ_σ − Λᵉ)⁻¹(Λ₁ − Λᵉ)[∂h_n/∂ν] ds.
//! ```
//!
//! Boundary pairings are evaluated exactly in the trigonometric basis. The
//! same quantity is available through a volume integral
//! ([`gpt_volume_identity`]) and a boundary formula in terms of the interior
//! transmission state ([`gpt_boundary_formula`]); the three paths are
//! independent and are cross-checked in the tests.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};

use crate::basis::{DiskGrid, HarmonicMode, HarmonicPolynomial, Parity};
use crate::conductivity::ConductivityField;
use crate::error::{GptError, Result};
use crate::ntd::radial::{solve_mode, DEFAULT_TOLERANCE};
use crate::ntd::{
    fem_transmission_states, ntd_exterior, ntd_harmonic, ntd_radial_operator, ntd_sigma_general,
    FemOptions, NtDOperator, CONDITION_LIMIT,
};
use crate::sensitivity::{radial_datum, StateCache};

/// Relative size of the last retained far-field term above which a warning is logged.
pub const FAR_FIELD_TAIL_WARNING: f64 = 1e-6;

/// Solver choices for forward GPT evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForwardOptions {
    pub fem: FemOptions,
    /// Use the finite-element path even for radial conductivities.
    pub force_fem: bool,
}

/// The four `N × N` blocks `M^{cc}, M^{cs}, M^{sc}, M^{ss}`; the first letter
/// is the receiver parity, the second the source parity.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractedGptTable {
    radius: f64,
    cc: DMatrix<f64>,
    cs: DMatrix<f64>,
    sc: DMatrix<f64>,
    ss: DMatrix<f64>,
}

impl ContractedGptTable {
    pub fn new(
        radius: f64,
        cc: DMatrix<f64>,
        cs: DMatrix<f64>,
        sc: DMatrix<f64>,
        ss: DMatrix<f64>,
    ) -> Result<Self> {
        let n = cc.nrows();
        if n == 0 || [&cc, &cs, &sc, &ss].iter().any(|b| b.shape() != (n, n)) {
            return Err(GptError::InvalidArgument(
                "GPT blocks must be non-empty and square of equal size".into(),
            ));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GptError::InvalidArgument(format!("radius {radius}")));
        }
        Ok(Self {
            radius,
            cc,
            cs,
            sc,
            ss,
        })
    }

    pub fn zeros(max_order: usize, radius: f64) -> Result<Self> {
        let z = DMatrix::zeros(max_order, max_order);
        Self::new(radius, z.clone(), z.clone(), z.clone(), z)
    }

    /// Splits a `2N × 2N` matrix ordered (cos 1..N, sin 1..N).
    pub fn from_assembled(radius: f64, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || !m.nrows().is_multiple_of(2) || m.nrows() == 0 {
            return Err(GptError::InvalidArgument(
                "assembled GPT matrix must be 2N × 2N".into(),
            ));
        }
        let n = m.nrows() / 2;
        Self::new(
            radius,
            m.view((0, 0), (n, n)).into_owned(),
            m.view((0, n), (n, n)).into_owned(),
            m.view((n, 0), (n, n)).into_owned(),
            m.view((n, n), (n, n)).into_owned(),
        )
    }

    pub fn max_order(&self) -> usize {
        self.cc.nrows()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn block(&self, receiver: Parity, source: Parity) -> &DMatrix<f64> {
        match (receiver, source) {
            (Parity::Cos, Parity::Cos) => &self.cc,
            (Parity::Cos, Parity::Sin) => &self.cs,
            (Parity::Sin, Parity::Cos) => &self.sc,
            (Parity::Sin, Parity::Sin) => &self.ss,
        }
    }

    pub fn cc(&self) -> &DMatrix<f64> {
        &self.cc
    }

    pub fn cs(&self) -> &DMatrix<f64> {
        &self.cs
    }

    pub fn sc(&self) -> &DMatrix<f64> {
        &self.sc
    }

    pub fn ss(&self) -> &DMatrix<f64> {
        &self.ss
    }

    /// Entry for receiver `m` and source `n`.
    pub fn entry(&self, receiver: HarmonicMode, source: HarmonicMode) -> f64 {
        self.block(receiver.parity(), source.parity())[(receiver.order() - 1, source.order() - 1)]
    }

    /// `[[M^{cc}, M^{cs}], [M^{sc}, M^{ss}]]`.
    pub fn assembled(&self) -> DMatrix<f64> {
        let n = self.max_order();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.cc);
        m.view_mut((0, n), (n, n)).copy_from(&self.cs);
        m.view_mut((n, 0), (n, n)).copy_from(&self.sc);
        m.view_mut((n, n), (n, n)).copy_from(&self.ss);
        m
    }

    pub fn truncated(&self, max_order: usize) -> Result<Self> {
        if max_order == 0 || max_order > self.max_order() {
            return Err(GptError::InvalidArgument(format!(
                "cannot truncate order {} table to {max_order}",
                self.max_order()
            )));
        }
        let t = |b: &DMatrix<f64>| b.view((0, 0), (max_order, max_order)).into_owned();
        Self::new(
            self.radius,
            t(&self.cc),
            t(&self.cs),
            t(&self.sc),
            t(&self.ss),
        )
    }

    /// Frobenius norm of the assembled matrix.
    pub fn norm(&self) -> f64 {
        self.assembled().norm()
    }

    /// Largest `|Mᵢⱼ − Mⱼᵢ|` of the assembled matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.assembled();
        (&m - m.transpose()).amax()
    }

    /// Largest entry of `M^{cs}`, `M^{sc}` and the off-diagonal parts of
    /// `M^{cc}`, `M^{ss}`, together with the largest `|M^{cc}_{nn} − M^{ss}_{nn}|`.
    pub fn radial_structure_defect(&self) -> (f64, f64) {
        let n = self.max_order();
        let mut off = self.cs.amax().max(self.sc.amax());
        let mut diag = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off.max(self.cc[(i, j)].abs()).max(self.ss[(i, j)].abs());
                }
            }
            diag = diag.max((self.cc[(i, i)] - self.ss[(i, i)]).abs());
        }
        (off, diag)
    }

    /// Largest entrywise difference to `other` over the common orders.
    pub fn max_difference(&self, other: &Self) -> f64 {
        let n = self.max_order().min(other.max_order());
        let a = self.truncated(n).expect("n ≤ order").assembled();
        let b = other.truncated(n).expect("n ≤ order").assembled();
        (a - b).amax()
    }
}

/// `2πn R^{2n} (k − 1)/(k + 1)`: `M^{cc}_{nn} = M^{ss}_{nn}` of the disk of radius `R`
/// with constant conductivity `k`.
pub fn gpt_homogeneous_disk(k: f64, radius: f64, order: usize) -> f64 {
    let n = order as f64;
    2.0 * PI * n * radius.powi(2 * order as i32) * (k - 1.0) / (k + 1.0)
}

/// `M_{nn}` of a radial conductivity whose NtD eigenvalue on mode `n` is `λ`:
/// `πR (nRⁿ⁻¹)² (λ₁ − λ)(λ₁ − λᵉ)/(λ − λᵉ)` with `λ₁ = R/n = −λᵉ`.
pub(crate) fn diagonal_gpt(ntd: f64, order: usize, radius: f64) -> Result<f64> {
    let l1 = radius / order as f64;
    let den = ntd + l1;
    if !(den.abs() > 0.0 && den.is_finite()) {
        return Err(GptError::SingularSystem(format!(
            "Λ_σ − Λᵉ at mode {order}"
        )));
    }
    let d = order as f64 * radius.powi(order as i32 - 1);
    Ok(PI * radius * d * d * (l1 - ntd) * 2.0 * l1 / den)
}

/// GPT table from a given `Λ_σ` on the disk of radius `radius`.
pub fn contracted_gpts_from_ntd(sigma_op: &NtDOperator, radius: f64) -> Result<ContractedGptTable> {
    let n = sigma_op.max_order();
    let lam1 = ntd_harmonic(n, radius)?;
    let lame = ntd_exterior(n, radius)?;
    // ∂hₙ/∂ν = n Rⁿ⁻¹ eₙ; the receiver trace Rᵐ eₘ composed with Λ₁⁻¹ is m Rᵐ⁻¹ eₘ.
    let d: Vec<f64> = (1..=n)
        .map(|k| k as f64 * radius.powi(k as i32 - 1))
        .collect();
    let full = match sigma_op {
        NtDOperator::Diagonal(lam) => {
            let mut m = DMatrix::zeros(2 * n, 2 * n);
            for i in 0..2 * n {
                m[(i, i)] = diagonal_gpt(lam[i % n], i % n + 1, radius)?;
            }
            m
        }
        NtDOperator::Dense(lam) => {
            let diff = sigma_op.difference(&lame);
            let cond = diff.condition_estimate();
            if !cond.is_finite() || cond > CONDITION_LIMIT {
                return Err(GptError::IllConditioned { condition: cond });
            }
            let dd = |i: usize| d[i % n];
            let rhs = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
                if i == j {
                    (lam1.diagonal_entry(i % n + 1) - lame.diagonal_entry(i % n + 1)) * dd(j)
                } else {
                    0.0
                }
            });
            let x = diff
                .matrix()
                .lu()
                .solve(&rhs)
                .ok_or_else(|| GptError::SingularSystem("Λ_σ − Λᵉ".into()))?;
            let left = lam1.matrix() - lam;
            let core = left * x;
            DMatrix::from_fn(2 * n, 2 * n, |i, j| PI * radius * dd(i) * core[(i, j)])
        }
    };
    if full.iter().any(|v| !v.is_finite()) {
        return Err(GptError::NonFinite("contracted GPT table".into()));
    }
    ContractedGptTable::from_assembled(radius, &full)
}

/// Contracted GPTs up to order `max_order` with explicit solver options.
pub fn contracted_gpts_with(
    sigma: &ConductivityField,
    max_order: usize,
    radius: f64,
    opts: &ForwardOptions,
) -> Result<ContractedGptTable> {
    match sigma {
        ConductivityField::Radial(p) if !opts.force_fem => {
            contracted_gpts_from_ntd(&ntd_radial_operator(p, max_order, radius)?, radius)
        }
        _ => {
            // Modes couple, so (Λ_σ − Λᵉ)⁻¹ is formed at the full Fourier order
            // of the solve and the table is truncated afterwards.
            let k = opts.fem.angular_order_for(max_order);
            let fem = FemOptions {
                angular_order: Some(k),
                ..opts.fem.clone()
            };
            let op = ntd_sigma_general(sigma, k, radius, &fem)?;
            contracted_gpts_from_ntd(&op, radius)?.truncated(max_order)
        }
    }
}

/// Contracted GPTs up to order `max_order`: per-mode radial solves when `σ`
/// is radial, finite elements otherwise.
pub fn contracted_gpts(
    sigma: &ConductivityField,
    max_order: usize,
    radius: f64,
) -> Result<ContractedGptTable> {
    contracted_gpts_with(sigma, max_order, radius, &ForwardOptions::default())
}

/// `(u − h)(x)` together with the magnitude of the last retained order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldValue {
    pub value: f64,
    pub tail: f64,
}

/// Far-field perturbation at the exterior point `x` from a GPT table:
///
/// ```text
/// (u − h)(x) = −Σₘ cos mθ/(2πm rᵐ) Σₙ (M^{cc}ₘₙ aₙᶜ + M^{cs}ₘₙ aₙˢ)
///              −Σₘ sin mθ/(2πm rᵐ) Σₙ (M^{sc}ₘₙ aₙᶜ + M^{ss}ₘₙ aₙˢ),
/// ```
///
/// summed over every order in the table. Source coefficients beyond the
/// table order are ignored.
pub fn far_field_from_table(
    table: &ContractedGptTable,
    h: &HarmonicPolynomial,
    x: [f64; 2],
) -> Result<FarFieldValue> {
    let r = x[0].hypot(x[1]);
    if !(r > table.radius()) {
        return Err(GptError::InvalidArgument(format!(
            "far-field point at |x| = {r} is not outside the disk of radius {}",
            table.radius()
        )));
    }
    let theta = x[1].atan2(x[0]);
    let n = table.max_order();
    let a = h.to_vector(n);
    let mut value = 0.0;
    let mut last = 0.0;
    for m in 1..=n {
        let mut cos_sum = 0.0;
        let mut sin_sum = 0.0;
        for k in 0..n {
            cos_sum += table.cc[(m - 1, k)] * a[k] + table.cs[(m - 1, k)] * a[n + k];
            sin_sum += table.sc[(m - 1, k)] * a[k] + table.ss[(m - 1, k)] * a[n + k];
        }
        let mf = m as f64;
        let scale = 2.0 * PI * mf * r.powi(m as i32);
        let term = -((mf * theta).cos() * cos_sum + (mf * theta).sin() * sin_sum) / scale;
        value += term;
        last = term;
    }
    let tail = last.abs();
    if tail > FAR_FIELD_TAIL_WARNING * value.abs().max(f64::MIN_POSITIVE) && tail > 0.0 {
        log::warn!(
            "far-field series at |x| = {r}: last retained term {tail:e} against value {value:e}"
        );
    }
    Ok(FarFieldValue { value, tail })
}

/// Far-field perturbation `(u − h)(x)` for background `h`, from GPTs up to `max_order`.
pub fn far_field_eval(
    sigma: &ConductivityField,
    radius: f64,
    h: &HarmonicPolynomial,
    x: [f64; 2],
    max_order: usize,
) -> Result<FarFieldValue> {
    let table = contracted_gpts(sigma, max_order, radius)?;
    far_field_from_table(&table, h, x)
}

/// A quadrature grid suited to `σ` and harmonics up to `max_order`.
pub fn default_grid(sigma: &ConductivityField, radius: f64, max_order: usize) -> Result<DiskGrid> {
    let breaks = sigma
        .as_radial()
        .map(|p| p.breakpoints().to_vec())
        .unwrap_or_default();
    let samples = match sigma {
        ConductivityField::Gridded(g) => (4 * max_order + 8).max(64).max(4 * g.n_theta()),
        _ => (4 * max_order + 8).max(64),
    };
    Ok(DiskGrid::with_breakpoints(radius, 64, &breaks)?.with_angular_samples(samples))
}

/// `∫_B (σ − 1) ∇u₁ · ∇h₂ dx`, `u₁` the transmission state for background `h₁`.
pub fn gpt_volume_identity(
    sigma: &ConductivityField,
    radius: f64,
    h1: &HarmonicPolynomial,
    h2: &HarmonicPolynomial,
    grid: &DiskGrid,
    opts: &ForwardOptions,
) -> Result<f64> {
    let terms = h1.terms();
    if terms.is_empty() || h2.terms().is_empty() {
        return Ok(0.0);
    }
    let order = h1.max_order();
    let cache = StateCache::on_grid(sigma, radius, order, grid, opts)?;
    let mut total = 0.0;
    for idx in 0..grid.len() {
        let (r, t) = grid.point(idx);
        let contrast = sigma.value(r, t) - 1.0;
        if contrast == 0.0 {
            continue;
        }
        let (gr, gt) = terms.iter().fold((0.0, 0.0), |(a, b), (mode, c)| {
            let s = cache.state(*mode);
            (a + c * s.radial()[idx], b + c * s.angular()[idx])
        });
        let (hr, ht) = h2.gradient_polar(r, t);
        total += grid.weight(idx) * contrast * (gr * hr + gt * ht);
    }
    Ok(total)
}

/// `∫_{∂B} h_m σ ∂u_n/∂ν ds − ∫_{∂B} ∂h_m/∂ν u_n ds` for receiver `h_m = rᵐ(cos|sin) mθ`
/// and `u_n` the interior transmission state of the source `h_n`.
pub fn gpt_boundary_formula(
    sigma: &ConductivityField,
    radius: f64,
    receiver: HarmonicMode,
    source: HarmonicMode,
    opts: &ForwardOptions,
) -> Result<f64> {
    let m = receiver.order();
    let trace = radius.powi(m as i32);
    let normal = m as f64 * radius.powi(m as i32 - 1);
    match sigma {
        ConductivityField::Radial(p) if !opts.force_fem => {
            if receiver != source {
                return Ok(0.0);
            }
            let sol = solve_mode(p, m, radius, &[radius], DEFAULT_TOLERANCE)?;
            // σ ∂u/∂ν = ψ on the mode, u = ψ f(R) there
            let psi = radial_datum(sol.ntd(), m, radius);
            Ok(PI * radius * (trace * psi - normal * psi * sol.values()[0]))
        }
        _ => {
            let order = m.max(source.order());
            let states = fem_transmission_states(sigma, radius, order, &opts.fem)?;
            let state = &states[source.index(order)];
            let g = state.datum(order).get(receiver);
            let u = state.trace(order).get(receiver);
            Ok(PI * radius * (trace * g - normal * u))
        }
    }
}

/// The whole table by the boundary formula of [`gpt_boundary_formula`], with
/// one state solve per source.
pub fn gpt_table_boundary_formula(
    sigma: &ConductivityField,
    max_order: usize,
    radius: f64,
    opts: &ForwardOptions,
) -> Result<ContractedGptTable> {
    if max_order == 0 {
        return Err(GptError::InvalidArgument(
            "truncation order must be >= 1".into(),
        ));
    }
    let n = max_order;
    let mut full = DMatrix::zeros(2 * n, 2 * n);
    match sigma {
        ConductivityField::Radial(_) if !opts.force_fem => {
            for i in 0..2 * n {
                let mode = HarmonicMode::from_index(i, n);
                full[(i, i)] = gpt_boundary_formula(sigma, radius, mode, mode, opts)?;
            }
        }
        _ => {
            let states = fem_transmission_states(sigma, radius, n, &opts.fem)?;
            for (j, state) in states.iter().enumerate() {
                let g = state.datum(n).to_vector();
                let u = state.trace(n).to_vector();
                for i in 0..2 * n {
                    let m = (i % n + 1) as i32;
                    let trace = radius.powi(m);
                    let normal = m as f64 * radius.powi(m - 1);
                    full[(i, j)] = PI * radius * (trace * g[i] - normal * u[i]);
                }
            }
        }
    }
    ContractedGptTable::from_assembled(radius, &full)
}

/// `aᵀ M a` for the coefficient vector `a` of `h` (orders beyond the table ignored).
pub fn quadratic_form(table: &ContractedGptTable, h: &HarmonicPolynomial) -> f64 {
    let a = h.to_vector(table.max_order());
    a.dot(&(table.assembled() * &a))
}

/// `(∫_B (σ−1)/σ |∇h|² dx, ∫_B (σ−1) |∇h|² dx)`, which bracket `aᵀ M a`.
pub fn positivity_bounds(
    sigma: &ConductivityField,
    h: &HarmonicPolynomial,
    grid: &DiskGrid,
) -> (f64, f64) {
    let mut lower = 0.0;
    let mut upper = 0.0;
    for idx in 0..grid.len() {
        let (r, t) = grid.point(idx);
        let s = sigma.value(r, t);
        let (hr, ht) = h.gradient_polar(r, t);
        let g2 = hr * hr + ht * ht;
        let w = grid.weight(idx);
        lower += w * (s - 1.0) / s * g2;
        upper += w * (s - 1.0) * g2;
    }
    (lower, upper)
}

/// The first-order polarization tensor, symmetric `2 × 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderPt {
    pub matrix: Matrix2<f64>,
}

impl FirstOrderPt {
    pub fn eigenvalues(&self) -> (f64, f64) {
        let e = self.matrix.symmetric_eigenvalues();
        (e[0].min(e[1]), e[0].max(e[1]))
    }
}

/// `[[M^{cc}_{11}, M^{cs}_{11}], [M^{sc}_{11}, M^{ss}_{11}]]`.
pub fn first_order_pt(table: &ContractedGptTable) -> FirstOrderPt {
    FirstOrderPt {
        matrix: Matrix2::new(
            table.cc[(0, 0)],
            table.cs[(0, 0)],
            table.sc[(0, 0)],
            table.ss[(0, 0)],
        ),
    }
}
