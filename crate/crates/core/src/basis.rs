//! Disk geometry, trigonometric bookkeeping and volume quadrature.
//!
//! Functions on the circle `|x| = R` are stored as trigonometric coefficient
//! vectors over the modes `cos nθ, sin nθ` for `n = 1..=N`. The zero mode is
//! never stored: every Neumann-to-Dirichlet map in this crate acts on
//! zero-mean data. When a boundary function is flattened into a vector the
//! cosine modes come first, followed by the sine modes.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{GptError, Result};

/// The disk `B = {|x| < R}` centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskGeometry {
    radius: f64,
}

impl DiskGeometry {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GptError::InvalidArgument(format!(
                "disk radius must be positive, got {radius}"
            )));
        }
        Ok(Self { radius })
    }

    pub fn unit() -> Self {
        Self { radius: 1.0 }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * PI * self.radius
    }
}

impl Default for DiskGeometry {
    fn default() -> Self {
        Self::unit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    Cos,
    Sin,
}

impl Parity {
    pub fn label(self) -> &'static str {
        match self {
            Parity::Cos => "c",
            Parity::Sin => "s",
        }
    }
}

/// One trigonometric mode `cos nθ` or `sin nθ` with `n ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HarmonicMode {
    order: usize,
    parity: Parity,
}

impl HarmonicMode {
    pub fn new(order: usize, parity: Parity) -> Result<Self> {
        if order == 0 {
            return Err(GptError::InvalidArgument(
                "harmonic mode order must be at least 1 (zero mode is excluded)".into(),
            ));
        }
        Ok(Self { order, parity })
    }

    /// `cos nθ`. Panics on `n = 0`; use [`HarmonicMode::new`] for checked input.
    pub fn cos(order: usize) -> Self {
        Self::new(order, Parity::Cos).expect("mode order must be >= 1")
    }

    /// `sin nθ`. Panics on `n = 0`.
    pub fn sin(order: usize) -> Self {
        Self::new(order, Parity::Sin).expect("mode order must be >= 1")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Position of this mode in a flattened vector of `2 * max_order` entries.
    pub fn index(&self, max_order: usize) -> usize {
        match self.parity {
            Parity::Cos => self.order - 1,
            Parity::Sin => max_order + self.order - 1,
        }
    }

    /// Inverse of [`HarmonicMode::index`].
    pub fn from_index(index: usize, max_order: usize) -> Self {
        if index < max_order {
            Self::cos(index + 1)
        } else {
            Self::sin(index - max_order + 1)
        }
    }

    /// Angular factor `cos nθ` or `sin nθ`.
    pub fn angular(&self, theta: f64) -> f64 {
        let a = self.order as f64 * theta;
        match self.parity {
            Parity::Cos => a.cos(),
            Parity::Sin => a.sin(),
        }
    }

    /// θ-derivative of the angular factor.
    pub fn angular_derivative(&self, theta: f64) -> f64 {
        let n = self.order as f64;
        match self.parity {
            Parity::Cos => -n * (n * theta).sin(),
            Parity::Sin => n * (n * theta).cos(),
        }
    }

    /// All modes up to `max_order` in flattened-vector order.
    pub fn all(max_order: usize) -> Vec<Self> {
        (0..2 * max_order)
            .map(|i| Self::from_index(i, max_order))
            .collect()
    }
}

/// A zero-mean function `Σ (cₙ cos nθ + sₙ sin nθ)` on the circle of radius `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunction {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl BoundaryFunction {
    pub fn zeros(max_order: usize) -> Self {
        Self {
            cos: vec![0.0; max_order],
            sin: vec![0.0; max_order],
        }
    }

    pub fn new(cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if cos.len() != sin.len() {
            return Err(GptError::InvalidArgument(format!(
                "cosine and sine coefficient counts differ ({} vs {})",
                cos.len(),
                sin.len()
            )));
        }
        Ok(Self { cos, sin })
    }

    /// A single mode with the given coefficient.
    pub fn mode(mode: HarmonicMode, max_order: usize, value: f64) -> Self {
        let mut f = Self::zeros(max_order.max(mode.order()));
        f.set(mode, value);
        f
    }

    pub fn from_vector(max_order: usize, v: &DVector<f64>) -> Self {
        assert_eq!(v.len(), 2 * max_order, "vector length must be 2N");
        Self {
            cos: v.rows(0, max_order).iter().copied().collect(),
            sin: v.rows(max_order, max_order).iter().copied().collect(),
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            2 * self.max_order(),
            self.cos.iter().chain(self.sin.iter()).copied(),
        )
    }

    pub fn max_order(&self) -> usize {
        self.cos.len()
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    /// Coefficient of `mode`; zero beyond the stored order.
    pub fn get(&self, mode: HarmonicMode) -> f64 {
        let slot = match mode.parity() {
            Parity::Cos => &self.cos,
            Parity::Sin => &self.sin,
        };
        slot.get(mode.order() - 1).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, mode: HarmonicMode, value: f64) {
        assert!(mode.order() <= self.max_order(), "mode beyond max_order");
        match mode.parity() {
            Parity::Cos => self.cos[mode.order() - 1] = value,
            Parity::Sin => self.sin[mode.order() - 1] = value,
        }
    }

    /// Truncates or zero-pads to `max_order`.
    pub fn resized(&self, max_order: usize) -> Self {
        let mut cos = self.cos.clone();
        let mut sin = self.sin.clone();
        cos.resize(max_order, 0.0);
        sin.resize(max_order, 0.0);
        Self { cos, sin }
    }

    pub fn evaluate(&self, theta: f64) -> f64 {
        self.cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(i, (c, s))| {
                let a = (i + 1) as f64 * theta;
                c * a.cos() + s * a.sin()
            })
            .sum()
    }

    /// `∫_{|x|=R} f g ds`, exact by orthogonality.
    pub fn pairing(&self, other: &Self, radius: f64) -> f64 {
        let dot: f64 = self
            .cos
            .iter()
            .zip(&other.cos)
            .chain(self.sin.iter().zip(&other.sin))
            .map(|(a, b)| a * b)
            .sum();
        PI * radius * dot
    }

    /// Mean over the circle; identically zero for this representation.
    pub fn mean(&self) -> f64 {
        0.0
    }
}

/// A harmonic polynomial `Σ rⁿ (aₙᶜ cos nθ + aₙˢ sin nθ)` without constant term.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicPolynomial {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl HarmonicPolynomial {
    pub fn new(cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        let n = cos.len().max(sin.len());
        let mut cos = cos;
        let mut sin = sin;
        cos.resize(n, 0.0);
        sin.resize(n, 0.0);
        Ok(Self { cos, sin })
    }

    pub fn zeros(max_order: usize) -> Self {
        Self {
            cos: vec![0.0; max_order],
            sin: vec![0.0; max_order],
        }
    }

    /// `rⁿ cos nθ` or `rⁿ sin nθ`.
    pub fn mode(mode: HarmonicMode) -> Self {
        let mut h = Self::zeros(mode.order());
        h.set(mode, 1.0);
        h
    }

    pub fn max_order(&self) -> usize {
        self.cos.len()
    }

    pub fn get(&self, mode: HarmonicMode) -> f64 {
        let slot = match mode.parity() {
            Parity::Cos => &self.cos,
            Parity::Sin => &self.sin,
        };
        slot.get(mode.order() - 1).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, mode: HarmonicMode, value: f64) {
        if mode.order() > self.max_order() {
            self.cos.resize(mode.order(), 0.0);
            self.sin.resize(mode.order(), 0.0);
        }
        match mode.parity() {
            Parity::Cos => self.cos[mode.order() - 1] = value,
            Parity::Sin => self.sin[mode.order() - 1] = value,
        }
    }

    /// Non-zero `(mode, coefficient)` pairs.
    pub fn terms(&self) -> Vec<(HarmonicMode, f64)> {
        let n = self.max_order();
        (0..2 * n)
            .map(|i| HarmonicMode::from_index(i, n))
            .map(|m| (m, self.get(m)))
            .filter(|(_, a)| *a != 0.0)
            .collect()
    }

    /// Coefficients flattened as a `2N` vector (cosines first).
    pub fn to_vector(&self, max_order: usize) -> DVector<f64> {
        DVector::from_iterator(
            2 * max_order,
            HarmonicMode::all(max_order)
                .into_iter()
                .map(|m| self.get(m)),
        )
    }

    pub fn evaluate(&self, r: f64, theta: f64) -> f64 {
        self.terms()
            .iter()
            .map(|(m, a)| a * r.powi(m.order() as i32) * m.angular(theta))
            .sum()
    }

    /// Gradient in polar components `(∂h/∂r, (1/r) ∂h/∂θ)`.
    pub fn gradient_polar(&self, r: f64, theta: f64) -> (f64, f64) {
        self.terms().iter().fold((0.0, 0.0), |(gr, gt), (m, a)| {
            let n = m.order() as i32;
            let rn1 = r.powi(n - 1);
            (
                gr + a * n as f64 * rn1 * m.angular(theta),
                gt + a * rn1 * m.angular_derivative(theta),
            )
        })
    }

    /// Trace on `|x| = R`.
    pub fn trace(&self, radius: f64) -> BoundaryFunction {
        let mut f = BoundaryFunction::zeros(self.max_order());
        for (m, a) in self.terms() {
            f.set(m, a * radius.powi(m.order() as i32));
        }
        f
    }

    /// Outward normal derivative on `|x| = R`.
    pub fn normal_derivative(&self, radius: f64) -> BoundaryFunction {
        let mut f = BoundaryFunction::zeros(self.max_order());
        for (m, a) in self.terms() {
            let n = m.order() as i32;
            f.set(m, a * n as f64 * radius.powi(n - 1));
        }
        f
    }
}

/// Boundary trace of `rⁿ cos nθ` (or `sin`) on `|x| = R`: `Rⁿ` in the matching slot.
pub fn harmonic_trace(mode: HarmonicMode, radius: f64) -> Result<BoundaryFunction> {
    check_mode_and_radius(mode, radius)?;
    Ok(BoundaryFunction::mode(
        mode,
        mode.order(),
        radius.powi(mode.order() as i32),
    ))
}

/// `∂(rⁿ cos nθ)/∂ν` on `|x| = R`: `n Rⁿ⁻¹` in the matching slot.
pub fn harmonic_normal_derivative(mode: HarmonicMode, radius: f64) -> Result<BoundaryFunction> {
    check_mode_and_radius(mode, radius)?;
    let n = mode.order();
    Ok(BoundaryFunction::mode(
        mode,
        n,
        n as f64 * radius.powi(n as i32 - 1),
    ))
}

fn check_mode_and_radius(mode: HarmonicMode, radius: f64) -> Result<()> {
    if mode.order() == 0 {
        return Err(GptError::InvalidArgument("mode order 0".into()));
    }
    DiskGeometry::new(radius).map(|_| ())
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 1);
    let n = points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Polar quadrature grid on the disk.
///
/// The radial direction uses composite Gauss–Legendre on the partition
/// `0 < r₁ < … < r_P = R` with the Jacobian `r` folded into the weights; the
/// angular direction uses the trapezoidal rule on `angular_samples` equispaced
/// angles, exact for trigonometric polynomials of degree below that count.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskGrid {
    radius: f64,
    radial_nodes: Vec<f64>,
    points_per_interval: usize,
    angular_samples: usize,
    angular_order: usize,
    quad_radii: Vec<f64>,
    quad_weights: Vec<f64>,
}

pub const DEFAULT_ANGULAR_ORDER: usize = 16;
const DEFAULT_POINTS_PER_INTERVAL: usize = 8;
const DEFAULT_INTERVALS: usize = 32;

impl DiskGrid {
    /// `radial_nodes` is the strictly increasing partition, ending at `R`.
    pub fn new(
        radial_nodes: Vec<f64>,
        points_per_interval: usize,
        angular_samples: usize,
        angular_order: usize,
    ) -> Result<Self> {
        let radius = *radial_nodes
            .last()
            .ok_or_else(|| GptError::InvalidArgument("empty radial partition".into()))?;
        DiskGeometry::new(radius)?;
        if radial_nodes[0] <= 0.0 || radial_nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GptError::InvalidArgument(
                "radial nodes must be strictly increasing in (0, R]".into(),
            ));
        }
        if points_per_interval == 0 || angular_samples < 2 {
            return Err(GptError::InvalidArgument(
                "quadrature needs at least one radial and two angular points".into(),
            ));
        }
        let (gx, gw) = gauss_legendre(points_per_interval);
        let mut quad_radii = Vec::with_capacity(radial_nodes.len() * points_per_interval);
        let mut quad_weights = Vec::with_capacity(quad_radii.capacity());
        let mut left = 0.0;
        for &right in &radial_nodes {
            let half = 0.5 * (right - left);
            let mid = 0.5 * (right + left);
            for (x, w) in gx.iter().zip(&gw) {
                let r = mid + half * x;
                quad_radii.push(r);
                quad_weights.push(w * half * r);
            }
            left = right;
        }
        Ok(Self {
            radius,
            radial_nodes,
            points_per_interval,
            angular_samples,
            angular_order,
            quad_radii,
            quad_weights,
        })
    }

    /// Uniform partition with the default quadrature orders.
    pub fn uniform(radius: f64, intervals: usize) -> Result<Self> {
        Self::with_breakpoints(radius, intervals, &[])
    }

    /// Uniform partition refined so that every value in `breakpoints` is a node.
    ///
    /// Use this for integrands with kinks or jumps at known radii.
    pub fn with_breakpoints(radius: f64, intervals: usize, breakpoints: &[f64]) -> Result<Self> {
        if intervals == 0 {
            return Err(GptError::InvalidArgument(
                "need at least one interval".into(),
            ));
        }
        let mut nodes: Vec<f64> = (1..=intervals)
            .map(|i| radius * i as f64 / intervals as f64)
            .chain(
                breakpoints
                    .iter()
                    .copied()
                    .filter(|&b| b > 0.0 && b < radius),
            )
            .collect();
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * radius);
        if let Some(last) = nodes.last_mut() {
            *last = radius;
        }
        Self::new(
            nodes,
            DEFAULT_POINTS_PER_INTERVAL,
            4 * DEFAULT_ANGULAR_ORDER,
            DEFAULT_ANGULAR_ORDER,
        )
    }

    pub fn default_for(radius: f64) -> Self {
        Self::uniform(radius, DEFAULT_INTERVALS).expect("default grid is valid")
    }

    pub fn with_angular_samples(mut self, angular_samples: usize) -> Self {
        assert!(angular_samples >= 2);
        self.angular_samples = angular_samples;
        self
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn radial_nodes(&self) -> &[f64] {
        &self.radial_nodes
    }

    pub fn angular_order(&self) -> usize {
        self.angular_order
    }

    pub fn angular_samples(&self) -> usize {
        self.angular_samples
    }

    /// Highest degree `d` such that `∫_B p(r) dx` is exact for polynomials `p` of degree ≤ d.
    pub fn exact_radial_degree(&self) -> usize {
        2 * self.points_per_interval - 2
    }

    /// Radial quadrature abscissae, increasing.
    pub fn quad_radii(&self) -> &[f64] {
        &self.quad_radii
    }

    /// Radial quadrature weights including the Jacobian `r`.
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.angular_samples as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.angular_samples).map(|j| self.angle(j)).collect()
    }

    /// Number of `(r, θ)` quadrature points.
    pub fn len(&self) -> usize {
        self.quad_radii.len() * self.angular_samples
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `idx` as `(r, θ)`; points are ordered radius-major.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let a = idx / self.angular_samples;
        let j = idx % self.angular_samples;
        (self.quad_radii[a], self.angle(j))
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.quad_weights[idx / self.angular_samples] * 2.0 * PI / self.angular_samples as f64
    }

    /// Sum of all weights, `≈ πR²`.
    pub fn total_weight(&self) -> f64 {
        2.0 * PI * self.quad_weights.iter().sum::<f64>()
    }

    /// `∫_B f(|x|) dx` for a radial integrand.
    pub fn integrate_radial(&self, f: impl Fn(f64) -> f64) -> f64 {
        2.0 * PI
            * self
                .quad_radii
                .iter()
                .zip(&self.quad_weights)
                .map(|(&r, &w)| w * f(r))
                .sum::<f64>()
    }

    /// Samples `f(r, θ)` at every quadrature point.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> GridField {
        let angles = self.angles();
        let values = self
            .quad_radii
            .iter()
            .flat_map(|&r| angles.iter().map(move |&t| (r, t)))
            .map(|(r, t)| f(r, t))
            .collect();
        GridField { values }
    }
}

/// `∫_B f dx` by the grid's quadrature.
pub fn volume_integrate(grid: &DiskGrid, field: impl Fn(f64, f64) -> f64) -> f64 {
    grid.sample(field).integrate(grid)
}

/// Scalar values at the quadrature points of a [`DiskGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: &DiskGrid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: &DiskGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GptError::InvalidArgument(format!(
                "grid field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn integrate(&self, grid: &DiskGrid) -> f64 {
        let q = grid.angular_samples();
        let dtheta = 2.0 * PI / q as f64;
        self.values
            .chunks(q)
            .zip(grid.quad_weights())
            .map(|(row, w)| w * row.iter().sum::<f64>())
            .sum::<f64>()
            * dtheta
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn product(&self, other: &Self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, c: f64, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    /// Angular average at each radial quadrature abscissa.
    pub fn angular_average(&self, grid: &DiskGrid) -> Vec<f64> {
        let q = grid.angular_samples();
        self.values
            .chunks(q)
            .map(|row| row.iter().sum::<f64>() / q as f64)
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trace_examples() {
        let t = harmonic_trace(HarmonicMode::cos(1), 1.0).unwrap();
        assert_eq!(t.cos_coeffs(), &[1.0]);
        let t = harmonic_trace(HarmonicMode::sin(3), 2.0).unwrap();
        assert_eq!(t.get(HarmonicMode::sin(3)), 8.0);
        assert_eq!(t.get(HarmonicMode::cos(3)), 0.0);
        let t = harmonic_trace(HarmonicMode::cos(2), 0.5).unwrap();
        assert_eq!(t.get(HarmonicMode::cos(2)), 0.25);
    }

    #[test]
    fn normal_derivative_examples() {
        let d = |m, r| harmonic_normal_derivative(m, r).unwrap().get(m);
        assert_eq!(d(HarmonicMode::cos(1), 1.0), 1.0);
        assert_eq!(d(HarmonicMode::cos(4), 1.0), 4.0);
        assert_eq!(d(HarmonicMode::sin(2), 2.0), 4.0);
    }

    #[test]
    fn zero_mode_rejected() {
        assert!(HarmonicMode::new(0, Parity::Cos).is_err());
        assert!(DiskGeometry::new(0.0).is_err());
        assert!(DiskGeometry::new(-1.0).is_err());
    }

    #[test]
    fn trace_is_scaled_normal_derivative() {
        for n in 1..=10 {
            for &r in &[0.5, 1.0, 2.0] {
                for m in [HarmonicMode::cos(n), HarmonicMode::sin(n)] {
                    let t = harmonic_trace(m, r).unwrap().get(m);
                    let d = harmonic_normal_derivative(m, r).unwrap().get(m);
                    assert_relative_eq!(t, r / n as f64 * d, max_relative = 1e-15);
                }
            }
        }
    }

    #[test]
    fn area_matches_geometry() {
        let g = DiskGeometry::new(1.5).unwrap();
        assert_relative_eq!(g.area(), PI * 2.25, max_relative = 1e-15);
        let grid = DiskGrid::default_for(1.5);
        assert!((grid.total_weight() - g.area()).abs() <= 1e-12 * g.area());
    }

    #[test]
    fn volume_integrate_examples() {
        let grid = DiskGrid::default_for(1.0);
        assert!((volume_integrate(&grid, |_, _| 1.0) - PI).abs() < 1e-12);
        assert_relative_eq!(
            volume_integrate(&grid, |r, _| r * r),
            PI / 2.0,
            max_relative = 1e-13
        );
        assert!(volume_integrate(&grid, |r, t| r * t.cos()).abs() < 1e-12);
    }

    #[test]
    fn quadrature_exact_up_to_declared_degree() {
        let grid = DiskGrid::uniform(1.3, 3).unwrap();
        let d = grid.exact_radial_degree();
        for k in 0..=d {
            let exact = 2.0 * PI * 1.3f64.powi(k as i32 + 2) / (k as f64 + 2.0);
            let q = grid.integrate_radial(|r| r.powi(k as i32));
            assert_relative_eq!(q, exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn refinement_changes_smooth_integral_little() {
        let f = |r: f64, t: f64| (1.0 + r * r).ln() * (2.0 + (3.0 * t).cos()) * (r * 3.0).sin();
        let a = volume_integrate(&DiskGrid::uniform(1.0, 16).unwrap(), f);
        let b = volume_integrate(&DiskGrid::uniform(1.0, 32).unwrap(), f);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for p in 1..=20 {
            let (x, w) = gauss_legendre(p);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
            assert!(x.windows(2).all(|s| s[0] < s[1]));
        }
    }

    #[test]
    fn breakpoints_become_nodes() {
        let grid = DiskGrid::with_breakpoints(1.0, 10, &[0.37, 0.5]).unwrap();
        assert!(grid.radial_nodes().contains(&0.37));
        let ind = volume_integrate(&grid, |r, _| if r <= 0.37 { 1.0 } else { 0.0 });
        assert_relative_eq!(ind, PI * 0.37 * 0.37, max_relative = 1e-13);
    }

    #[test]
    fn pairing_and_vector_roundtrip() {
        let f = BoundaryFunction::new(vec![1.0, 2.0], vec![0.5, -1.0]).unwrap();
        let v = f.to_vector();
        assert_eq!(BoundaryFunction::from_vector(2, &v), f);
        // ∫ f² R dθ = πR Σ c²
        assert_relative_eq!(f.pairing(&f, 2.0), PI * 2.0 * 6.25, max_relative = 1e-15);
        // numerical check of the pairing against trapezoid
        let q = 64;
        let num: f64 = (0..q)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / q as f64;
                f.evaluate(t).powi(2)
            })
            .sum::<f64>()
            * 2.0
            * PI
            / q as f64
            * 2.0;
        assert_relative_eq!(num, f.pairing(&f, 2.0), max_relative = 1e-13);
    }

    #[test]
    fn harmonic_gradient_matches_finite_difference() {
        let mut h = HarmonicPolynomial::zeros(3);
        h.set(HarmonicMode::cos(2), 0.7);
        h.set(HarmonicMode::sin(3), -1.2);
        h.set(HarmonicMode::cos(1), 0.3);
        let (r, t) = (0.6, 0.9);
        let e = 1e-6;
        let dr = (h.evaluate(r + e, t) - h.evaluate(r - e, t)) / (2.0 * e);
        let dt = (h.evaluate(r, t + e) - h.evaluate(r, t - e)) / (2.0 * e) / r;
        let (gr, gt) = h.gradient_polar(r, t);
        assert!((gr - dr).abs() < 1e-8);
        assert!((gt - dt).abs() < 1e-8);
    }
}
