//! Conductivity distributions on the disk.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{GptError, Result};

type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Constant(f64),
    Function(ProfileFn),
    PiecewiseLinear {
        nodes: Vec<f64>,
        values: Vec<f64>,
    },
    /// `inner` on `[0, support]`, `1` beyond.
    Extended {
        inner: Box<RadialProfile>,
        support: f64,
        breaks: Vec<f64>,
    },
}

/// A radially symmetric conductivity `σ(r)` with bounds `λ₁ ≤ σ ≤ λ₂`.
#[derive(Clone)]
pub struct RadialProfile {
    shape: Shape,
    lower: f64,
    upper: f64,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.shape {
            Shape::Constant(k) => format!("Constant({k})"),
            Shape::Function(_) => "Function".to_string(),
            Shape::PiecewiseLinear { nodes, .. } => {
                format!("PiecewiseLinear({} nodes)", nodes.len())
            }
            Shape::Extended { inner, support, .. } => {
                format!("Extended({inner:?}, support {support})")
            }
        };
        f.debug_struct("RadialProfile")
            .field("shape", &kind)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

const BOUND_SAMPLES: usize = 2001;

fn check_value(v: f64, what: &str) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(GptError::InadmissibleConductivity(format!(
            "{what} must be finite and positive, got {v}"
        )));
    }
    Ok(())
}

impl RadialProfile {
    pub fn constant(k: f64) -> Result<Self> {
        check_value(k, "conductivity")?;
        Ok(Self {
            shape: Shape::Constant(k),
            lower: k,
            upper: k,
        })
    }

    /// Wraps a callable profile. Bounds are estimated by sampling `[0, radius]`.
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static, radius: f64) -> Result<Self> {
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        for i in 0..BOUND_SAMPLES {
            let r = radius * i as f64 / (BOUND_SAMPLES - 1) as f64;
            let v = f(r);
            check_value(v, &format!("σ({r})"))?;
            lower = lower.min(v);
            upper = upper.max(v);
        }
        Ok(Self {
            shape: Shape::Function(Arc::new(f)),
            lower,
            upper,
        })
    }

    /// Continuous piecewise-linear profile through `(nodes[i], values[i])`,
    /// held constant outside the node range.
    pub fn piecewise_linear(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.is_empty() {
            return Err(GptError::InvalidArgument(
                "piecewise-linear profile needs matching, non-empty node and value lists".into(),
            ));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) || nodes[0] < 0.0 {
            return Err(GptError::InvalidArgument(
                "profile nodes must be non-negative and strictly increasing".into(),
            ));
        }
        for &v in &values {
            check_value(v, "profile value")?;
        }
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            shape: Shape::PiecewiseLinear { nodes, values },
            lower,
            upper,
        })
    }

    pub fn value(&self, r: f64) -> f64 {
        match &self.shape {
            Shape::Constant(k) => *k,
            Shape::Function(f) => f(r),
            Shape::PiecewiseLinear { nodes, values } => interpolate(nodes, values, r),
            Shape::Extended { inner, support, .. } => {
                if r <= *support {
                    inner.value(r)
                } else {
                    1.0
                }
            }
        }
    }

    /// Radii where the profile may have a kink.
    pub fn breakpoints(&self) -> &[f64] {
        match &self.shape {
            Shape::PiecewiseLinear { nodes, .. } => nodes,
            Shape::Extended { breaks, .. } => breaks,
            _ => &[],
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.shape {
            Shape::Constant(k) => Some(k),
            _ => None,
        }
    }

    /// Node values of a piecewise-linear profile.
    pub fn nodal(&self) -> Option<(&[f64], &[f64])> {
        match &self.shape {
            Shape::PiecewiseLinear { nodes, values } => Some((nodes, values)),
            _ => None,
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// The same conductivity viewed in a larger disk: unchanged on `[0, support]`
    /// and equal to the background value `1` outside.
    pub fn extended(&self, support: f64) -> Result<Self> {
        if !(support > 0.0 && support.is_finite()) {
            return Err(GptError::InvalidArgument(format!(
                "support radius {support}"
            )));
        }
        if self.as_constant() == Some(1.0) {
            return Ok(self.clone());
        }
        let mut breaks: Vec<f64> = self
            .breakpoints()
            .iter()
            .copied()
            .filter(|&b| b < support)
            .collect();
        breaks.push(support);
        Ok(Self {
            shape: Shape::Extended {
                inner: Box::new(self.clone()),
                support,
                breaks,
            },
            lower: self.lower.min(1.0),
            upper: self.upper.max(1.0),
        })
    }

    /// Samples the profile onto `nodes` as a piecewise-linear profile.
    pub fn resampled(&self, nodes: &[f64]) -> Result<Self> {
        Self::piecewise_linear(
            nodes.to_vec(),
            nodes.iter().map(|&r| self.value(r)).collect(),
        )
    }
}

fn interpolate(nodes: &[f64], values: &[f64], r: f64) -> f64 {
    if r <= nodes[0] {
        return values[0];
    }
    let last = nodes.len() - 1;
    if r >= nodes[last] {
        return values[last];
    }
    let i = nodes.partition_point(|&x| x <= r) - 1;
    let t = (r - nodes[i]) / (nodes[i + 1] - nodes[i]);
    values[i] + t * (values[i + 1] - values[i])
}

/// A conductivity sampled on a polar grid: `radii × n_theta` equispaced angles.
///
/// Evaluation is linear in `r` (constant beyond the first and last radius) and
/// periodic-linear in `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedField {
    radii: Vec<f64>,
    n_theta: usize,
    values: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl GriddedField {
    /// `values` is radius-major: `values[i * n_theta + j] = σ(radii[i], 2πj/n_theta)`.
    pub fn new(radii: Vec<f64>, n_theta: usize, values: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || n_theta == 0 || values.len() != radii.len() * n_theta {
            return Err(GptError::InvalidArgument(format!(
                "gridded field needs radii.len() * n_theta = {} values, got {}",
                radii.len() * n_theta,
                values.len()
            )));
        }
        if radii[0] < 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GptError::InvalidArgument(
                "gridded field radii must be non-negative and strictly increasing".into(),
            ));
        }
        for &v in &values {
            check_value(v, "gridded conductivity value")?;
        }
        if radii[0] == 0.0 {
            let centre = &values[..n_theta];
            if centre
                .iter()
                .any(|v| (v - centre[0]).abs() > 1e-12 * centre[0])
            {
                return Err(GptError::InvalidArgument(
                    "values at r = 0 must agree for every angle".into(),
                ));
            }
        }
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            radii,
            n_theta,
            values,
            lower,
            upper,
        })
    }

    pub fn from_fn(radii: Vec<f64>, n_theta: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = radii
            .iter()
            .flat_map(|&r| (0..n_theta).map(move |j| (r, 2.0 * PI * j as f64 / n_theta as f64)))
            .map(|(r, t)| f(r, t))
            .collect();
        Self::new(radii, n_theta, values)
    }

    /// A smooth, non-radial field with values in `[lo, hi]`, drawn from `rng`.
    ///
    /// `σ = mid + half·tanh(Σ a_{jk} rʲ cos(kθ + φ_{jk}))` with low-order
    /// terms, so the field is smooth in `x` and strictly inside the bounds.
    pub fn random_smooth(
        rng: &mut impl Rng,
        radius: f64,
        lo: f64,
        hi: f64,
        radial_points: usize,
        n_theta: usize,
    ) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) {
            return Err(GptError::InvalidArgument(format!(
                "random field bounds must satisfy 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        let mut terms = Vec::new();
        for k in 0..=3usize {
            // rᵏ⁺²ʲ cos kθ is smooth at the origin
            for j in 0..2usize {
                let a: f64 = rng.random_range(-1.0..1.0);
                let phase: f64 = rng.random_range(0.0..2.0 * PI);
                terms.push((k, k + 2 * j, a, phase));
            }
        }
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo) * 0.95;
        let radii: Vec<f64> = (0..radial_points)
            .map(|i| radius * i as f64 / (radial_points - 1) as f64)
            .collect();
        Self::from_fn(radii, n_theta, |r, t| {
            let s = r / radius;
            let z: f64 = terms
                .iter()
                .map(|&(k, p, a, ph)| {
                    let ang = if k == 0 {
                        ph.cos()
                    } else {
                        (k as f64 * t + ph).cos()
                    };
                    a * s.powi(p as i32) * ang
                })
                .sum();
            mid + half * z.tanh()
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.radii[i], 2.0 * PI * j as f64 / self.n_theta as f64)
    }

    pub fn value(&self, r: f64, theta: f64) -> f64 {
        let nt = self.n_theta;
        let s = theta.rem_euclid(2.0 * PI) * nt as f64 / (2.0 * PI);
        let j0 = (s.floor() as usize) % nt;
        let j1 = (j0 + 1) % nt;
        let tw = s - s.floor();
        let ring = |i: usize| {
            let row = &self.values[i * nt..(i + 1) * nt];
            row[j0] + tw * (row[j1] - row[j0])
        };
        let last = self.radii.len() - 1;
        if r <= self.radii[0] {
            return ring(0);
        }
        if r >= self.radii[last] {
            return ring(last);
        }
        let i = self.radii.partition_point(|&x| x <= r) - 1;
        let t = (r - self.radii[i]) / (self.radii[i + 1] - self.radii[i]);
        ring(i) + t * (ring(i + 1) - ring(i))
    }

    /// New field on the same grid with `values[k] += delta[k]`, clamped below at `floor`.
    pub fn updated(&self, delta: &[f64], floor: f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .zip(delta)
            .map(|(v, d)| (v + d).max(floor))
            .collect();
        Self::new(self.radii.clone(), self.n_theta, values)
    }
}

/// A conductivity distribution `σ` on the disk.
#[derive(Debug, Clone)]
pub enum ConductivityField {
    Radial(RadialProfile),
    Gridded(GriddedField),
}

impl ConductivityField {
    pub fn constant(k: f64) -> Result<Self> {
        RadialProfile::constant(k).map(Self::Radial)
    }

    pub fn radial_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static, radius: f64) -> Result<Self> {
        RadialProfile::from_fn(f, radius).map(Self::Radial)
    }

    pub fn value(&self, r: f64, theta: f64) -> f64 {
        match self {
            Self::Radial(p) => p.value(r),
            Self::Gridded(g) => g.value(r, theta),
        }
    }

    /// `(λ₁, λ₂)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Self::Radial(p) => p.bounds(),
            Self::Gridded(g) => g.bounds(),
        }
    }

    pub fn as_radial(&self) -> Option<&RadialProfile> {
        match self {
            Self::Radial(p) => Some(p),
            Self::Gridded(_) => None,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, Self::Radial(_))
    }
}

impl From<RadialProfile> for ConductivityField {
    fn from(p: RadialProfile) -> Self {
        Self::Radial(p)
    }
}

impl From<GriddedField> for ConductivityField {
    fn from(g: GriddedField) -> Self {
        Self::Gridded(g)
    }
}

/// The radial test profile `σ(r) = (0.3r² + 0.5r³ + 6(r² − 0.5)² + 3)/3`.
pub fn benchmark_profile(r: f64) -> f64 {
    (0.3 * r * r + 0.5 * r.powi(3) + 6.0 * (r * r - 0.5).powi(2) + 3.0) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rejects_nonpositive_values() {
        assert!(RadialProfile::constant(0.0).is_err());
        assert!(RadialProfile::constant(f64::NAN).is_err());
        assert!(RadialProfile::from_fn(|r| 1.0 - 2.0 * r, 1.0).is_err());
        assert!(RadialProfile::piecewise_linear(vec![0.0, 1.0], vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn bounds_cover_profile() {
        let p = RadialProfile::from_fn(benchmark_profile, 1.0).unwrap();
        let (lo, hi) = p.bounds();
        for i in 0..=100 {
            let v = p.value(i as f64 / 100.0);
            assert!(lo <= v && v <= hi);
        }
        assert!((benchmark_profile(0.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn piecewise_linear_interpolates() {
        let p = RadialProfile::piecewise_linear(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(p.value(0.25), 1.5);
        assert_eq!(p.value(0.75), 3.0);
        assert_eq!(p.value(1.5), 4.0);
    }

    #[test]
    fn gridded_interpolation_is_exact_at_nodes_and_periodic() {
        let g = GriddedField::from_fn(vec![0.0, 0.5, 1.0], 8, |r, t| 2.0 + r * t.cos()).unwrap();
        let (r, t) = g.node(1, 3);
        assert!((g.value(r, t) - (2.0 + r * t.cos())).abs() < 1e-14);
        assert!((g.value(0.5, 0.1) - g.value(0.5, 0.1 + 2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn random_field_within_bounds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = GriddedField::random_smooth(&mut rng, 1.0, 0.5, 3.0, 17, 32).unwrap();
        let (lo, hi) = g.bounds();
        assert!(lo >= 0.5 && hi <= 3.0);
        // not radial
        assert!((g.value(0.8, 0.0) - g.value(0.8, 1.3)).abs() > 1e-6);
    }
}
