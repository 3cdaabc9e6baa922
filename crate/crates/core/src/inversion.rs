//! Conductivity reconstruction from contracted GPTs.
//!
//! The weighted misfit
//!
//! ```text
//! S(σ) = ½ Σ_{m,n ≤ ℓ} ω_{mn} (y_{mn} − M_{mn}(σ))²
//! ```
//!
//! is minimized by Landweber iteration
//! `σ ← σ + τ Σ ω_{mn} (y_{mn} − M_{mn}(σ)) ∇u_m·∇u_n`, clamped below at
//! `λ_min`. The active order `ℓ` grows stage by stage, and each stage starts
//! from the previous result interpolated onto a finer radial mesh.
//!
//! Two parametrizations are available. The radial one keeps `σ` piecewise
//! linear in `r`, uses the `M^{cc}` diagonal as data, and projects the update
//! onto radial functions by angular averaging. The gridded one keeps nodal
//! values on a polar grid and uses all four blocks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::{DiskGrid, HarmonicMode};
use crate::conductivity::{ConductivityField, GriddedField, RadialProfile};
use crate::error::{GptError, Result};
use crate::gpt::{contracted_gpts_with, diagonal_gpt, ContractedGptTable, ForwardOptions};
use crate::ntd::radial::{solve_mode, DEFAULT_TOLERANCE};
use crate::sensitivity::{radial_datum, StateCache};

/// Relative slack in the descent test, so steps that only move `S` at the
/// rounding level are accepted.
const DESCENT_SLACK: f64 = 1e-10;

/// Smallest step, relative to the configured one, before a stage gives up.
const MIN_STEP_FRACTION: f64 = 1e-12;

/// Relative size of `M^{cs}`, `M^{sc}` and off-diagonal entries above which a
/// target table is considered non-radial.
const RADIAL_TARGET_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parametrization {
    /// Piecewise-linear `σ(r)` on the stage nodes.
    Radial,
    /// Nodal values on stage nodes × `n_theta` equispaced angles.
    Gridded { n_theta: usize },
}

/// One stage of the recursive schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSpec {
    /// GPT orders `1..=order` are active.
    pub order: usize,
    /// Number of uniform radial nodes on `[0, R]`, endpoints included.
    pub nodes: usize,
    pub max_iter: usize,
    /// The stage ends once `ε_M` over the active orders drops below this.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionConfig {
    pub max_order: usize,
    pub radius: f64,
    /// `ω_{mn}`, `N × N`, non-negative.
    pub weights: DMatrix<f64>,
    pub step_size: f64,
    pub schedule: Vec<StageSpec>,
    /// Positivity floor `λ_min`.
    pub floor: f64,
    pub parametrization: Parametrization,
    /// A stage also ends when `ε_M` improved by less than `stall_tol` over
    /// the last `stall_window` iterations.
    pub stall_window: usize,
    pub stall_tol: f64,
    pub forward: ForwardOptions,
}

impl ReconstructionConfig {
    /// Defaults: weights `1/(mn R^{2(m+n)})`, step `0.1`, stages
    /// `ℓ = 1..N` on `8ℓ + 1` nodes with at most 300 iterations each,
    /// floor `0.1`, radial parametrization.
    pub fn new(max_order: usize, radius: f64) -> Self {
        Self {
            max_order,
            radius,
            weights: default_weights(max_order, radius),
            step_size: 0.1,
            schedule: default_schedule(max_order),
            floor: 0.1,
            parametrization: Parametrization::Radial,
            stall_window: 50,
            stall_tol: 1e-12,
            forward: ForwardOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GptError::InvalidArgument(m));
        if self.max_order == 0 {
            return bad("max order must be >= 1".into());
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius {}", self.radius));
        }
        if self.weights.shape() != (self.max_order, self.max_order) {
            return bad(format!(
                "weights are {:?}, expected {n} × {n}",
                self.weights.shape(),
                n = self.max_order
            ));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad("weights must be finite and non-negative".into());
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad(format!("step size {}", self.step_size));
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return bad(format!("positivity floor {}", self.floor));
        }
        if self.schedule.is_empty() {
            return bad("empty schedule".into());
        }
        let mut prev = 0;
        for s in &self.schedule {
            if s.order <= prev || s.order > self.max_order {
                return bad(format!(
                    "schedule orders must increase strictly up to {}",
                    self.max_order
                ));
            }
            if s.nodes < 2 {
                return bad("each stage needs at least two radial nodes".into());
            }
            if !(s.tol >= 0.0) {
                return bad(format!("stage tolerance {}", s.tol));
            }
            prev = s.order;
        }
        if let Parametrization::Gridded { n_theta } = self.parametrization {
            if n_theta < 4 {
                return bad("gridded parametrization needs at least 4 angles".into());
            }
        }
        Ok(())
    }
}

/// `ω_{mn} = 1/(mn R^{2(m+n)})`.
pub fn default_weights(max_order: usize, radius: f64) -> DMatrix<f64> {
    DMatrix::from_fn(max_order, max_order, |i, j| {
        let (m, n) = (i + 1, j + 1);
        1.0 / ((m * n) as f64 * radius.powi(2 * (m + n) as i32))
    })
}

/// Stages `ℓ = 1..N` with `8ℓ + 1` nodes, 300 iterations, tolerance `1e-12`.
pub fn default_schedule(max_order: usize) -> Vec<StageSpec> {
    (1..=max_order)
        .map(|l| StageSpec {
            order: l,
            nodes: 8 * l + 1,
            max_iter: 300,
            tol: 1e-12,
        })
        .collect()
}

/// One row of the convergence history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    /// Accepted Landweber steps so far.
    pub iteration: usize,
    /// Active order `ℓ`.
    pub stage: usize,
    /// `ε_M` over the active orders.
    pub eps_m: f64,
    /// `ε_σ` when a ground truth was supplied.
    pub eps_sigma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReconstructionState {
    pub sigma: ConductivityField,
    pub targets: ContractedGptTable,
    /// Active order `ℓ`.
    pub active_order: usize,
    /// Radial nodes of the current parametrization.
    pub nodes: Vec<f64>,
    pub iteration: usize,
    pub step: f64,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone)]
pub struct ReconstructionOutcome {
    pub sigma: ConductivityField,
    pub history: Vec<HistoryEntry>,
    pub iterations: usize,
    /// `ε_M` over all orders of the last stage.
    pub eps_m: f64,
    pub eps_sigma: Option<f64>,
    /// Whether each stage met its tolerance.
    pub stages_converged: Vec<bool>,
}

/// `σ₀ = (2|B| + M₁)/(2|B| − M₁)`, the constant disk with first GPT `M₁`.
pub fn initial_guess(m1: f64, area: f64) -> Result<ConductivityField> {
    if !(area > 0.0 && area.is_finite()) || !m1.is_finite() {
        return Err(GptError::InvalidArgument(format!(
            "M₁ = {m1}, |B| = {area}"
        )));
    }
    if m1 >= 2.0 * area {
        return Err(GptError::InadmissibleTarget(format!(
            "M₁ = {m1} is not below 2|B| = {}; no positive constant conductivity matches it",
            2.0 * area
        )));
    }
    let s0 = (2.0 * area + m1) / (2.0 * area - m1);
    if !(s0 > 0.0) {
        return Err(GptError::InadmissibleTarget(format!(
            "M₁ = {m1} gives the non-positive initial conductivity {s0}"
        )));
    }
    ConductivityField::constant(s0)
}

fn uniform_nodes(radius: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| radius * i as f64 / (count - 1) as f64)
        .collect()
}

fn check_radial_targets(targets: &ContractedGptTable) -> Result<()> {
    let (off, diag) = targets.radial_structure_defect();
    let scale = targets.norm().max(f64::MIN_POSITIVE);
    if off > RADIAL_TARGET_TOLERANCE * scale || diag > RADIAL_TARGET_TOLERANCE * scale {
        return Err(GptError::InadmissibleTarget(format!(
            "targets are not those of a radial conductivity (off-diagonal or cs/sc entries up to {off:e}, \
             |M^cc − M^ss| up to {diag:e}); use the gridded parametrization"
        )));
    }
    Ok(())
}

/// Forward data at the current iterate: active GPTs and the pointwise
/// ascent direction ingredients at the parameter nodes.
struct Evaluation {
    /// Residuals `y − M` per active entry, with their weights.
    residuals: Vec<(f64, f64)>,
    /// `∇u_m·∇u_n` (radial: angular average) at the parameter nodes, one row per residual.
    kernels: Vec<Vec<f64>>,
}

impl Evaluation {
    fn functional(&self) -> f64 {
        0.5 * self.residuals.iter().map(|(w, r)| w * r * r).sum::<f64>()
    }

    fn eps_m(&self) -> f64 {
        self.residuals.iter().map(|(_, r)| r * r).sum()
    }

    fn direction(&self) -> Vec<f64> {
        let len = self.kernels.first().map_or(0, Vec::len);
        let mut d = vec![0.0; len];
        for ((w, r), k) in self.residuals.iter().zip(&self.kernels) {
            for (di, ki) in d.iter_mut().zip(k) {
                *di += w * r * ki;
            }
        }
        d
    }
}

fn evaluate_radial(
    profile: &RadialProfile,
    nodes: &[f64],
    order: usize,
    targets: &ContractedGptTable,
    config: &ReconstructionConfig,
) -> Result<Evaluation> {
    let radius = config.radius;
    let per_mode = (1..=order)
        .into_par_iter()
        .map(|n| {
            let sol = solve_mode(profile, n, radius, nodes, DEFAULT_TOLERANCE)?;
            let m = diagonal_gpt(sol.ntd(), n, radius)?;
            let psi = radial_datum(sol.ntd(), n, radius);
            let nf = n as f64;
            // angular average of |∇u|² for u = ψ f(r) cos nθ
            let kernel = (0..nodes.len())
                .map(|i| {
                    let fp = sol.derivatives()[i];
                    let fr = nf * sol.value_over_radius(i);
                    0.5 * psi * psi * (fp * fp + fr * fr)
                })
                .collect::<Vec<_>>();
            let y = targets.cc()[(n - 1, n - 1)];
            Ok(((config.weights[(n - 1, n - 1)], y - m), kernel))
        })
        .collect::<Result<Vec<_>>>()?;
    let (residuals, kernels) = per_mode.into_iter().unzip();
    Ok(Evaluation { residuals, kernels })
}

fn gridded_points(nodes: &[f64], n_theta: usize) -> Vec<(f64, f64)> {
    nodes
        .iter()
        .flat_map(|&r| (0..n_theta).map(move |j| (r, 2.0 * PI * j as f64 / n_theta as f64)))
        .collect()
}

fn evaluate_gridded(
    sigma: &ConductivityField,
    nodes: &[f64],
    n_theta: usize,
    order: usize,
    targets: &ContractedGptTable,
    config: &ReconstructionConfig,
) -> Result<Evaluation> {
    let table = contracted_gpts_with(sigma, order, config.radius, &config.forward)?;
    let cache = StateCache::at_points(
        sigma,
        config.radius,
        order,
        gridded_points(nodes, n_theta),
        &config.forward,
    )?;
    let modes = HarmonicMode::all(order);
    let mut residuals = Vec::with_capacity(modes.len() * modes.len());
    let mut kernels = Vec::with_capacity(residuals.capacity());
    for &m in &modes {
        for &n in &modes {
            let w = config.weights[(m.order() - 1, n.order() - 1)];
            residuals.push((w, targets.entry(m, n) - table.entry(m, n)));
            let mut k = cache.kernel_values(m, n);
            // the centre ring is a single point
            let centre = k[..n_theta].iter().sum::<f64>() / n_theta as f64;
            k[..n_theta].fill(centre);
            kernels.push(k);
        }
    }
    Ok(Evaluation { residuals, kernels })
}

fn evaluate(
    sigma: &ConductivityField,
    nodes: &[f64],
    order: usize,
    targets: &ContractedGptTable,
    config: &ReconstructionConfig,
) -> Result<Evaluation> {
    match (config.parametrization, sigma) {
        (Parametrization::Radial, ConductivityField::Radial(p)) => {
            evaluate_radial(p, nodes, order, targets, config)
        }
        (Parametrization::Gridded { n_theta }, _) => {
            evaluate_gridded(sigma, nodes, n_theta, order, targets, config)
        }
        (Parametrization::Radial, ConductivityField::Gridded(_)) => Err(GptError::InvalidArgument(
            "radial parametrization needs a radial iterate".into(),
        )),
    }
}

/// Nodal values of the iterate in parameter order.
fn parameters(sigma: &ConductivityField, nodes: &[f64], config: &ReconstructionConfig) -> Vec<f64> {
    match config.parametrization {
        Parametrization::Radial => nodes.iter().map(|&r| sigma.value(r, 0.0)).collect(),
        Parametrization::Gridded { n_theta } => gridded_points(nodes, n_theta)
            .into_iter()
            .map(|(r, t)| sigma.value(r, t))
            .collect(),
    }
}

fn from_parameters(
    values: Vec<f64>,
    nodes: &[f64],
    config: &ReconstructionConfig,
) -> Result<ConductivityField> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(GptError::NonFinite(format!(
            "conductivity update produced {bad}"
        )));
    }
    match config.parametrization {
        Parametrization::Radial => {
            Ok(RadialProfile::piecewise_linear(nodes.to_vec(), values)?.into())
        }
        Parametrization::Gridded { n_theta } => {
            Ok(GriddedField::new(nodes.to_vec(), n_theta, values)?.into())
        }
    }
}

/// Iterate interpolated onto `nodes`.
fn prolongate(
    sigma: &ConductivityField,
    nodes: &[f64],
    config: &ReconstructionConfig,
) -> Result<ConductivityField> {
    from_parameters(parameters(sigma, nodes, config), nodes, config)
}

fn stepped(
    sigma: &ConductivityField,
    nodes: &[f64],
    direction: &[f64],
    step: f64,
    config: &ReconstructionConfig,
) -> Result<ConductivityField> {
    let values = parameters(sigma, nodes, config)
        .into_iter()
        .zip(direction)
        .map(|(v, d)| (v + step * d).max(config.floor))
        .collect();
    from_parameters(values, nodes, config)
}

impl ReconstructionState {
    /// Starts from the constant `σ₀` of [`initial_guess`] on the first stage's mesh.
    pub fn new(targets: ContractedGptTable, config: &ReconstructionConfig) -> Result<Self> {
        config.validate()?;
        if targets.max_order() < config.max_order {
            return Err(GptError::InvalidArgument(format!(
                "targets have order {}, configuration needs {}",
                targets.max_order(),
                config.max_order
            )));
        }
        if (targets.radius() - config.radius).abs() > 1e-12 * config.radius {
            return Err(GptError::InvalidArgument(format!(
                "targets were computed for radius {}, configuration uses {}",
                targets.radius(),
                config.radius
            )));
        }
        let targets = targets.truncated(config.max_order)?;
        let m1 = match config.parametrization {
            Parametrization::Radial => {
                check_radial_targets(&targets)?;
                targets.cc()[(0, 0)]
            }
            Parametrization::Gridded { .. } => 0.5 * (targets.cc()[(0, 0)] + targets.ss()[(0, 0)]),
        };
        let area = PI * config.radius * config.radius;
        let s0 = initial_guess(m1, area)?;
        let first = config.schedule[0];
        let nodes = uniform_nodes(config.radius, first.nodes);
        let sigma = prolongate(&s0, &nodes, config)?;
        Ok(Self {
            sigma,
            targets,
            active_order: first.order,
            nodes,
            iteration: 0,
            step: config.step_size,
            history: Vec::new(),
        })
    }

    fn evaluation(&self, config: &ReconstructionConfig) -> Result<Evaluation> {
        evaluate(
            &self.sigma,
            &self.nodes,
            self.active_order,
            &self.targets,
            config,
        )
    }
}

/// `S(σ)` over the active orders.
pub fn discrepancy_functional(
    state: &ReconstructionState,
    config: &ReconstructionConfig,
) -> Result<f64> {
    Ok(state.evaluation(config)?.functional())
}

/// One Landweber step with the state's current step size, without line search.
pub fn landweber_step(
    state: &ReconstructionState,
    config: &ReconstructionConfig,
) -> Result<ReconstructionState> {
    let eval = state.evaluation(config)?;
    let direction = eval.direction();
    let sigma = stepped(&state.sigma, &state.nodes, &direction, state.step, config)?;
    Ok(ReconstructionState {
        sigma,
        iteration: state.iteration + 1,
        ..state.clone()
    })
}

/// `ε_σ = ∫_B (σ − σ*)² / ∫_B σ*²` on `grid`.
pub fn relative_l2_error(
    sigma: &ConductivityField,
    truth: &ConductivityField,
    grid: &DiskGrid,
) -> f64 {
    let num = grid
        .sample(|r, t| (sigma.value(r, t) - truth.value(r, t)).powi(2))
        .integrate(grid);
    let den = grid
        .sample(|r, t| truth.value(r, t).powi(2))
        .integrate(grid);
    num / den
}

fn error_grid(config: &ReconstructionConfig, nodes: &[f64]) -> Result<DiskGrid> {
    let samples = match config.parametrization {
        Parametrization::Radial => 2,
        Parametrization::Gridded { n_theta } => (8 * n_theta).max(64),
    };
    Ok(
        DiskGrid::with_breakpoints(config.radius, 4 * nodes.len().max(16), nodes)?
            .with_angular_samples(samples),
    )
}

/// `(ε_M, ε_σ)` at the current iterate; `ε_M` is over the active orders and
/// `ε_σ` is reported when `truth` is given.
pub fn discrepancies(
    state: &ReconstructionState,
    config: &ReconstructionConfig,
    truth: Option<&ConductivityField>,
) -> Result<(f64, Option<f64>)> {
    let eps_m = state.evaluation(config)?.eps_m();
    let eps_sigma = match truth {
        Some(t) => Some(relative_l2_error(
            &state.sigma,
            t,
            &error_grid(config, &state.nodes)?,
        )),
        None => None,
    };
    Ok((eps_m, eps_sigma))
}

/// Runs the whole schedule from `σ₀`, with backtracking on the step size.
pub fn recursive_reconstruct(
    targets: &ContractedGptTable,
    config: &ReconstructionConfig,
    truth: Option<&ConductivityField>,
) -> Result<ReconstructionOutcome> {
    let mut state = ReconstructionState::new(targets.clone(), config)?;
    let mut stages_converged = Vec::with_capacity(config.schedule.len());
    let mut last_eps = f64::NAN;
    let mut last_eps_sigma = None;

    for (stage_idx, stage) in config.schedule.iter().enumerate() {
        let nodes = uniform_nodes(config.radius, stage.nodes);
        state.sigma = prolongate(&state.sigma, &nodes, config)?;
        state.nodes = nodes;
        state.active_order = stage.order;
        state.step = config.step_size;
        let grid = match truth {
            Some(_) => Some(error_grid(config, &state.nodes)?),
            None => None,
        };
        let eps_sigma_of = |s: &ConductivityField| {
            truth
                .zip(grid.as_ref())
                .map(|(t, g)| relative_l2_error(s, t, g))
        };

        let mut eval = state.evaluation(config)?;
        let mut s_val = eval.functional();
        let mut stage_eps = vec![eval.eps_m()];
        state.history.push(HistoryEntry {
            iteration: state.iteration,
            stage: stage.order,
            eps_m: eval.eps_m(),
            eps_sigma: eps_sigma_of(&state.sigma),
        });
        let mut converged = eval.eps_m() < stage.tol;
        let mut k = 0;
        while !converged && k < stage.max_iter {
            let w = config.stall_window;
            if w > 0 && stage_eps.len() > w {
                let before = stage_eps[stage_eps.len() - 1 - w];
                if before - stage_eps[stage_eps.len() - 1] < config.stall_tol {
                    log::info!("stage {}: stalled after {k} iterations", stage.order);
                    break;
                }
            }
            let direction = eval.direction();
            if let Some(bad) = direction.iter().find(|v| !v.is_finite()) {
                return Err(GptError::Diverged {
                    iteration: state.iteration,
                    residual: *bad,
                });
            }
            let accepted = loop {
                let trial = stepped(&state.sigma, &state.nodes, &direction, state.step, config)?;
                let trial_eval =
                    evaluate(&trial, &state.nodes, stage.order, &state.targets, config)?;
                let trial_s = trial_eval.functional();
                if !trial_s.is_finite() {
                    return Err(GptError::Diverged {
                        iteration: state.iteration,
                        residual: trial_s,
                    });
                }
                if trial_s <= s_val * (1.0 + DESCENT_SLACK) + 1e-300 {
                    break Some((trial, trial_eval, trial_s));
                }
                state.step *= 0.5;
                if state.step < MIN_STEP_FRACTION * config.step_size {
                    break None;
                }
            };
            let Some((trial, trial_eval, trial_s)) = accepted else {
                log::info!(
                    "stage {}: no descent step left after {k} iterations",
                    stage.order
                );
                break;
            };
            state.sigma = trial;
            eval = trial_eval;
            s_val = trial_s;
            state.iteration += 1;
            k += 1;
            stage_eps.push(eval.eps_m());
            state.history.push(HistoryEntry {
                iteration: state.iteration,
                stage: stage.order,
                eps_m: eval.eps_m(),
                eps_sigma: eps_sigma_of(&state.sigma),
            });
            converged = eval.eps_m() < stage.tol;
        }
        if !converged {
            log::info!(
                "stage {} ({} of {}) ended at ε_M = {:e} above its tolerance {:e}",
                stage.order,
                stage_idx + 1,
                config.schedule.len(),
                eval.eps_m(),
                stage.tol
            );
        }
        stages_converged.push(converged);
        last_eps = eval.eps_m();
        last_eps_sigma = state.history.last().and_then(|h| h.eps_sigma);
    }

    Ok(ReconstructionOutcome {
        sigma: state.sigma,
        history: state.history,
        iterations: state.iteration,
        eps_m: last_eps,
        eps_sigma: last_eps_sigma,
        stages_converged,
    })
}
