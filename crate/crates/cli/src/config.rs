//! Command-line arguments and their validated form.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use gptlab::{
    FemOptions, ForwardOptions, HarmonicMode, HarmonicPolynomial, Parametrization, StageSpec,
};

use crate::error::{CliError, CliResult};
use crate::expr::Expr;
use crate::sigma::SigmaSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    /// Contracted GPTs, first-order PT and positivity bounds of a conductivity.
    Forward,
    /// Landweber reconstruction of a conductivity from a GPT file.
    Reconstruct,
    /// Fréchet derivative of one GPT entry in a perturbation direction.
    Sensitivity,
    /// Far-field perturbation at exterior points.
    Farfield,
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "gptlab",
    version,
    about = "Contracted generalized polarization tensors of disk conductivities"
)]
pub struct Args {
    #[arg(long, value_enum)]
    pub task: Task,

    /// Conductivity: a constant, an expression in r, theta, x, y, or random:lo:hi.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<String>,

    /// Conductivity samples as r,sigma or r,theta,sigma rows.
    #[arg(long, conflicts_with = "sigma")]
    pub grid_file: Option<PathBuf>,

    /// Highest harmonic order N (defaults to 6, or to the GPT file's order).
    #[arg(long)]
    pub order: Option<usize>,

    /// Disk radius R.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,

    /// GPT misfit weights: "default" or an N×N CSV file.
    #[arg(long, default_value = "default")]
    pub weights: String,

    /// Landweber step size.
    #[arg(long)]
    pub step: Option<f64>,

    /// Stages as order:nodes:max_iter:tol, comma separated.
    #[arg(long)]
    pub schedule: Option<String>,

    /// Positivity floor for reconstructed conductivities.
    #[arg(long)]
    pub floor: Option<f64>,

    /// "radial" or "gridded:NTHETA".
    #[arg(long, default_value = "radial")]
    pub parametrization: String,

    /// Output directory.
    #[arg(long, default_value = "gptlab-out")]
    pub out: PathBuf,

    /// Seed for random conductivities.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Also render the convergence history as SVG.
    #[arg(long)]
    pub plot: bool,

    /// GPT table to reconstruct from.
    #[arg(long)]
    pub gpt_file: Option<PathBuf>,

    /// Reference conductivity for ε_σ.
    #[arg(long, allow_hyphen_values = true)]
    pub truth: Option<String>,

    /// Perturbation direction for the sensitivity task.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,

    /// Receiver mode: c<n>, s<n> or <n> (cosine).
    #[arg(long, default_value = "c1")]
    pub m: String,

    /// Source mode.
    #[arg(long, default_value = "c1")]
    pub n: String,

    /// Background harmonic as mode:coefficient pairs, e.g. c1:1,s2:0.5.
    #[arg(long, default_value = "c1:1")]
    pub h: String,

    /// Far-field evaluation points as x,y rows.
    #[arg(long)]
    pub points: Option<PathBuf>,

    /// Use finite elements even for radial conductivities.
    #[arg(long)]
    pub force_fem: bool,

    /// Radial finite elements.
    #[arg(long)]
    pub fem_elements: Option<usize>,
}

/// Everything a task needs, parsed and checked.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: Task,
    pub sigma: Option<SigmaSpec>,
    pub order: Option<usize>,
    pub radius: f64,
    pub forward: ForwardOptions,
    pub out: PathBuf,
    pub seed: u64,
    pub plot: bool,
    pub weights: Option<PathBuf>,
    pub step: Option<f64>,
    pub schedule: Option<Vec<StageSpec>>,
    pub floor: Option<f64>,
    pub parametrization: Parametrization,
    pub gpt_file: Option<PathBuf>,
    pub truth: Option<Expr>,
    pub gamma: Option<Expr>,
    pub m: HarmonicMode,
    pub n: HarmonicMode,
    pub h: HarmonicPolynomial,
    pub points: Option<PathBuf>,
}

pub const DEFAULT_ORDER: usize = 6;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

impl RunConfig {
    pub fn from_args(a: &Args) -> CliResult<Self> {
        if !(a.radius > 0.0 && a.radius.is_finite()) {
            return usage(format!("--radius must be positive, got {}", a.radius));
        }
        if a.order == Some(0) {
            return usage("--order must be at least 1");
        }
        let sigma = match (&a.sigma, &a.grid_file) {
            (Some(s), _) => Some(SigmaSpec::parse(s)?),
            (None, Some(p)) => Some(SigmaSpec::File(p.clone())),
            (None, None) => None,
        };
        let needs_sigma = matches!(a.task, Task::Forward | Task::Sensitivity | Task::Farfield);
        if needs_sigma && sigma.is_none() {
            return usage("this task needs --sigma or --grid-file");
        }
        match a.task {
            Task::Reconstruct if a.gpt_file.is_none() => {
                return usage("reconstruct needs --gpt-file")
            }
            Task::Sensitivity if a.gamma.is_none() => return usage("sensitivity needs --gamma"),
            Task::Farfield if a.points.is_none() => return usage("farfield needs --points"),
            _ => {}
        }
        let mut fem = FemOptions::default();
        if let Some(e) = a.fem_elements {
            if e < 2 {
                return usage("--fem-elements must be at least 2");
            }
            fem.radial_elements = e;
        }
        if let Some(s) = a.step {
            if !(s > 0.0 && s.is_finite()) {
                return usage(format!("--step must be positive, got {s}"));
            }
        }
        Ok(Self {
            task: a.task,
            sigma,
            order: a.order,
            radius: a.radius,
            forward: ForwardOptions {
                fem,
                force_fem: a.force_fem,
            },
            out: a.out.clone(),
            seed: a.seed,
            plot: a.plot,
            weights: (a.weights != "default").then(|| PathBuf::from(&a.weights)),
            step: a.step,
            schedule: a.schedule.as_deref().map(parse_schedule).transpose()?,
            floor: a.floor,
            parametrization: parse_parametrization(&a.parametrization)?,
            gpt_file: a.gpt_file.clone(),
            truth: a.truth.as_deref().map(Expr::parse).transpose()?,
            gamma: a.gamma.as_deref().map(Expr::parse).transpose()?,
            m: parse_mode(&a.m)?,
            n: parse_mode(&a.n)?,
            h: parse_harmonic(&a.h)?,
            points: a.points.clone(),
        })
    }

    pub fn order_or_default(&self) -> usize {
        self.order.unwrap_or(DEFAULT_ORDER)
    }
}

/// `c3`, `s2` or a bare order (cosine).
pub fn parse_mode(text: &str) -> CliResult<HarmonicMode> {
    let t = text.trim();
    let (ctor, digits): (fn(usize) -> HarmonicMode, &str) = match t.as_bytes().first() {
        Some(b'c') => (HarmonicMode::cos, &t[1..]),
        Some(b's') => (HarmonicMode::sin, &t[1..]),
        _ => (HarmonicMode::cos, t),
    };
    match digits.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(ctor(n)),
        _ => usage(format!(
            "harmonic mode must look like c1, s2 or 3, got '{text}'"
        )),
    }
}

pub fn parse_harmonic(text: &str) -> CliResult<HarmonicPolynomial> {
    let mut terms = Vec::new();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let Some((mode, coeff)) = part.split_once(':') else {
            return usage(format!(
                "harmonic term must be mode:coefficient, got '{part}'"
            ));
        };
        let c: f64 = coeff
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad coefficient '{coeff}'")))?;
        terms.push((parse_mode(mode)?, c));
    }
    if terms.is_empty() {
        return usage("--h needs at least one term");
    }
    let order = terms.iter().map(|(m, _)| m.order()).max().unwrap_or(1);
    let mut h = HarmonicPolynomial::zeros(order);
    for (m, c) in terms {
        h.set(m, h.get(m) + c);
    }
    Ok(h)
}

pub fn parse_schedule(text: &str) -> CliResult<Vec<StageSpec>> {
    text.split(',')
        .map(|stage| {
            let f: Vec<&str> = stage.trim().split(':').collect();
            let bad = || {
                CliError::Usage(format!(
                    "stage must be order:nodes:max_iter:tol, got '{stage}'"
                ))
            };
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(StageSpec {
                order: f[0].parse().map_err(|_| bad())?,
                nodes: f[1].parse().map_err(|_| bad())?,
                max_iter: f[2].parse().map_err(|_| bad())?,
                tol: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn parse_parametrization(text: &str) -> CliResult<Parametrization> {
    match text.trim() {
        "radial" => Ok(Parametrization::Radial),
        other => match other.strip_prefix("gridded:").map(str::parse::<usize>) {
            Some(Ok(n_theta)) if n_theta >= 1 => Ok(Parametrization::Gridded { n_theta }),
            _ => usage(format!(
                "parametrization must be radial or gridded:NTHETA, got '{text}'"
            )),
        },
    }
}
