//! Conductivity specifications: expressions, constants, random fields and
//! grid files.

use std::f64::consts::PI;
use std::path::Path;

use gptlab::{ConductivityField, GriddedField, RadialProfile};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};
use crate::expr::Expr;

/// Radial nodes, endpoints included, of the polar grid used to sample
/// angle-dependent expressions and random fields.
pub const GRID_RADII: usize = 33;
pub const GRID_ANGLES: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSpec {
    Expression(Expr),
    /// `random:lo:hi`, a smooth non-radial field drawn from the run seed.
    Random {
        lo: f64,
        hi: f64,
    },
    File(std::path::PathBuf),
}

impl SigmaSpec {
    pub fn parse(text: &str) -> CliResult<Self> {
        if let Some(rest) = text.strip_prefix("random:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let bounds: Option<Vec<f64>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
            return match bounds.as_deref() {
                Some(&[lo, hi]) if lo > 0.0 && hi > lo => Ok(Self::Random { lo, hi }),
                _ => Err(CliError::Usage(format!(
                    "random conductivity must be random:lo:hi with 0 < lo < hi, got '{text}'"
                ))),
            };
        }
        Ok(Self::Expression(Expr::parse(text)?))
    }

    pub fn build(&self, radius: f64, seed: u64) -> CliResult<ConductivityField> {
        match self {
            Self::Expression(e) => field_from_expr(e, radius),
            Self::Random { lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(GriddedField::random_smooth(
                    &mut rng,
                    radius,
                    *lo,
                    *hi,
                    GRID_RADII,
                    GRID_ANGLES,
                )?
                .into())
            }
            Self::File(path) => read_grid_file(path),
        }
    }
}

pub fn field_from_expr(e: &Expr, radius: f64) -> CliResult<ConductivityField> {
    if let Some(k) = e.as_constant() {
        return Ok(ConductivityField::constant(k)?);
    }
    if e.is_radial() {
        let e = e.clone();
        return Ok(RadialProfile::from_fn(move |r| e.eval(r, 0.0), radius)?.into());
    }
    let radii = uniform(radius, GRID_RADII);
    // every angle at the centre sees the same value
    let field = GriddedField::from_fn(radii, GRID_ANGLES, |r, t| {
        e.eval(r, if r == 0.0 { 0.0 } else { t })
    })?;
    Ok(field.into())
}

fn uniform(radius: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| radius * i as f64 / (points - 1) as f64)
        .collect()
}

/// Reads `r,sigma` (radial, piecewise linear) or `r,theta,sigma` (polar grid,
/// equispaced angles starting at 0, radius-major) rows. A non-numeric first
/// row is taken as a header.
pub fn read_grid_file(path: &Path) -> CliResult<ConductivityField> {
    let rows = read_numeric_rows(path)?;
    let bad = |m: String| CliError::Usage(format!("{}: {m}", path.display()));
    let width = rows
        .first()
        .map(Vec::len)
        .ok_or_else(|| bad("no data rows".into()))?;
    if rows.iter().any(|r| r.len() != width) {
        return Err(bad("rows have differing column counts".into()));
    }
    match width {
        2 => {
            let (nodes, values) = rows.iter().map(|r| (r[0], r[1])).unzip();
            Ok(RadialProfile::piecewise_linear(nodes, values)?.into())
        }
        3 => {
            let mut radii: Vec<f64> = Vec::new();
            for row in &rows {
                if radii.last() != Some(&row[0]) {
                    radii.push(row[0]);
                }
            }
            if rows.len() % radii.len() != 0 {
                return Err(bad("every radius needs the same number of angles".into()));
            }
            let n_theta = rows.len() / radii.len();
            for (idx, row) in rows.iter().enumerate() {
                let (i, j) = (idx / n_theta, idx % n_theta);
                let want = 2.0 * PI * j as f64 / n_theta as f64;
                if row[0] != radii[i] || (row[1] - want).abs() > 1e-9 {
                    return Err(bad(format!(
                        "row {}: expected r = {}, theta = {want}",
                        idx + 1,
                        radii[i]
                    )));
                }
            }
            let values = rows.iter().map(|r| r[2]).collect();
            Ok(GriddedField::new(radii, n_theta, values)?.into())
        }
        w => Err(bad(format!("expected 2 or 3 columns, found {w}"))),
    }
}

/// All rows of a headerless-or-headed numeric CSV.
pub fn read_numeric_rows(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if idx == 0 => {}
            Err(_) => {
                return Err(CliError::Usage(format!(
                    "{}: row {} is not numeric",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    Ok(rows)
}
