//! Task drivers. Each writes its artifacts into the output directory and
//! returns a JSON summary that is also saved as `summary.json`.

use std::fs;
use std::path::{Path, PathBuf};

use gptlab::{
    contracted_gpts_with, default_grid, far_field_from_table, first_order_pt, positivity_bounds,
    quadratic_form, recursive_reconstruct, ConductivityField, HarmonicMode, HarmonicPolynomial,
    Parametrization, ReconstructionConfig, StateCache,
};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::config::{RunConfig, Task};
use crate::error::{CliError, CliResult};
use crate::gptfile::{self, fmt_float};
use crate::plot::history_svg;
use crate::sigma::{field_from_expr, read_numeric_rows};

/// Samples of the reconstructed profile along the radius.
const PROFILE_SAMPLES: usize = 201;
/// Polar samples of a reconstructed gridded field.
const PROFILE_RADII: usize = 65;
const PROFILE_ANGLES: usize = 64;

pub fn run(cfg: &RunConfig) -> CliResult<Value> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let summary = match cfg.task {
        Task::Forward => cmd_forward(cfg)?,
        Task::Reconstruct => cmd_reconstruct(cfg)?,
        Task::Sensitivity => cmd_sensitivity(cfg)?,
        Task::Farfield => cmd_farfield(cfg)?,
    };
    let path = cfg.out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary is valid JSON");
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(summary)
}

fn sigma(cfg: &RunConfig) -> CliResult<ConductivityField> {
    cfg.sigma
        .as_ref()
        .ok_or_else(|| CliError::Usage("no conductivity given".into()))?
        .build(cfg.radius, cfg.seed)
}

fn writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn mode_label(m: HarmonicMode) -> String {
    format!("{}{}", m.parity().label(), m.order())
}

/// Writes `gpt.csv`, `pt.csv` and `bounds.csv`.
pub fn cmd_forward(cfg: &RunConfig) -> CliResult<Value> {
    let sigma = sigma(cfg)?;
    let n = cfg.order_or_default();
    let table = contracted_gpts_with(&sigma, n, cfg.radius, &cfg.forward)?;
    gptfile::save(&table, &cfg.out.join("gpt.csv"))?;

    let pt = first_order_pt(&table);
    let (e_lo, e_hi) = pt.eigenvalues();
    let pt_path = cfg.out.join("pt.csv");
    let mut w = writer(&pt_path)?;
    w.write_record(["m11", "m12", "m21", "m22", "eig_min", "eig_max"])?;
    let m = pt.matrix;
    w.write_record([m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)], e_lo, e_hi].map(fmt_float))?;
    finish(w, &pt_path)?;

    let grid = default_grid(&sigma, cfg.radius, n)?;
    let bounds_path = cfg.out.join("bounds.csv");
    let mut w = writer(&bounds_path)?;
    w.write_record(["mode", "form", "lower", "upper", "within"])?;
    let mut violations = 0;
    for mode in HarmonicMode::all(n) {
        let h = HarmonicPolynomial::mode(mode);
        let q = quadratic_form(&table, &h);
        let (lo, hi) = positivity_bounds(&sigma, &h, &grid);
        let slack = 1e-9 * q.abs().max(hi.abs()).max(lo.abs());
        let within = lo - slack <= q && q <= hi + slack;
        violations += usize::from(!within);
        w.write_record([
            mode_label(mode),
            fmt_float(q),
            fmt_float(lo),
            fmt_float(hi),
            u8::from(within).to_string(),
        ])?;
    }
    finish(w, &bounds_path)?;

    let (off, diag) = table.radial_structure_defect();
    let diag_entries: Vec<f64> = (0..n).map(|i| table.cc()[(i, i)]).collect();
    println!(
        "forward: N = {n}, R = {}, radial = {}",
        cfg.radius,
        sigma.is_radial()
    );
    println!("  M^cc diagonal: {diag_entries:?}");
    println!("  PT eigenvalues: {e_lo:.6e}, {e_hi:.6e}");
    println!(
        "  positivity bounds violated by {violations} of {} forms",
        2 * n
    );
    Ok(json!({
        "task": "forward",
        "order": n,
        "radius": cfg.radius,
        "radial": sigma.is_radial(),
        "norm": table.norm(),
        "symmetry_defect": table.symmetry_defect(),
        "radial_off_block": off,
        "radial_diag_mismatch": diag,
        "cc_diagonal": diag_entries,
        "pt": [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
        "pt_eigenvalues": [e_lo, e_hi],
        "bound_violations": violations,
    }))
}

fn read_weights(path: &Path, n: usize) -> CliResult<DMatrix<f64>> {
    let rows = read_numeric_rows(path)?;
    if rows.len() < n || rows.iter().take(n).any(|r| r.len() < n) {
        return Err(CliError::Usage(format!(
            "{}: weights must be at least {n} × {n}",
            path.display()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Writes `profile.csv`, `history.csv` and, with `--plot`, `history.svg`.
pub fn cmd_reconstruct(cfg: &RunConfig) -> CliResult<Value> {
    let gpt_path = cfg.gpt_file.as_ref().expect("validated");
    let table = gptfile::load(gpt_path)?;
    let radius = table.radius();
    if (radius - cfg.radius).abs() > 1e-12 * radius && cfg.radius != 1.0 {
        log::warn!(
            "using the GPT file radius {radius} instead of --radius {}",
            cfg.radius
        );
    }
    let n = cfg.order.unwrap_or(table.max_order());
    if n > table.max_order() {
        return Err(CliError::Usage(format!(
            "--order {n} exceeds the GPT file order {}",
            table.max_order()
        )));
    }
    let mut config = ReconstructionConfig::new(n, radius);
    config.parametrization = cfg.parametrization;
    config.forward = cfg.forward.clone();
    if let Some(path) = &cfg.weights {
        config.weights = read_weights(path, n)?;
    }
    if let Some(s) = cfg.step {
        config.step_size = s;
    }
    if let Some(s) = &cfg.schedule {
        config.schedule = s.clone();
    }
    if let Some(f) = cfg.floor {
        config.floor = f;
    }
    let truth = cfg
        .truth
        .as_ref()
        .map(|e| field_from_expr(e, radius))
        .transpose()?;

    let outcome = recursive_reconstruct(&table, &config, truth.as_ref())?;

    let profile_path = cfg.out.join("profile.csv");
    let mut w = writer(&profile_path)?;
    let mut header = match cfg.parametrization {
        Parametrization::Radial => vec!["r", "sigma"],
        Parametrization::Gridded { .. } => vec!["r", "theta", "sigma"],
    };
    if truth.is_some() {
        header.push("truth");
    }
    w.write_record(&header)?;
    let points: Vec<(f64, f64)> = match cfg.parametrization {
        Parametrization::Radial => (0..PROFILE_SAMPLES)
            .map(|i| (radius * i as f64 / (PROFILE_SAMPLES - 1) as f64, 0.0))
            .collect(),
        Parametrization::Gridded { .. } => (0..PROFILE_RADII)
            .flat_map(|i| {
                let r = radius * i as f64 / (PROFILE_RADII - 1) as f64;
                (0..PROFILE_ANGLES).map(move |j| {
                    (
                        r,
                        2.0 * std::f64::consts::PI * j as f64 / PROFILE_ANGLES as f64,
                    )
                })
            })
            .collect(),
    };
    for (r, t) in points {
        let mut row = vec![fmt_float(r)];
        if !matches!(cfg.parametrization, Parametrization::Radial) {
            row.push(fmt_float(t));
        }
        row.push(fmt_float(outcome.sigma.value(r, t)));
        if let Some(tr) = &truth {
            row.push(fmt_float(tr.value(r, t)));
        }
        w.write_record(&row)?;
    }
    finish(w, &profile_path)?;

    let history_path = cfg.out.join("history.csv");
    let mut w = writer(&history_path)?;
    w.write_record(["iteration", "stage", "eps_m", "eps_sigma"])?;
    for h in &outcome.history {
        w.write_record([
            h.iteration.to_string(),
            h.stage.to_string(),
            fmt_float(h.eps_m),
            h.eps_sigma.map(fmt_float).unwrap_or_default(),
        ])?;
    }
    finish(w, &history_path)?;

    if cfg.plot {
        let svg_path = cfg.out.join("history.svg");
        fs::write(&svg_path, history_svg(&outcome.history))
            .map_err(|e| CliError::io(&svg_path, e))?;
    }

    println!(
        "reconstruct: {} iterations, eps_M = {:.4e}{}",
        outcome.iterations,
        outcome.eps_m,
        outcome
            .eps_sigma
            .map(|e| format!(", eps_sigma = {e:.4e}"))
            .unwrap_or_default()
    );
    Ok(json!({
        "task": "reconstruct",
        "order": n,
        "radius": radius,
        "iterations": outcome.iterations,
        "eps_m": outcome.eps_m,
        "eps_sigma": outcome.eps_sigma,
        "stages_converged": outcome.stages_converged,
    }))
}

/// Prints `M'_{mn}(σ)[γ]` and writes the kernel `∇u_m·∇u_n` to `kernel.csv`.
pub fn cmd_sensitivity(cfg: &RunConfig) -> CliResult<Value> {
    let sigma = sigma(cfg)?;
    let gamma = cfg.gamma.as_ref().expect("validated");
    let order = cfg.m.order().max(cfg.n.order());
    let grid = default_grid(&sigma, cfg.radius, order)?;
    let cache = StateCache::on_grid(&sigma, cfg.radius, order, &grid, &cfg.forward)?;
    let g = grid.sample(|r, t| gamma.eval(r, t));
    let value = cache.derivative(&g, cfg.m, cfg.n)?;
    let kernel = cache.kernel_values(cfg.m, cfg.n);

    let path = cfg.out.join("kernel.csv");
    let mut w = writer(&path)?;
    w.write_record(["r", "theta", "weight", "gamma", "kernel"])?;
    for (idx, k) in kernel.iter().enumerate() {
        let (r, t) = grid.point(idx);
        w.write_record([r, t, grid.weight(idx), g.values()[idx], *k].map(fmt_float))?;
    }
    finish(w, &path)?;

    println!("{}", fmt_float(value));
    Ok(json!({
        "task": "sensitivity",
        "m": mode_label(cfg.m),
        "n": mode_label(cfg.n),
        "value": value,
    }))
}

/// Writes `farfield.csv` with `(u − h)(x)`, its tail estimate, and a flag
/// for points inside the disk.
pub fn cmd_farfield(cfg: &RunConfig) -> CliResult<Value> {
    let sigma = sigma(cfg)?;
    let n = cfg.order_or_default().max(cfg.h.max_order());
    let table = contracted_gpts_with(&sigma, n, cfg.radius, &cfg.forward)?;
    let points_path: &PathBuf = cfg.points.as_ref().expect("validated");
    let rows = read_numeric_rows(points_path)?;
    if rows.iter().any(|r| r.len() != 2) {
        return Err(CliError::Usage(format!(
            "{}: points must be x,y rows",
            points_path.display()
        )));
    }
    let path = cfg.out.join("farfield.csv");
    let mut w = writer(&path)?;
    w.write_record(["x", "y", "value", "tail", "interior"])?;
    let mut interior = 0;
    for p in &rows {
        let (x, y) = (p[0], p[1]);
        match far_field_from_table(&table, &cfg.h, [x, y]) {
            Ok(v) => w.write_record([
                fmt_float(x),
                fmt_float(y),
                fmt_float(v.value),
                fmt_float(v.tail),
                "0".into(),
            ])?,
            Err(_) => {
                interior += 1;
                w.write_record([
                    fmt_float(x),
                    fmt_float(y),
                    "NaN".into(),
                    "NaN".into(),
                    "1".into(),
                ])?
            }
        }
    }
    finish(w, &path)?;
    println!("farfield: {} points, {interior} not exterior", rows.len());
    Ok(json!({
        "task": "farfield",
        "order": n,
        "points": rows.len(),
        "interior": interior,
    }))
}
