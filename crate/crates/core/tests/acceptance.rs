//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::time::Instant;

use gptlab::conductivity::benchmark_profile;
use gptlab::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn bench() -> ConductivityField {
    ConductivityField::radial_fn(benchmark_profile, 1.0).unwrap()
}

/// Conservative second-order finite differences for the radial mode equation
/// `(r σ f')' = n² σ f / r`, `f(0) = 0`, `σ(R) f'(R) = 1`; returns `f(R)`.
fn fd_mode_ntd(sigma: impl Fn(f64) -> f64, n: usize, radius: f64, cells: usize) -> f64 {
    let h = radius / cells as f64;
    let nn = (n * n) as f64;
    let m = cells;
    let (mut lower, mut diag, mut upper, mut rhs) =
        (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for i in 1..=m {
        let r = i as f64 * h;
        let a_minus = (r - 0.5 * h) * sigma(r - 0.5 * h) / h;
        let (a_plus, vol) = if i < m {
            ((r + 0.5 * h) * sigma(r + 0.5 * h) / h, h)
        } else {
            (0.0, 0.5 * h)
        };
        let k = i - 1;
        diag[k] = -(a_minus + a_plus) - nn * sigma(r) / r * vol;
        if k > 0 {
            lower[k] = a_minus;
        }
        upper[k] = a_plus;
    }
    rhs[m - 1] = -radius;
    for k in 1..m {
        let w = lower[k] / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    let mut f = vec![0.0; m];
    f[m - 1] = rhs[m - 1] / diag[m - 1];
    for k in (0..m - 1).rev() {
        f[k] = (rhs[k] - upper[k] * f[k + 1]) / diag[k];
    }
    f[m - 1]
}

fn homogeneous_oracle() -> Outcome {
    let start = Instant::now();
    let fem = ForwardOptions {
        force_fem: true,
        ..Default::default()
    };
    let (mut spectral, mut finite) = (0.0f64, 0.0f64);
    for &k in &[0.5, 2.0, 5.0, 10.0] {
        for &radius in &[0.5, 1.0] {
            let s = ConductivityField::constant(k).unwrap();
            let a = contracted_gpts(&s, 8, radius).map_err(|e| e.to_string())?;
            let b = contracted_gpts_with(&s, 8, radius, &fem).map_err(|e| e.to_string())?;
            for n in 1..=8 {
                let exact = gpt_homogeneous_disk(k, radius, n);
                for mode in [HarmonicMode::cos(n), HarmonicMode::sin(n)] {
                    spectral = spectral.max(rel(a.entry(mode, mode), exact));
                    finite = finite.max(rel(b.entry(mode, mode), exact));
                }
            }
        }
    }
    let t = start.elapsed().as_secs_f64();
    let msg = format!(
        "spectral rel {spectral:.2e} (≤ 1e-8), FEM rel {finite:.2e} (≤ 1e-3), {t:.2} s (< 5)"
    );
    if spectral <= 1e-8 && finite <= 1e-3 && t < 5.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn symmetry_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let opts = ForwardOptions::default();
    let (mut exact, mut assembled) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let g = GriddedField::random_smooth(&mut rng, 1.0, 0.5, 3.0, 21, 32).unwrap();
        let s = ConductivityField::from(g);
        let t = contracted_gpts_with(&s, 4, 1.0, &opts).map_err(|e| e.to_string())?;
        exact = exact.max(t.symmetry_defect() / t.norm());
        let b = gpt_table_boundary_formula(&s, 4, 1.0, &opts).map_err(|e| e.to_string())?;
        assembled = assembled.max(b.symmetry_defect() / b.norm());
    }
    let msg = format!(
        "exact pairings {exact:.2e} (≤ 1e-10), FEM-state assembly {assembled:.2e} (≤ 1e-6), relative to ‖M‖"
    );
    if exact <= 1e-10 && assembled <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Random piecewise-linear radial profile with values in `[lo, hi]`.
fn random_radial(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ConductivityField {
    let nodes: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
    let values = nodes.iter().map(|_| rng.random_range(lo..hi)).collect();
    RadialProfile::piecewise_linear(nodes, values)
        .unwrap()
        .into()
}

fn positivity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_gap = f64::INFINITY;
    let mut checked = 0;
    for _ in 0..10 {
        let s = random_radial(&mut rng, 1.0, 4.0);
        let table = contracted_gpts(&s, 4, 1.0).map_err(|e| e.to_string())?;
        let grid = default_grid(&s, 1.0, 4).unwrap();
        let mut forms: Vec<HarmonicPolynomial> = HarmonicMode::all(4)
            .into_iter()
            .map(HarmonicPolynomial::mode)
            .collect();
        for _ in 0..5 {
            let cos = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sin = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            forms.push(HarmonicPolynomial::new(cos, sin).unwrap());
        }
        for h in &forms {
            let q = quadratic_form(&table, h);
            let (lo, hi) = positivity_bounds(&s, h, &grid);
            let gap = (q - lo).min(hi - q) / hi.abs();
            worst_gap = worst_gap.min(gap);
            checked += 1;
        }
    }
    let msg = format!("{checked} quadratic forms, smallest relative margin {worst_gap:.2e} (> 0)");
    if worst_gap > 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn path_equivalence() -> Outcome {
    let s = bench();
    let opts = ForwardOptions::default();
    let table = contracted_gpts(&s, 6, 1.0).map_err(|e| e.to_string())?;
    let grid = default_grid(&s, 1.0, 6).unwrap();
    let mut worst = 0.0f64;
    for n in 1..=6 {
        let mode = HarmonicMode::cos(n);
        let h = HarmonicPolynomial::mode(mode);
        let a = table.entry(mode, mode);
        let b = gpt_boundary_formula(&s, 1.0, mode, mode, &opts).map_err(|e| e.to_string())?;
        let c = gpt_volume_identity(&s, 1.0, &h, &h, &grid, &opts).map_err(|e| e.to_string())?;
        worst = worst.max(rel(a, b)).max(rel(a, c)).max(rel(b, c));
    }
    let msg = format!("largest pairwise relative difference {worst:.2e} (≤ 1e-6)");
    if worst <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let eps = 1e-4;
    let opts = ForwardOptions::default();
    let mut worst = 0.0f64;
    let mut cases = 0;
    while cases < 20 {
        let (a, b, c) = (
            rng.random_range(-0.5..1.0),
            rng.random_range(-0.5..0.5),
            rng.random_range(0.5..3.0),
        );
        let base = move |r: f64| c + a * r * r + b * r * r * r;
        if (0..=100).any(|i| base(i as f64 / 100.0) < 0.2) {
            continue;
        }
        let (centre, width) = (rng.random_range(0.2..0.8), rng.random_range(0.08..0.25));
        let bump = move |r: f64| (-((r - centre) / width).powi(2)).exp();
        let n = rng.random_range(1..=6usize);
        let mode = if rng.random_bool(0.5) {
            HarmonicMode::cos(n)
        } else {
            HarmonicMode::sin(n)
        };

        let sigma = ConductivityField::radial_fn(base, 1.0).unwrap();
        let grid = DiskGrid::uniform(1.0, 64).unwrap();
        let gamma = grid.sample(|r, _| bump(r));
        let d = frechet_derivative(&sigma, 1.0, &gamma, mode, mode, &grid, &opts)
            .map_err(|e| e.to_string())?;
        let plus = ConductivityField::radial_fn(move |r| base(r) + eps * bump(r), 1.0).unwrap();
        let minus = ConductivityField::radial_fn(move |r| base(r) - eps * bump(r), 1.0).unwrap();
        let mp = contracted_gpts(&plus, n, 1.0).unwrap().entry(mode, mode);
        let mm = contracted_gpts(&minus, n, 1.0).unwrap().entry(mode, mode);
        let fd = (mp - mm) / (2.0 * eps);
        // |M' − FD| ≤ 1e-3 |M'| + 1e-10
        worst = worst.max((d - fd).abs() / (1e-3 * d.abs() + 1e-10));
        cases += 1;
    }
    let msg = format!("{cases} cases, largest |M' − FD| relative to its budget 1e-3·|M'| + 1e-10: {worst:.2e} (≤ 1)");
    if worst <= 1.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn far_field() -> Outcome {
    let two = ConductivityField::constant(2.0).unwrap();
    let table = contracted_gpts(&two, 4, 1.0).map_err(|e| e.to_string())?;
    let h = HarmonicPolynomial::mode(HarmonicMode::cos(1));
    let mut worst_disk = 0.0f64;
    for i in 0..10 {
        let r = 1.2 + 0.45 * i as f64;
        let t = 0.37 + 0.61 * i as f64;
        let x = [r * t.cos(), r * t.sin()];
        let v = far_field_from_table(&table, &h, x)
            .map_err(|e| e.to_string())?
            .value;
        worst_disk = worst_disk.max((v + t.cos() / (3.0 * r)).abs());
    }

    // benchmark: h = r cos θ + ½ r² sin 2θ against exterior coefficients from
    // independent finite-difference mode solves
    let s = bench();
    let mut h2 = HarmonicPolynomial::zeros(2);
    h2.set(HarmonicMode::cos(1), 1.0);
    h2.set(HarmonicMode::sin(2), 0.5);
    let table = contracted_gpts(&s, 6, 1.0).map_err(|e| e.to_string())?;
    let coeff = |n: usize| {
        let lam = fd_mode_ntd(benchmark_profile, n, 1.0, 20_000);
        let rho = 1.0 / lam;
        (n as f64 - rho) / (n as f64 + rho)
    };
    let (a1, a2) = (coeff(1), coeff(2));
    let mut worst_bench = 0.0f64;
    for &(r, t) in &[
        (3.0f64, 0.3217505543966422f64),
        (1.5, 2.0),
        (2.2, -1.0),
        (5.0, 4.0),
    ] {
        let x = [r * t.cos(), r * t.sin()];
        let v = far_field_from_table(&table, &h2, x)
            .map_err(|e| e.to_string())?
            .value;
        let oracle = a1 * t.cos() / r + 0.5 * a2 * (2.0 * t).sin() / (r * r);
        worst_bench = worst_bench.max((v - oracle).abs());
    }
    let msg = format!(
        "k = 2 disk max error {worst_disk:.2e} (≤ 1e-10), benchmark vs per-mode oracle {worst_bench:.2e} (≤ 1e-6)"
    );
    if worst_disk <= 1e-10 && worst_bench <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn reconstruction() -> Outcome {
    let start = Instant::now();
    let truth = bench();
    let targets = contracted_gpts(&truth, 6, 1.0).map_err(|e| e.to_string())?;
    let config = ReconstructionConfig::new(6, 1.0);
    let out = recursive_reconstruct(&targets, &config, Some(&truth)).map_err(|e| e.to_string())?;
    let t = start.elapsed().as_secs_f64();
    let eps_sigma = out.eps_sigma.unwrap_or(f64::INFINITY);
    let jumps = out
        .history
        .windows(2)
        .filter(|w| w[1].stage > w[0].stage && w[1].eps_m > w[0].eps_m)
        .count();
    let msg = format!(
        "ε_σ = {eps_sigma:.3e} (≤ 5e-4), ε_M = {:.3e} (≤ 1e-4), {} iterations (≤ 5000), {t:.1} s (< 60), {jumps} stage-switch jumps",
        out.eps_m, out.iterations
    );
    if eps_sigma <= 5e-4 && out.eps_m <= 1e-4 && out.iterations <= 5000 && t < 60.0 && jumps > 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn radial_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cases = vec![bench(), ConductivityField::constant(0.3).unwrap()];
    for _ in 0..3 {
        cases.push(random_radial(&mut rng, 0.5, 3.0));
    }
    let fem = ForwardOptions {
        force_fem: true,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    for s in &cases {
        for table in [
            contracted_gpts(s, 6, 1.0).map_err(|e| e.to_string())?,
            contracted_gpts_with(s, 4, 1.0, &fem).map_err(|e| e.to_string())?,
        ] {
            let (off, diag) = table.radial_structure_defect();
            worst = worst.max(off.max(diag) / table.norm());
        }
    }
    let msg =
        format!("largest structural defect {worst:.2e}·‖M‖ (≤ 1e-10), spectral and FEM paths");
    if worst <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn b_independence() -> Outcome {
    let p = RadialProfile::from_fn(benchmark_profile, 1.0).unwrap();
    let small = contracted_gpts(&p.clone().into(), 6, 1.0).map_err(|e| e.to_string())?;
    let big =
        contracted_gpts(&p.extended(1.0).unwrap().into(), 6, 1.5).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for mode in HarmonicMode::all(6) {
        worst = worst.max(rel(big.entry(mode, mode), small.entry(mode, mode)));
    }
    let off = big.radial_structure_defect().0 / big.norm();
    let msg = format!("largest relative change {worst:.2e} (≤ 1e-8), off-diagonal {off:.1e}·‖M‖");
    if worst <= 1e-8 && off <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("homogeneous-disk oracle", homogeneous_oracle),
        ("symmetry", symmetry_suite),
        ("positivity bounds", positivity),
        ("path equivalence", path_equivalence),
        ("gradient check", gradient_check),
        ("far field", far_field),
        ("reconstruction benchmark", reconstruction),
        ("radial structure", radial_structure),
        ("B-independence", b_independence),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(msg) => println!("criterion {} {name}: PASS  {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} {name}: FAIL  {msg}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
