use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use gptlab_cli::gptfile;
use tempfile::TempDir;

const BENCHMARK: &str = "(0.3*r^2+0.5*r^3+6*(r^2-0.5)^2+3.0)/3.0";

fn gptlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gptlab"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = gptlab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn forward_constant_disk_has_closed_form_diagonal() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "k2");
    run_ok(&[
        "--task", "forward", "--sigma", "2", "--order", "3", "--out", &out,
    ]);
    let t = gptfile::load(&dir.path().join("k2/gpt.csv")).unwrap();
    for n in 1..=3 {
        let want = 2.0 * PI * n as f64 / 3.0;
        assert!((t.cc()[(n - 1, n - 1)] - want).abs() <= 1e-12 * want);
        assert!((t.ss()[(n - 1, n - 1)] - want).abs() <= 1e-12 * want);
    }
    assert_eq!(t.cs().amax(), 0.0);
    assert_eq!(t.sc().amax(), 0.0);
    for path in ["pt.csv", "bounds.csv", "summary.json"] {
        assert!(dir.path().join("k2").join(path).exists(), "{path} missing");
    }

    let out = p(&dir, "k1");
    run_ok(&[
        "--task", "forward", "--sigma", "1", "--order", "2", "--out", &out,
    ]);
    let t = gptfile::load(&dir.path().join("k1/gpt.csv")).unwrap();
    assert_eq!(t.norm(), 0.0);
}

#[test]
fn forward_benchmark_is_radial() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "b");
    run_ok(&[
        "--task", "forward", "--sigma", BENCHMARK, "--order", "6", "--out", &out,
    ]);
    let t = gptfile::load(&dir.path().join("b/gpt.csv")).unwrap();
    assert_eq!(t.cs().amax(), 0.0);
    assert_eq!(t.sc().amax(), 0.0);
    let bounds = csv_rows(&dir.path().join("b/bounds.csv"));
    assert_eq!(bounds.len(), 12);
    assert!(bounds.iter().all(|row| row[4] == "1"));
}

#[test]
fn reconstruct_recovers_homogeneous_disks() {
    let dir = TempDir::new().unwrap();
    for (k, radius, order) in [("2", "1", "1"), ("0.5", "1", "3"), ("5", "0.5", "2")] {
        let fwd = p(&dir, &format!("f{k}"));
        let rec = p(&dir, &format!("r{k}"));
        run_ok(&[
            "--task", "forward", "--sigma", k, "--radius", radius, "--order", order, "--out", &fwd,
        ]);
        let gpt = format!("{fwd}/gpt.csv");
        run_ok(&[
            "--task",
            "reconstruct",
            "--gpt-file",
            &gpt,
            "--truth",
            k,
            "--out",
            &rec,
        ]);
        let want: f64 = k.parse().unwrap();
        let profile = csv_rows(&Path::new(&rec).join("profile.csv"));
        assert!(!profile.is_empty());
        for row in &profile {
            let s: f64 = row[1].parse().unwrap();
            assert!((s - want).abs() <= 1e-6 * want, "k = {k}: σ = {s}");
        }
        let history = csv_rows(&Path::new(&rec).join("history.csv"));
        assert_eq!(history[0][0], "0");
        let eps_m: f64 = history[0][2].parse().unwrap();
        assert!(eps_m < 1e-12, "k = {k}: ε_M = {eps_m}");
    }
}

#[test]
fn reconstruct_writes_plot_and_stage_history() {
    let dir = TempDir::new().unwrap();
    let fwd = p(&dir, "f");
    let rec = p(&dir, "r");
    run_ok(&[
        "--task", "forward", "--sigma", "1 + r^2", "--order", "3", "--out", &fwd,
    ]);
    let gpt = format!("{fwd}/gpt.csv");
    run_ok(&[
        "--task",
        "reconstruct",
        "--gpt-file",
        &gpt,
        "--truth",
        "1 + r^2",
        "--schedule",
        "1:9:50:1e-12,2:17:50:1e-12,3:25:50:1e-12",
        "--step",
        "0.1",
        "--plot",
        "--out",
        &rec,
    ]);
    let history = csv_rows(&Path::new(&rec).join("history.csv"));
    let stages: Vec<&str> = history.iter().map(|r| r[1].as_str()).collect();
    for s in ["1", "2", "3"] {
        assert!(stages.contains(&s), "stage {s} missing");
    }
    assert!(history.iter().all(|r| !r[3].is_empty()));
    let svg = std::fs::read_to_string(Path::new(&rec).join("history.svg")).unwrap();
    assert!(svg.contains("<polyline"));
}

#[test]
fn identical_seed_gives_identical_outputs() {
    let dir = TempDir::new().unwrap();
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = p(&dir, run);
        run_ok(&[
            "--task",
            "forward",
            "--sigma",
            "random:0.5:3",
            "--seed",
            "11",
            "--order",
            "2",
            "--out",
            &out,
        ]);
        let gpt = format!("{out}/gpt.csv");
        let rec = format!("{out}/rec");
        run_ok(&[
            "--task",
            "reconstruct",
            "--gpt-file",
            &gpt,
            "--parametrization",
            "gridded:4",
            "--schedule",
            "1:5:5:1e-12,2:5:5:1e-12",
            "--out",
            &rec,
        ]);
        files.push(
            [
                "gpt.csv",
                "bounds.csv",
                "rec/history.csv",
                "rec/profile.csv",
            ]
            .map(|f| std::fs::read(Path::new(&out).join(f)).unwrap()),
        );
    }
    assert_eq!(files[0], files[1]);

    let other = p(&dir, "c");
    run_ok(&[
        "--task",
        "forward",
        "--sigma",
        "random:0.5:3",
        "--seed",
        "12",
        "--order",
        "2",
        "--out",
        &other,
    ]);
    let c = std::fs::read(Path::new(&other).join("gpt.csv")).unwrap();
    assert_ne!(c, files[0][0]);
}

#[test]
fn sensitivity_examples() {
    let dir = TempDir::new().unwrap();
    let value = |gamma: &str, m: &str, n: &str| -> f64 {
        let out = p(&dir, "s");
        run_ok(&[
            "--task",
            "sensitivity",
            "--sigma",
            "1",
            "--gamma",
            gamma,
            "--m",
            m,
            "--n",
            n,
            "--out",
            &out,
        ])
        .trim()
        .parse()
        .unwrap()
    };
    assert!((value("step(0.5-r)", "1", "1") - PI / 4.0).abs() < 1e-12);
    assert_eq!(value("0", "c1", "c1"), 0.0);
    assert!(value("1 + r^2", "c1", "c2").abs() < 1e-10);
    assert!(value("exp(-r)", "c2", "s2").abs() < 1e-10);
    let kernel = csv_rows(&dir.path().join("s/kernel.csv"));
    assert!(!kernel.is_empty());
    assert_eq!(kernel[0].len(), 5);
}

#[test]
fn farfield_values_and_interior_flags() {
    let dir = TempDir::new().unwrap();
    let pts = dir.path().join("pts.csv");
    std::fs::write(&pts, "x,y\n2,0\n0.5,0\n-3,4\n").unwrap();
    let pts = pts.to_string_lossy().into_owned();
    let out = p(&dir, "ff2");
    run_ok(&[
        "--task", "farfield", "--sigma", "2", "--h", "c1:1", "--points", &pts, "--out", &out,
    ]);
    let rows = csv_rows(&Path::new(&out).join("farfield.csv"));
    let v0: f64 = rows[0][2].parse().unwrap();
    assert!((v0 + 1.0 / 6.0).abs() < 1e-14);
    assert_eq!(rows[1][4], "1");
    let v2: f64 = rows[2][2].parse().unwrap();
    assert!((v2 - (-(1.0 / 3.0) * (-3.0 / 5.0) / 5.0)).abs() < 1e-14);

    let out = p(&dir, "ff1");
    run_ok(&[
        "--task", "farfield", "--sigma", "1", "--points", &pts, "--out", &out,
    ]);
    let rows = csv_rows(&Path::new(&out).join("farfield.csv"));
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[2][2].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "x");
    let code = |args: &[&str]| gptlab(args).status.code().unwrap();

    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--task", "nope"]), 1);
    assert_eq!(code(&["--task", "forward", "--out", &out]), 1);
    assert_eq!(
        code(&["--task", "forward", "--sigma", "1+*r", "--out", &out]),
        1
    );
    assert_eq!(
        code(&["--task", "forward", "--sigma", "2", "--order", "0", "--out", &out]),
        1
    );
    assert_eq!(code(&["--task", "reconstruct", "--out", &out]), 1);
    assert_eq!(
        code(&["--task", "forward", "--sigma", "r - 0.5", "--out", &out]),
        3
    );
    assert_eq!(
        code(&["--task", "forward", "--sigma", "random:3:1", "--out", &out]),
        1
    );

    let fwd = p(&dir, "f");
    run_ok(&[
        "--task", "forward", "--sigma", "2", "--order", "2", "--out", &fwd,
    ]);
    let good = std::fs::read_to_string(Path::new(&fwd).join("gpt.csv")).unwrap();

    let corrupt = dir.path().join("corrupt.csv");
    std::fs::write(&corrupt, good.replacen("cc,2,", "cc,2,garbage,", 1)).unwrap();
    let corrupt = corrupt.to_string_lossy().into_owned();
    let o = gptlab(&[
        "--task",
        "reconstruct",
        "--gpt-file",
        &corrupt,
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    // M₁ so large and negative that σ₀ would be non-positive
    let inadmissible = dir.path().join("neg.csv");
    let text: String = good
        .lines()
        .map(|l| {
            if l.starts_with("cc,1,") || l.starts_with("ss,1,") {
                let mut f: Vec<&str> = l.split(',').collect();
                f[2] = "-1.0e1";
                f.join(",")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&inadmissible, text).unwrap();
    let inadmissible = inadmissible.to_string_lossy().into_owned();
    assert_eq!(
        code(&[
            "--task",
            "reconstruct",
            "--gpt-file",
            &inadmissible,
            "--out",
            &out
        ]),
        3
    );

    let missing = p(&dir, "does-not-exist.csv");
    assert_eq!(
        code(&[
            "--task",
            "reconstruct",
            "--gpt-file",
            &missing,
            "--out",
            &out
        ]),
        1
    );
}

#[test]
fn thread_cap_is_validated() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "t");
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_gptlab"))
            .args([
                "--task", "forward", "--sigma", "2", "--order", "2", "--out", &out,
            ])
            .env("GPTLAB_THREADS", threads)
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(run("1"), Some(0));
    assert_eq!(run("zero"), Some(1));
}

#[test]
fn grid_files_define_conductivities() {
    let dir = TempDir::new().unwrap();
    let radial = dir.path().join("radial.csv");
    std::fs::write(&radial, "r,sigma\n0,3\n1,3\n").unwrap();
    let out = p(&dir, "g");
    run_ok(&[
        "--task",
        "forward",
        "--grid-file",
        &radial.to_string_lossy(),
        "--order",
        "2",
        "--out",
        &out,
    ]);
    let t = gptfile::load(&Path::new(&out).join("gpt.csv")).unwrap();
    let want = 2.0 * PI * (3.0 - 1.0) / (3.0 + 1.0);
    assert!((t.cc()[(0, 0)] - want).abs() < 1e-10 * want);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "r,theta,sigma\n0,0,1\n0,3,1\n1,0,1\n").unwrap();
    let code = gptlab(&[
        "--task",
        "forward",
        "--grid-file",
        &bad.to_string_lossy(),
        "--out",
        &out,
    ])
    .status
    .code();
    assert_eq!(code, Some(1));
}
