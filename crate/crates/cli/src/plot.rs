//! Minimal SVG rendering of convergence histories on a log scale.

use std::fmt::Write;

use gptlab::HistoryEntry;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

/// `ε_M` (and `ε_σ` when present) against the iteration count, with a dashed
/// marker at every stage switch.
pub fn history_svg(history: &[HistoryEntry]) -> String {
    let eps_m: Vec<(f64, f64)> = history
        .iter()
        .map(|h| (h.iteration as f64, h.eps_m))
        .collect();
    let eps_s: Vec<(f64, f64)> = history
        .iter()
        .filter_map(|h| h.eps_sigma.map(|e| (h.iteration as f64, e)))
        .collect();
    let logs = eps_m
        .iter()
        .chain(&eps_s)
        .filter(|(_, v)| *v > 0.0 && v.is_finite())
        .map(|(_, v)| v.log10());
    let (mut lo, mut hi) = logs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 0.0);
    }
    let (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
    let x_max = eps_m.last().map_or(1.0, |p| p.0).max(1.0);

    let px = |x: f64| MARGIN + x / x_max * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| {
        let l = if v > 0.0 { v.log10().max(lo) } else { lo };
        HEIGHT - MARGIN - (l - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
    );
    for d in (lo as i32)..=(hi as i32) {
        let y = py(10f64.powi(d));
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/><text x="{}" y="{}" text-anchor="end">1e{d}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">iteration (0 to {x_max})</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    for w in history.windows(2).filter(|w| w[1].stage != w[0].stage) {
        let x = px(w[1].iteration as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{x}" y1="{y0}" x2="{x}" y2="{y1}" stroke="#bbbbbb" stroke-dasharray="4 4"/>"##
        );
    }
    let mut series = |points: &[(f64, f64)], colour: &str, label: &str, row: f64| {
        if points.is_empty() {
            return;
        }
        let d: Vec<String> = points
            .iter()
            .map(|&(x, v)| format!("{:.2},{:.2}", px(x), py(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            d.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{colour}">{label}</text>"#,
            x1 - 80.0,
            y1 + 14.0 * row
        );
    };
    series(&eps_m, "#1f77b4", "eps_M", 1.0);
    series(&eps_s, "#d62728", "eps_sigma", 2.0);
    svg.push_str("</svg>\n");
    svg
}
