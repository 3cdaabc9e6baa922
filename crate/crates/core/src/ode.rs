//! Dormand–Prince 5(4) with step-size control, reporting the state at a list
//! of stop points. Steps never straddle a stop, so coefficient kinks placed
//! at stops are integrated at full order.

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    pub t: f64,
    pub error: f64,
}

const MAX_STEPS: usize = 1_000_000;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` through every entry of `stops`
/// (increasing, all `> t0`) and returns the state at each stop.
pub fn integrate<const D: usize>(
    f: impl Fn(f64, &[f64; D]) -> [f64; D],
    t0: f64,
    y0: [f64; D],
    stops: &[f64],
    tol: Tolerance,
) -> Result<Vec<[f64; D]>, StepFailure> {
    let mut out = Vec::with_capacity(stops.len());
    let mut t = t0;
    let mut y = y0;
    let span = stops.last().map_or(0.0, |&e| e - t0);
    let mut h = (span * 1e-3).max(1e-8);
    let mut steps = 0usize;
    for &stop in stops {
        while t < stop {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(StepFailure { t, error: f64::NAN });
            }
            let hit = h >= stop - t;
            let step = if hit { stop - t } else { h };
            let (y_new, err) = dp_step(&f, t, &y, step, tol);
            if !err.is_finite() {
                h = step * 0.1;
                if h < 1e-14 * span.max(1.0) {
                    return Err(StepFailure { t, error: err });
                }
                continue;
            }
            if err <= 1.0 {
                t = if hit { stop } else { t + step };
                y = y_new;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            let next = step * factor;
            if err > 1.0 && next < 1e-14 * span.max(1.0) {
                return Err(StepFailure { t, error: err });
            }
            // keep the controller's preference after a truncated final step
            h = if hit && err <= 1.0 { h.max(next) } else { next };
        }
        out.push(y);
    }
    Ok(out)
}

fn dp_step<const D: usize>(
    f: &impl Fn(f64, &[f64; D]) -> [f64; D],
    t: f64,
    y: &[f64; D],
    h: f64,
    tol: Tolerance,
) -> ([f64; D], f64) {
    let mut k = [[0.0; D]; 7];
    k[0] = f(t, y);
    for s in 1..7 {
        let mut ys = *y;
        for (d, v) in ys.iter_mut().enumerate() {
            *v += h * (0..s).map(|j| A[s][j] * k[j][d]).sum::<f64>();
        }
        k[s] = f(t + C[s] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = 0.0f64;
    for d in 0..D {
        let inc5: f64 = (0..7).map(|s| B5[s] * k[s][d]).sum();
        let inc4: f64 = (0..7).map(|s| B4[s] * k[s][d]).sum();
        y5[d] += h * inc5;
        let scale = tol.atol + tol.rtol * y[d].abs().max(y5[d].abs());
        err = err.max((h * (inc5 - inc4)).abs() / scale);
    }
    (y5, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let tol = Tolerance {
            rtol: 1e-12,
            atol: 1e-14,
        };
        let stops = [0.5, 1.0, 2.0];
        let ys = integrate(|_, y: &[f64; 1]| [-3.0 * y[0]], 0.0, [1.0], &stops, tol).unwrap();
        for (y, t) in ys.iter().zip(stops) {
            assert!((y[0] - (-3.0 * t).exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn harmonic_oscillator() {
        let tol = Tolerance {
            rtol: 1e-11,
            atol: 1e-13,
        };
        let ys = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            &[std::f64::consts::PI],
            tol,
        )
        .unwrap();
        assert!(ys[0][0].abs() < 1e-9);
        assert!((ys[0][1] + 1.0).abs() < 1e-9);
    }
}
