//! Adaptive Dormand-Prince 5(4) integrator for scalar ODEs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-9,
            atol: 1e-12,
        }
    }
}

// Butcher tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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

/// Integrate `y' = f(t, y)` from `(t_grid[0], y0)` and return `y` at every
/// grid time. Steps are clipped so each grid point is hit exactly.
pub fn integrate<F>(f: F, y0: f64, t_grid: &[f64], tol: Tolerances) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> f64,
{
    if t_grid.is_empty() {
        return Ok(Vec::new());
    }
    if t_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Integration(
            "time grid must be non-decreasing".into(),
        ));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(y0);
    let mut t = t_grid[0];
    let mut y = y0;
    let span = t_grid[t_grid.len() - 1] - t;
    let mut h = if span > 0.0 { span * 1e-6 } else { 0.0 };
    let mut k = [0.0; 7];

    for &target in &t_grid[1..] {
        while t < target {
            let h_min = 1e-14 * t.abs().max(target.abs()).max(f64::MIN_POSITIVE);
            if h < h_min {
                return Err(Error::Integration(format!(
                    "step size underflow at t = {t}"
                )));
            }
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            for s in 0..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    ys += step * A[s][j] * kj;
                }
                k[s] = f(t + C[s] * step, ys);
            }
            let y5 = y + step * B5.iter().zip(&k).map(|(b, kk)| b * kk).sum::<f64>();
            let y4 = y + step * B4.iter().zip(&k).map(|(b, kk)| b * kk).sum::<f64>();
            let scale = tol.atol + tol.rtol * y.abs().max(y5.abs());
            let err = ((y5 - y4) / scale).abs();
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y = y5;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // a clipped final step says nothing about the natural step size
            if !(last && err <= 1.0) {
                h = step * factor;
            }
            if !y.is_finite() {
                return Err(Error::Integration(format!("solution diverged at t = {t}")));
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        let y = integrate(|_, y| -2.0 * y, 3.0, &grid, Tolerances::default()).unwrap();
        for (t, v) in grid.iter().zip(&y) {
            let exact = 3.0 * (-2.0 * t).exp();
            assert!((v - exact).abs() <= 1e-8 * exact + 1e-11, "t={t}");
        }
    }

    #[test]
    fn forced_oscillation() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let y = integrate(|t, _| t.cos(), 0.0, &grid, Tolerances::default()).unwrap();
        for (t, v) in grid.iter().zip(&y) {
            assert!((v - t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_decreasing_grid() {
        assert!(integrate(|_, y| y, 1.0, &[0.0, 1.0, 0.5], Tolerances::default()).is_err());
    }
}
