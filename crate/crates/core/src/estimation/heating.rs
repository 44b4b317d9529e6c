use super::lm::{levenberg_marquardt, LmOptions, LmOutcome, Problem};
use super::report::{Convergence, FitReport, ParamUnit, StageRecord};
use crate::dynamics::slow_term;
use crate::error::{Error, Result};
use crate::model::ordinary;

/// Free parameters of the heating curve
/// `n(t) = n0 e^{−γt} + n_H(1 − e^{−γt}) + n_δ(e^{−γs t} − e^{−γt})`;
/// rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatingCurve {
    pub n_initial: f64,
    pub n_hot: f64,
    pub gamma: f64,
    /// `c = n_δ (γs − γ)`, finite through the `γs = γ` limit.
    pub slow_amplitude: f64,
    pub gamma_s: f64,
}

impl HeatingCurve {
    pub fn eval(&self, t: f64) -> f64 {
        let decay = (-self.gamma * t).exp();
        self.n_initial * decay
            + self.n_hot * (1.0 - decay)
            + slow_term(self.slow_amplitude, self.gamma, self.gamma_s, t)
    }

    pub fn n_delta(&self) -> f64 {
        self.slow_amplitude / (self.gamma_s - self.gamma)
    }
}

impl HeatingCurve {
    /// The same curve with the two rates exchanged.
    fn swapped(&self) -> HeatingCurve {
        HeatingCurve {
            gamma: self.gamma_s,
            gamma_s: self.gamma,
            slow_amplitude: self.slow_amplitude
                + (self.n_initial - self.n_hot) * (self.gamma - self.gamma_s),
            ..*self
        }
    }
}

fn curve_of(out: &LmOutcome) -> HeatingCurve {
    HeatingCurve {
        n_initial: out.params[0],
        n_hot: out.params[1],
        gamma: out.params[2],
        slow_amplitude: out.params[3],
        gamma_s: out.params[4],
    }
}

/// Whether branch `a` should be reported instead of `b`.
fn prefer(a: &HeatingCurve, b: &HeatingCurve, total_damping: Option<f64>) -> bool {
    match (a.slow_amplitude >= 0.0, b.slow_amplitude >= 0.0) {
        (true, false) => return true,
        (false, true) => return false,
        _ => {}
    }
    match total_damping {
        Some(g) => (a.gamma / g).ln().abs() < (b.gamma / g).ln().abs(),
        None => a.gamma > b.gamma,
    }
}

fn fit_from(times: &[f64], occupancy: &[f64], start: HeatingCurve) -> Result<LmOutcome> {
    let scale = [
        start.n_initial.abs().max(1e-3),
        start.n_hot.abs().max(1e-3),
        start.gamma,
        start.slow_amplitude.abs().max(start.gamma * 1e-3),
        start.gamma_s,
    ];
    let problem = Problem::new(|p: &[f64]| {
        let curve = HeatingCurve {
            n_initial: p[0] * scale[0],
            n_hot: p[1] * scale[1],
            gamma: p[2] * scale[2],
            slow_amplitude: p[3] * scale[3],
            gamma_s: p[4] * scale[4],
        };
        if curve.gamma <= 0.0 || curve.gamma_s <= 0.0 {
            return Err(Error::Fit("rates must stay positive".into()));
        }
        Ok(times
            .iter()
            .zip(occupancy)
            .map(|(&t, &n)| curve.eval(t) - n)
            .collect())
    });
    let x0 = [
        start.n_initial / scale[0],
        start.n_hot / scale[1],
        1.0,
        start.slow_amplitude / scale[3],
        1.0,
    ];
    let mut out = levenberg_marquardt(&problem, &x0, LmOptions::default())?;
    for (p, s) in out.params.iter_mut().zip(scale) {
        *p *= s;
    }
    if let Some(c) = out.covariance.as_mut() {
        for i in 0..5 {
            for j in 0..5 {
                c[(i, j)] *= scale[i] * scale[j];
            }
        }
    }
    Ok(out)
}

/// Fit the pump-heating curve to an occupancy time series starting at the
/// pump turn-on (`t = 0`).
pub fn fit_heating(times: &[f64], occupancy: &[f64]) -> Result<FitReport> {
    fit_heating_with(times, occupancy, None)
}

/// The curve is unchanged when the two rates trade places with
/// `n_δ → n0 − n_H − n_δ`. The reported branch is the one with a
/// non-negative slow amplitude (`δb ≥ 0`); if both qualify, the one whose
/// `γ` is closest to `total_damping` (rad/s) when given, else the one with
/// `γ > γs`.
pub fn fit_heating_with(
    times: &[f64],
    occupancy: &[f64],
    total_damping: Option<f64>,
) -> Result<FitReport> {
    if times.len() != occupancy.len() || times.len() < 8 {
        return Err(Error::InvalidTrace(
            "heating fit needs matching time and occupancy arrays of at least 8 samples".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times[0] < 0.0 {
        return Err(Error::InvalidTrace(
            "times must be non-negative and increasing".into(),
        ));
    }
    let n = times.len();
    let tail = (n / 10).max(1);
    let n0 = occupancy[..tail.min(3)].iter().sum::<f64>() / tail.min(3) as f64;
    let n_end = occupancy[n - tail..].iter().sum::<f64>() / tail as f64;
    // time to cover 1 − 1/e of the rise sets the fast rate
    let target = n0 + (n_end - n0) * (1.0 - (-1.0f64).exp());
    let rising = n_end >= n0;
    let t63 = times
        .iter()
        .zip(occupancy)
        .find(|(_, &v)| if rising { v >= target } else { v <= target })
        .map(|(&t, _)| t)
        .unwrap_or(times[n - 1] / 3.0)
        .max(times[1] - times[0]);
    let gamma0 = 1.0 / t63;

    let mut best: Option<LmOutcome> = None;
    for ratio in [0.1, 0.3, 3.0] {
        for frac in [0.3, -0.3] {
            let start = HeatingCurve {
                n_initial: n0,
                n_hot: n_end,
                gamma: gamma0,
                slow_amplitude: frac * n_end * gamma0,
                gamma_s: ratio * gamma0,
            };
            if let Ok(out) = fit_from(times, occupancy, start) {
                if best
                    .as_ref()
                    .is_none_or(|b| out.residual_norm < b.residual_norm)
                {
                    best = Some(out);
                }
            }
        }
    }
    let mut out = best.ok_or_else(|| Error::Fit("no heating fit converged".into()))?;
    let found = curve_of(&out);
    let swapped = found.swapped();
    if prefer(&swapped, &found, total_damping) {
        if let Ok(alt) = fit_from(times, occupancy, swapped) {
            if alt.params[2] > 0.0 && alt.params[4] > 0.0 {
                out = alt;
            }
        }
    }
    let curve = curve_of(&out);
    let mut report = FitReport::new("heating");
    report.set(
        "n_initial",
        curve.n_initial,
        out.stderr(0),
        ParamUnit::Dimensionless,
    );
    report.set(
        "n_hot",
        curve.n_hot,
        out.stderr(1),
        ParamUnit::Dimensionless,
    );
    report.set(
        "gamma",
        ordinary(curve.gamma),
        ordinary(out.stderr(2)),
        ParamUnit::Hz,
    );
    let gap = curve.gamma_s - curve.gamma;
    let nd_err = match &out.covariance {
        Some(c) => {
            // n_δ = c/(γs − γ)
            let g = [
                1.0 / gap,
                curve.slow_amplitude / (gap * gap),
                -curve.slow_amplitude / (gap * gap),
            ];
            let idx = [3, 2, 4];
            let mut v = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    v += g[a] * g[b] * c[(idx[a], idx[b])];
                }
            }
            v.max(0.0).sqrt()
        }
        None => f64::INFINITY,
    };
    report.set("n_delta", curve.n_delta(), nd_err, ParamUnit::Dimensionless);
    report.set(
        "gamma_s",
        ordinary(curve.gamma_s),
        ordinary(out.stderr(4)),
        ParamUnit::Hz,
    );
    report.residual_norm = out.residual_norm;
    report.stage_log.push(
        StageRecord::new("closed_form_fit")
            .input(format!("{n} samples"))
            .output("n_initial", curve.n_initial)
            .output("n_hot", curve.n_hot)
            .output("iterations", out.iterations as f64),
    );
    if !out.converged {
        report.convergence = Convergence::MaxIter;
    }
    Ok(report)
}
