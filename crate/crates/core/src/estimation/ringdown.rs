use nalgebra::DMatrix;

use super::lm::{levenberg_marquardt, LmOptions, Problem};
use super::report::{Convergence, FitReport, ParamUnit, StageRecord};
use crate::dynamics::{RingdownTrace, Segment, SegmentLabel};
use crate::error::Result;
use crate::model::ordinary;

#[derive(Debug, Clone, Copy)]
pub struct RingdownOptions {
    /// The tail starts where the local log-slope magnitude drops below this
    /// multiple of the asymptotic slope.
    pub breakpoint_factor: f64,
    /// Samples per local-slope window; 0 picks `max(5, n/100)`.
    pub slope_window: usize,
    pub min_tail_points: usize,
    /// The tail must start at least this many noise sigmas above zero.
    pub noise_floor_factor: f64,
}

impl Default for RingdownOptions {
    fn default() -> Self {
        RingdownOptions {
            breakpoint_factor: 3.0,
            slope_window: 0,
            min_tail_points: 8,
            noise_floor_factor: 3.0,
        }
    }
}

/// Robust white-noise estimate from first differences.
pub fn noise_sigma(values: &[f64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    let mut d: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    d.sort_by(f64::total_cmp);
    let median = d[d.len() / 2];
    median / (0.674_489_75 * std::f64::consts::SQRT_2)
}

/// Weighted fit `ln p = a − rate·t` over samples with `p > floor`, weights
/// `p²`. Returns `(a, rate)`.
fn log_linear(times: &[f64], power: &[f64], floor: f64) -> Option<(f64, f64)> {
    let (mut sw, mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut count = 0;
    let t0 = times.first().copied().unwrap_or(0.0);
    for (&t, &p) in times.iter().zip(power) {
        if p > floor && p > 0.0 {
            let w = p * p;
            let x = t - t0;
            let y = p.ln();
            sw += w;
            st += w * x;
            sy += w * y;
            stt += w * x * x;
            sty += w * x * y;
            count += 1;
        }
    }
    if count < 3 {
        return None;
    }
    let det = sw * stt - st * st;
    if det <= 0.0 {
        return None;
    }
    let slope = (sw * sty - st * sy) / det;
    let icpt = (sy - slope * st) / sw;
    Some((icpt - slope * t0, -slope))
}

/// Exponential through the first two samples above `floor`, as
/// `(ln amplitude at t = 0, rate)`.
fn two_point(times: &[f64], power: &[f64], floor: f64) -> Option<(f64, f64)> {
    let mut above = times
        .iter()
        .zip(power)
        .filter(|(_, p)| **p > floor && **p > 0.0);
    let (&t0, &p0) = above.next()?;
    let (&t1, &p1) = above.next()?;
    let rate = (p0 / p1).ln() / (t1 - t0);
    Some((p0.ln() + rate * t0, rate))
}

/// Index of the first sample of the slow tail; `0` when no fast component
/// is visible.
pub fn detect_breakpoint(trace: &RingdownTrace, opts: &RingdownOptions) -> Option<usize> {
    let n = trace.len();
    let sigma = noise_sigma(&trace.power);
    let floor = 2.0 * sigma;
    let half = n / 2;
    let (_, asym) = log_linear(&trace.times[half..], &trace.power[half..], floor)?;
    if asym <= 0.0 {
        return None;
    }
    let w = if opts.slope_window == 0 {
        (n / 100).max(5)
    } else {
        opts.slope_window
    };
    (0..n.saturating_sub(w)).find(|&i| {
        log_linear(&trace.times[i..i + w], &trace.power[i..i + w], floor)
            .map(|(_, local)| local.abs() < opts.breakpoint_factor * asym)
            .unwrap_or(true)
    })
}

pub fn fit_ringdown(trace: &RingdownTrace) -> Result<FitReport> {
    fit_ringdown_with(trace, &RingdownOptions::default())
}

/// Two-stage ringdown fit: breakpoint detection, a log-space exponential fit
/// of the slow tail, then least-squares polishing in linear space. When a
/// fast cavity component is present the polish uses the full
/// two-exponential model and also reports `kappa_plus`.
pub fn fit_ringdown_with(trace: &RingdownTrace, opts: &RingdownOptions) -> Result<FitReport> {
    trace.validate()?;
    let mut report = FitReport::new("ringdown");
    let n = trace.len();
    let sigma = noise_sigma(&trace.power);
    let bp = detect_breakpoint(trace, opts).unwrap_or(0);
    report.stage_log.push(
        StageRecord::new("breakpoint")
            .input(format!("{n} samples"))
            .output("index", bp as f64)
            .output("time_s", trace.times[bp])
            .output("noise_sigma", sigma)
            .note(if bp == 0 {
                "no fast component; breakpoint stage skipped"
            } else {
                "cavity leakage segment excluded from tail fit"
            }),
    );

    let tail_t = &trace.times[bp..];
    let tail_p = &trace.power[bp..];
    let Some((ln_a, rate)) = log_linear(tail_t, tail_p, 2.0 * sigma) else {
        return Ok(report.degenerate("slow tail lies below the noise floor"));
    };
    if tail_t.len() < opts.min_tail_points || rate <= 0.0 {
        return Ok(report.degenerate(format!(
            "slow tail has {} samples and log-slope {rate}; cannot fit a decay",
            tail_t.len()
        )));
    }
    let a_tail = ln_a.exp();
    let start_amp = a_tail * (-rate * tail_t[0]).exp();
    if start_amp < opts.noise_floor_factor * sigma {
        return Ok(report.degenerate(format!(
            "slow tail starts at {start_amp:.3e}, below {} x noise sigma {sigma:.3e}",
            opts.noise_floor_factor
        )));
    }
    report.stage_log.push(
        StageRecord::new("tail_log_fit")
            .input(format!("samples {bp}..{n}"))
            .output("gamma_m", ordinary(rate))
            .output("a_mech", a_tail),
    );
    let span = tail_t[tail_t.len() - 1] - tail_t[0];
    if rate * span < 3.0 {
        log::warn!(
            "slow tail spans only {:.2} decay constants; at least 3 are recommended",
            rate * span
        );
    }

    // linear-space polish of the single exponential on the tail
    let single = Problem::new(|p: &[f64]| {
        let (a, g) = (p[0] * a_tail, p[1] * rate);
        Ok(tail_t
            .iter()
            .zip(tail_p)
            .map(|(&t, &y)| a * (-g * t).exp() - y)
            .collect())
    })
    .with_jacobian(|p: &[f64]| {
        let (a, g) = (p[0] * a_tail, p[1] * rate);
        let mut j = DMatrix::zeros(tail_t.len(), 2);
        for (i, &t) in tail_t.iter().enumerate() {
            let e = (-g * t).exp();
            j[(i, 0)] = e * a_tail;
            j[(i, 1)] = -a * t * e * rate;
        }
        Ok(j)
    });
    let out = levenberg_marquardt(&single, &[1.0, 1.0], LmOptions::default())?;
    let mut a_mech = out.params[0] * a_tail;
    let mut gamma = out.params[1] * rate;
    let mut gamma_err = out.stderr(1) * rate;
    let mut a_mech_err = out.stderr(0) * a_tail;
    let mut residual_norm = out.residual_norm;
    let mut converged = out.converged;
    report.stage_log.push(
        StageRecord::new("tail_polish")
            .input("single exponential, linear space")
            .output("gamma_m", ordinary(gamma))
            .output("iterations", out.iterations as f64),
    );

    let mut fast: Option<(f64, f64, f64, f64)> = None;
    if bp > 0 {
        // seed the fast component from the excess over the tail up to and
        // including the breakpoint
        let early = (bp + 1).min(n);
        let early_t = &trace.times[..early];
        let excess: Vec<f64> = early_t
            .iter()
            .zip(&trace.power[..early])
            .map(|(&t, &p)| p - a_mech * (-gamma * t).exp())
            .collect();
        let seed = log_linear(early_t, &excess, 2.0 * sigma)
            .or_else(|| two_point(early_t, &excess, 2.0 * sigma));
        if let Some((ln_c, kappa0)) = seed {
            if kappa0 > gamma {
                let c0 = ln_c.exp();
                let (times, power) = (&trace.times, &trace.power);
                let scales = [c0, kappa0, a_mech, gamma];
                let full = Problem::new(|p: &[f64]| {
                    let q: Vec<f64> = p.iter().zip(&scales).map(|(a, b)| a * b).collect();
                    Ok(times
                        .iter()
                        .zip(power)
                        .map(|(&t, &y)| q[0] * (-q[1] * t).exp() + q[2] * (-q[3] * t).exp() - y)
                        .collect())
                })
                .with_jacobian(|p: &[f64]| {
                    let q: Vec<f64> = p.iter().zip(&scales).map(|(a, b)| a * b).collect();
                    let mut j = DMatrix::zeros(times.len(), 4);
                    for (i, &t) in times.iter().enumerate() {
                        let ef = (-q[1] * t).exp();
                        let es = (-q[3] * t).exp();
                        j[(i, 0)] = ef * scales[0];
                        j[(i, 1)] = -q[0] * t * ef * scales[1];
                        j[(i, 2)] = es * scales[2];
                        j[(i, 3)] = -q[2] * t * es * scales[3];
                    }
                    Ok(j)
                });
                if let Ok(fo) = levenberg_marquardt(&full, &[1.0; 4], LmOptions::default()) {
                    let q: Vec<f64> = fo.params.iter().zip(&scales).map(|(a, b)| a * b).collect();
                    if fo.converged && q.iter().all(|v| *v > 0.0) && q[1] > q[3] {
                        a_mech = q[2];
                        gamma = q[3];
                        gamma_err = fo.stderr(3) * scales[3];
                        a_mech_err = fo.stderr(2) * scales[2];
                        residual_norm = fo.residual_norm;
                        converged = fo.converged;
                        fast = Some((
                            q[0],
                            fo.stderr(0) * scales[0],
                            q[1],
                            fo.stderr(1) * scales[1],
                        ));
                        report.stage_log.push(
                            StageRecord::new("full_polish")
                                .input("two exponentials, full trace")
                                .output("kappa_plus", ordinary(q[1]))
                                .output("gamma_m", ordinary(gamma)),
                        );
                    }
                }
            }
        }
    }

    report.set(
        "gamma_m",
        ordinary(gamma),
        ordinary(gamma_err),
        ParamUnit::Hz,
    );
    report.set("a_mech", a_mech, a_mech_err, ParamUnit::Dimensionless);
    if let Some((a_cav, a_cav_err, kappa, kappa_err)) = fast {
        report.set(
            "kappa_plus",
            ordinary(kappa),
            ordinary(kappa_err),
            ParamUnit::Hz,
        );
        report.set("a_cav", a_cav, a_cav_err, ParamUnit::Dimensionless);
    }
    report.residual_norm = residual_norm;
    if !converged {
        report.convergence = Convergence::MaxIter;
    }
    Ok(report)
}

/// Split a trace into its cavity-leak and mechanical-decay segments.
pub fn segment_ringdown(trace: &RingdownTrace, opts: &RingdownOptions) -> RingdownTrace {
    let bp = detect_breakpoint(trace, opts).unwrap_or(0);
    let mut out = trace.clone();
    out.segments.clear();
    if bp > 0 {
        out.segments.push(Segment {
            label: SegmentLabel::CavityLeak,
            start: 0,
            end: bp,
        });
    }
    out.segments.push(Segment {
        label: SegmentLabel::MechanicalDecay,
        start: bp,
        end: trace.len(),
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ringdown_trace;
    use crate::model::angular;

    fn grid(dt: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn dark_noiseless_single_exponential() {
        let g = angular(68.0);
        let t = grid(1e-5, 1000);
        let tr = ringdown_trace(&t, 0.0, 1.0, 1.0, g).unwrap();
        let r = fit_ringdown(&tr).unwrap();
        assert!(!r.is_degenerate());
        assert!(((r.value("gamma_m").unwrap() - 68.0) / 68.0).abs() < 1e-6);
        assert!(r.get("kappa_plus").is_none());
        assert_eq!(r.stage_log[0].outputs["index"], 0.0);
    }

    #[test]
    fn driven_noiseless_with_cavity_leak() {
        let g = angular(807.0);
        let k = angular(230e3);
        let t = grid(2e-7, 5000);
        let tr = ringdown_trace(&t, 20.0, k, 1.0, g).unwrap();
        let r = fit_ringdown(&tr).unwrap();
        assert!(r.stage_log[0].outputs["index"] > 0.0);
        assert!(((r.value("gamma_m").unwrap() - 807.0) / 807.0).abs() < 1e-6);
        assert!(((r.value("kappa_plus").unwrap() - 230e3) / 230e3).abs() < 1e-6);
        let seg = segment_ringdown(&tr, &RingdownOptions::default());
        assert_eq!(seg.segments.len(), 2);
        assert_eq!(seg.segments[0].label, SegmentLabel::CavityLeak);
    }

    #[test]
    fn flat_noise_is_degenerate() {
        let t = grid(1e-3, 200);
        let p: Vec<f64> = (0..200)
            .map(|i| if i % 2 == 0 { 1e-3 } else { -1e-3 })
            .collect();
        let tr = RingdownTrace::new(t, p).unwrap();
        assert!(fit_ringdown(&tr).unwrap().is_degenerate());
    }

    #[test]
    fn noise_estimate() {
        let v: Vec<f64> = (0..1000)
            .map(|i| if i % 2 == 0 { 0.5 } else { -0.5 })
            .collect();
        // alternating ±0.5 has successive differences of 1
        assert!((noise_sigma(&v) - 1.0 / (0.674_489_75 * 2f64.sqrt())).abs() < 1e-12);
    }
}
