use nalgebra::DMatrix;
use num_complex::Complex64;

use super::lm::{levenberg_marquardt, LmOptions, LmOutcome, Problem};
use super::report::{Convergence, FitReport, ParamUnit, StageRecord};
use crate::error::{Error, Result};
use crate::spectra::{SpectrumTrace, TraceKind};

/// Bare-cavity reflection magnitude `|1 − κe/(κ/2 + i(f − f0))|`; all
/// arguments in Hz.
pub fn lorentzian_magnitude(f: f64, f0: f64, kappa: f64, kappa_e: f64) -> f64 {
    (1.0 - kappa_e / Complex64::new(kappa / 2.0, f - f0)).norm()
}

/// Gradient of [`lorentzian_magnitude`] with respect to `(f0, κ, κe)`.
fn lorentzian_gradient(f: f64, f0: f64, kappa: f64, kappa_e: f64) -> (f64, [f64; 3]) {
    let z = Complex64::new(kappa / 2.0, f - f0);
    let s = 1.0 - kappa_e / z;
    let mag = s.norm();
    let z2 = z * z;
    let ds = [
        Complex64::new(0.0, -kappa_e) / z2,
        kappa_e / (2.0 * z2),
        -1.0 / z,
    ];
    let g = ds.map(|d| (s.conj() * d).re / mag.max(1e-300));
    (mag, g)
}

/// Single-trace Lorentzian result, all quantities in Hz.
#[derive(Debug, Clone)]
pub struct LorentzianFit {
    pub f0: f64,
    pub kappa: f64,
    pub kappa_e: f64,
    pub f0_err: f64,
    pub kappa_err: f64,
    pub kappa_e_err: f64,
    pub residual_norm: f64,
    pub converged: bool,
}

/// Starting point from the dip location and the half-depth width of `|S|²`.
///
/// A magnitude-only trace cannot tell under- from over-coupling
/// (`κe ↔ κ − κe`); the undercoupled branch is assumed.
pub fn lorentzian_guess(freqs: &[f64], values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    let edge = (n / 20).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let base = mean(&values[..edge]).max(mean(&values[n - edge..]));
    let (imin, vmin) = values
        .iter()
        .copied()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |a, (i, v)| if v < a.1 { (i, v) } else { a },
        );
    let level = (base * base + vmin * vmin) / 2.0;
    let left = (0..imin).rev().find(|&i| values[i] * values[i] >= level);
    let right = (imin..n).find(|&i| values[i] * values[i] >= level);
    let span = freqs[n - 1] - freqs[0];
    let kappa = match (left, right) {
        (Some(l), Some(r)) if r > l => freqs[r] - freqs[l],
        (Some(l), None) => 2.0 * (freqs[imin] - freqs[l]),
        (None, Some(r)) => 2.0 * (freqs[r] - freqs[imin]),
        _ => span / 4.0,
    }
    .max(span / n as f64);
    let ratio = (vmin / base).clamp(0.0, 1.0);
    let kappa_e = (kappa * (1.0 - ratio) / 2.0).max(kappa * 1e-3);
    (freqs[imin], kappa, kappa_e)
}

fn fit_raw(freqs: &[f64], values: &[f64]) -> Result<(LorentzianFit, LmOutcome)> {
    let (f0g, kg, keg) = lorentzian_guess(freqs, values);
    let w = kg;
    let unpack = |p: &[f64]| (f0g + p[0] * w, p[1] * w, p[2] * w);
    let problem = Problem::new(|p: &[f64]| {
        let (f0, k, ke) = unpack(p);
        Ok(freqs
            .iter()
            .zip(values)
            .map(|(&f, &y)| lorentzian_magnitude(f, f0, k, ke) - y)
            .collect())
    })
    .with_jacobian(|p: &[f64]| {
        let (f0, k, ke) = unpack(p);
        let mut j = DMatrix::zeros(freqs.len(), 3);
        for (i, &f) in freqs.iter().enumerate() {
            let (_, g) = lorentzian_gradient(f, f0, k, ke);
            for c in 0..3 {
                j[(i, c)] = g[c] * w;
            }
        }
        Ok(j)
    });
    let out = levenberg_marquardt(&problem, &[0.0, 1.0, keg / w], LmOptions::default())?;
    let (f0, kappa, kappa_e) = unpack(&out.params);
    let fit = LorentzianFit {
        f0,
        kappa,
        kappa_e,
        f0_err: out.stderr(0) * w,
        kappa_err: out.stderr(1) * w,
        kappa_e_err: out.stderr(2) * w,
        residual_norm: out.residual_norm,
        converged: out.converged,
    };
    Ok((fit, out))
}

fn check_reflection(trace: &SpectrumTrace) -> Result<()> {
    trace.validate()?;
    if trace.kind != TraceKind::Reflection {
        return Err(Error::InvalidTrace(format!(
            "Lorentzian fit needs a reflection trace, got {}",
            trace.kind.as_str()
        )));
    }
    if trace.len() < 4 {
        return Err(Error::InvalidTrace(
            "Lorentzian fit needs at least 4 points".into(),
        ));
    }
    Ok(())
}

/// Least-squares fit of a bare-cavity line to `|S11|`.
pub fn fit_lorentzian_raw(trace: &SpectrumTrace) -> Result<LorentzianFit> {
    check_reflection(trace)?;
    fit_raw(&trace.freqs, &trace.values).map(|(f, _)| f)
}

/// Fit a bare-cavity line; reports `omega_0`, `kappa` and `kappa_e` as
/// ordinary frequencies (Hz).
pub fn fit_lorentzian(trace: &SpectrumTrace) -> Result<FitReport> {
    let fit = fit_lorentzian_raw(trace)?;
    let mut report = FitReport::new("lorentzian");
    report.set("omega_0", fit.f0, fit.f0_err, ParamUnit::Hz);
    report.set("kappa", fit.kappa, fit.kappa_err, ParamUnit::Hz);
    report.set("kappa_e", fit.kappa_e, fit.kappa_e_err, ParamUnit::Hz);
    report.residual_norm = fit.residual_norm;
    report.stage_log.push(
        StageRecord::new("lorentzian")
            .input(format!("{} points", trace.len()))
            .output("omega_0", fit.f0)
            .output("kappa", fit.kappa)
            .output("kappa_e", fit.kappa_e),
    );
    if !fit.converged {
        return Ok(report.degenerate("no convergence within the iteration limit"));
    }
    let (lo, hi) = trace
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let n = trace.len();
    let step = (trace.freqs[n - 1] - trace.freqs[0]).abs() / (n - 1) as f64;
    if fit.kappa < step {
        return Ok(report.degenerate(format!(
            "linewidth {} Hz is below the frequency step {step} Hz",
            fit.kappa
        )));
    }
    if hi - lo <= 1e-9 * hi.abs().max(1.0) || fit.kappa_e < 3.0 * fit.kappa_e_err {
        return Ok(report.degenerate(format!(
            "no resolvable resonance dip: kappa_e = {} +- {} Hz",
            fit.kappa_e, fit.kappa_e_err
        )));
    }
    if fit.kappa_e > fit.kappa || fit.kappa <= 0.0 || fit.kappa_e < 0.0 {
        return Ok(report.degenerate(format!(
            "unphysical rates: kappa_e = {} Hz, kappa = {} Hz",
            fit.kappa_e, fit.kappa
        )));
    }
    report.convergence = Convergence::Converged;
    Ok(report)
}

/// Joint fit of several bare-cavity traces with one shared external rate.
#[derive(Debug, Clone)]
pub struct LorentzianSetFit {
    pub kappa_e: f64,
    pub kappa_e_err: f64,
    /// Per trace `(f0, κ)` in Hz.
    pub lines: Vec<(f64, f64)>,
    /// Per trace `(σ_f0, σ_κ)` in Hz.
    pub line_errs: Vec<(f64, f64)>,
    pub residual_norm: f64,
    pub converged: bool,
}

pub fn fit_lorentzian_set(traces: &[&SpectrumTrace]) -> Result<LorentzianSetFit> {
    if traces.is_empty() {
        return Err(Error::InvalidTrace("no traces to fit".into()));
    }
    let mut starts = Vec::with_capacity(traces.len());
    for t in traces {
        check_reflection(t)?;
        starts.push(fit_raw(&t.freqs, &t.values)?.0);
    }
    let w = starts.iter().map(|s| s.kappa).sum::<f64>() / starts.len() as f64;
    let ke0 = starts.iter().map(|s| s.kappa_e).sum::<f64>() / starts.len() as f64;
    let total: usize = traces.iter().map(|t| t.len()).sum();
    let np = 1 + 2 * traces.len();
    let line = |p: &[f64], k: usize| (starts[k].f0 + p[1 + 2 * k] * w, p[2 + 2 * k] * w);
    let problem = Problem::new(|p: &[f64]| {
        let ke = p[0] * w;
        let mut r = Vec::with_capacity(total);
        for (k, t) in traces.iter().enumerate() {
            let (f0, kappa) = line(p, k);
            r.extend(
                t.freqs
                    .iter()
                    .zip(&t.values)
                    .map(|(&f, &y)| lorentzian_magnitude(f, f0, kappa, ke) - y),
            );
        }
        Ok(r)
    })
    .with_jacobian(|p: &[f64]| {
        let ke = p[0] * w;
        let mut j = DMatrix::zeros(total, np);
        let mut row = 0;
        for (k, t) in traces.iter().enumerate() {
            let (f0, kappa) = line(p, k);
            for &f in &t.freqs {
                let (_, g) = lorentzian_gradient(f, f0, kappa, ke);
                j[(row, 0)] = g[2] * w;
                j[(row, 1 + 2 * k)] = g[0] * w;
                j[(row, 2 + 2 * k)] = g[1] * w;
                row += 1;
            }
        }
        Ok(j)
    });
    let mut x0 = vec![ke0 / w];
    for s in &starts {
        x0.push(0.0);
        x0.push(s.kappa / w);
    }
    let out = levenberg_marquardt(&problem, &x0, LmOptions::default())?;
    let lines = (0..traces.len()).map(|k| line(&out.params, k)).collect();
    let line_errs = (0..traces.len())
        .map(|k| (out.stderr(1 + 2 * k) * w, out.stderr(2 + 2 * k) * w))
        .collect();
    Ok(LorentzianSetFit {
        kappa_e: out.params[0] * w,
        kappa_e_err: out.stderr(0) * w,
        lines,
        line_errs,
        residual_norm: out.residual_norm,
        converged: out.converged,
    })
}
