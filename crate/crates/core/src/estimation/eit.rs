use std::f64::consts::TAU;

use nalgebra::DMatrix;

use super::lm::{levenberg_marquardt, LmOptions, LmOutcome, Problem};
use super::lorentzian::fit_lorentzian_set;
use super::report::{Convergence, FitReport, ParamUnit, StageRecord};
use crate::error::{ensure_positive, Error, Result};
use crate::model::{angular, ordinary};
use crate::spectra::{
    jittered_value, local_maxima, JitterKernel, JitterShape, SpectrumTrace, TraceKind,
};

/// Values measured independently, e.g. from ringdown under the same drive
/// (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EitPrior {
    pub coupling: f64,
    pub gamma_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EitPipelineOptions {
    /// Mechanical frequency (rad/s).
    pub omega_m: f64,
    pub prior: Option<EitPrior>,
    /// Half width of the transparency window analysed in stages 2 to 4 (Hz).
    pub window_half_hz: f64,
    pub jitter_shape: JitterShape,
    /// Quadrature nodes for jitter averaging.
    pub quad_nodes: usize,
    /// A trace with `|Δ − ω_m|/2π` below this is the two-photon trace (Hz).
    pub resonance_tolerance_hz: f64,
    /// Moving-average length applied to the inverse response before peak
    /// search.
    pub smoothing_points: usize,
}

impl EitPipelineOptions {
    pub fn new(omega_m: f64) -> Self {
        EitPipelineOptions {
            omega_m,
            prior: None,
            window_half_hz: 40e3,
            jitter_shape: JitterShape::Gaussian,
            quad_nodes: 61,
            resonance_tolerance_hz: 5e3,
            smoothing_points: 25,
        }
    }
}

/// Pipeline result with the model overlay for the two-photon trace.
#[derive(Debug, Clone)]
pub struct EitPipelineFit {
    pub report: FitReport,
    /// Index of the two-photon trace in the input.
    pub central: usize,
    /// Window frequencies (Hz), measured `|S11|` and fitted model `|S11|`.
    pub overlay: Vec<(f64, f64, f64)>,
}

/// Stage-4 parameters, angular except the jitter width (Hz).
#[derive(Debug, Clone, Copy)]
struct CentralParams {
    coupling: f64,
    gamma_i: f64,
    jitter_hz: f64,
    offset: f64,
}

struct CentralWindow {
    freqs: Vec<f64>,
    deltas: Vec<f64>,
    data: Vec<f64>,
    /// `ω_m − Δ` for the two-photon trace.
    two_photon: f64,
    shape: JitterShape,
    nodes: usize,
}

impl CentralWindow {
    fn model(&self, kappa: f64, kappa_e: f64, p: &CentralParams) -> Result<Vec<f64>> {
        let quad = JitterKernel {
            shape: self.shape,
            fwhm: p.jitter_hz.abs(),
        }
        .quadrature(self.nodes);
        self.deltas
            .iter()
            .map(|&d| {
                jittered_value(
                    d,
                    kappa,
                    kappa_e,
                    p.gamma_i.abs(),
                    p.coupling.abs(),
                    self.two_photon + p.offset,
                    &quad,
                )
                .map(|s| s.norm())
            })
            .collect()
    }

    fn cost(&self, kappa: f64, kappa_e: f64, p: &CentralParams) -> Result<f64> {
        Ok(self
            .model(kappa, kappa_e, p)?
            .iter()
            .zip(&self.data)
            .map(|(m, d)| (m - d).powi(2))
            .sum())
    }
}

fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Highest smoothed inverse-response maximum on each side of `center`.
fn inverse_peaks(freqs: &[f64], inverse: &[f64], center: f64) -> Option<(f64, f64, f64, f64)> {
    let peaks = local_maxima(freqs, inverse);
    let pick = |left: bool| {
        peaks
            .iter()
            .filter(|p| {
                if left {
                    p.freq < center
                } else {
                    p.freq > center
                }
            })
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .copied()
    };
    let (l, r) = (pick(true)?, pick(false)?);
    Some((l.freq, l.value, r.freq, r.value))
}

/// Multi-stage reflection fit:
/// 1. joint Lorentzian fits of the off-resonance traces give `κe` and the
///    `κ(Δ)` curve, read out at two-photon resonance;
/// 2. the transparency-window linewidth gives the jitter width, with `G`
///    and `γi` from the prior when available;
/// 3. the splitting of the inverse-response peaks gives `G`;
/// 4. a jitter-aware weighted fit of the inverse response refines `G`,
///    `γi`, the jitter width and the window offset.
///
/// Uncertainties combine the stage-4 covariance with the spread obtained by
/// refitting at `κ ± σκ` and `κe ± σκe`.
pub fn fit_eit_pipeline(traces: &[SpectrumTrace], opts: &EitPipelineOptions) -> Result<FitReport> {
    run_eit_pipeline(traces, opts).map(|f| f.report)
}

pub fn run_eit_pipeline(
    traces: &[SpectrumTrace],
    opts: &EitPipelineOptions,
) -> Result<EitPipelineFit> {
    let (first, cavity) = run_pass(traces, opts, None)?;
    let r = &first.report;
    let (Some(cavity), false) = (cavity, r.is_degenerate()) else {
        return Ok(first);
    };
    let (Some(g), Some(gi), Some(jit)) = (
        r.value("coupling_g"),
        r.value("gamma_i"),
        r.value("jitter_fwhm"),
    ) else {
        return Ok(first);
    };
    let shift = dressing_shift(traces, &cavity, opts, angular(g), angular(gi), jit)?;
    Ok(run_pass(traces, opts, Some(&shift))?.0)
}

/// Stage-1 results needed to model the off-resonance traces.
struct CavityStage {
    off: Vec<(usize, f64)>,
    lines: Vec<(f64, f64)>,
    kappa_e: f64,
}

/// Amount by which the mechanical dressing of the off-resonance traces moves
/// the bare-line fits (Hz).
struct DressingShift {
    kappa_e: f64,
    lines: Vec<(f64, f64)>,
}

/// Fits bare lines to the modelled dressed traces and returns how far they
/// land from the parameters that generated them.
fn dressing_shift(
    traces: &[SpectrumTrace],
    cavity: &CavityStage,
    opts: &EitPipelineOptions,
    coupling: f64,
    gamma_i: f64,
    jitter_hz: f64,
) -> Result<DressingShift> {
    let quad = JitterKernel {
        shape: opts.jitter_shape,
        fwhm: jitter_hz.abs(),
    }
    .quadrature(opts.quad_nodes);
    let kappa_e = angular(cavity.kappa_e);
    let mut models = Vec::with_capacity(cavity.off.len());
    for (&(i, x), &(f0, k)) in cavity.off.iter().zip(&cavity.lines) {
        let t = &traces[i];
        let values = t
            .freqs
            .iter()
            .map(|&f| {
                jittered_value(
                    TAU * (f - f0),
                    angular(k),
                    kappa_e,
                    gamma_i,
                    coupling,
                    -x,
                    &quad,
                )
                .map(|s| s.norm())
            })
            .collect::<Result<Vec<_>>>()?;
        models.push(SpectrumTrace::new(
            t.freqs.clone(),
            values,
            TraceKind::Reflection,
        )?);
    }
    let refs: Vec<&SpectrumTrace> = models.iter().collect();
    let fit = fit_lorentzian_set(&refs)?;
    Ok(DressingShift {
        kappa_e: fit.kappa_e - cavity.kappa_e,
        lines: fit
            .lines
            .iter()
            .zip(&cavity.lines)
            .map(|(a, b)| (a.0 - b.0, a.1 - b.1))
            .collect(),
    })
}

fn run_pass(
    traces: &[SpectrumTrace],
    opts: &EitPipelineOptions,
    shift: Option<&DressingShift>,
) -> Result<(EitPipelineFit, Option<CavityStage>)> {
    ensure_positive("omega_m", opts.omega_m)?;
    ensure_positive("window_half_hz", opts.window_half_hz)?;
    let mut off = Vec::new();
    let mut central: Option<(usize, f64)> = None;
    let mut skipped = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        t.validate()?;
        if t.kind != TraceKind::Reflection {
            return Err(Error::InvalidTrace(format!(
                "trace {i} is not a reflection trace"
            )));
        }
        let det = t
            .meta
            .drive_detuning_hz
            .ok_or_else(|| Error::InvalidTrace(format!("trace {i} lacks a drive detuning")))?;
        let x = angular(det) - opts.omega_m;
        let half_span = (t.freqs[t.len() - 1] - t.freqs[0]) / 2.0;
        if ordinary(x.abs()) <= opts.resonance_tolerance_hz {
            if central.is_none_or(|(_, cx)| x.abs() < cx.abs()) {
                central = Some((i, x));
            }
        } else if ordinary(x.abs()) > half_span {
            off.push((i, x));
        } else {
            skipped.push(i);
        }
    }
    let Some((ci, _)) = central else {
        return Err(Error::Fit("no trace at two-photon resonance".into()));
    };
    if off.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 traces with the mechanical feature outside the window, got {}",
            off.len()
        )));
    }
    let mut report = FitReport::new("eit");

    // stage 1
    let off_traces: Vec<&SpectrumTrace> = off.iter().map(|&(i, _)| &traces[i]).collect();
    let mut set = fit_lorentzian_set(&off_traces)?;
    if let Some(sh) = shift {
        set.kappa_e -= sh.kappa_e;
        for (l, d) in set.lines.iter_mut().zip(&sh.lines) {
            l.0 -= d.0;
            l.1 -= d.1;
        }
    }
    let xs: Vec<f64> = off.iter().map(|&(_, x)| ordinary(x)).collect();
    let ks: Vec<f64> = set.lines.iter().map(|l| l.1).collect();
    let (kappa_hz, kappa_sigma_hz) = regress_at_zero(&xs, &ks);
    let f_center = set.lines.iter().map(|l| l.0).sum::<f64>() / set.lines.len() as f64;
    let kappa_e_hz = set.kappa_e;
    let kappa_e_sigma_hz = set.kappa_e_err;
    let mut st1 = StageRecord::new("lorentzian");
    for &(i, x) in &off {
        st1 = st1.input(format!("trace {i} (drive offset {} Hz)", ordinary(x)));
    }
    if !skipped.is_empty() {
        st1 = st1.note(format!(
            "traces {skipped:?} skipped: mechanical feature inside the window"
        ));
    }
    if let Some(sh) = shift {
        st1 = st1.note(format!(
            "corrected for mechanical dressing (kappa_e moved by {:.3e} Hz)",
            -sh.kappa_e
        ));
    }
    report.stage_log.push(
        st1.output("kappa_plus", kappa_hz)
            .output("kappa_plus_sigma", kappa_sigma_hz)
            .output("kappa_e_plus", kappa_e_hz)
            .output("kappa_e_plus_sigma", kappa_e_sigma_hz)
            .output("cavity_center", f_center),
    );
    report.set("kappa_plus", kappa_hz, kappa_sigma_hz, ParamUnit::Hz);
    report.set("kappa_e_plus", kappa_e_hz, kappa_e_sigma_hz, ParamUnit::Hz);
    if !set.converged || kappa_e_hz > kappa_hz || kappa_hz <= 0.0 {
        return Ok((
            EitPipelineFit {
                report: report.degenerate(format!(
                    "cavity fits unusable: kappa = {kappa_hz} Hz, kappa_e = {kappa_e_hz} Hz"
                )),
                central: ci,
                overlay: Vec::new(),
            },
            None,
        ));
    }
    let kappa = angular(kappa_hz);
    let kappa_e = angular(kappa_e_hz);

    // window around the cavity centre on the two-photon trace
    let ct = &traces[ci];
    let det = angular(ct.meta.drive_detuning_hz.unwrap_or_default());
    let idx: Vec<usize> = (0..ct.len())
        .filter(|&j| (ct.freqs[j] - f_center).abs() <= opts.window_half_hz)
        .collect();
    if idx.len() < 16 {
        return Err(Error::InvalidTrace(format!(
            "only {} samples of the two-photon trace fall within the window",
            idx.len()
        )));
    }
    let win = CentralWindow {
        freqs: idx.iter().map(|&j| ct.freqs[j]).collect(),
        deltas: idx
            .iter()
            .map(|&j| TAU * (ct.freqs[j] - f_center))
            .collect(),
        data: idx.iter().map(|&j| ct.values[j]).collect(),
        two_photon: opts.omega_m - det,
        shape: opts.jitter_shape,
        nodes: opts.quad_nodes,
    };
    let inverse: Vec<f64> = win.data.iter().map(|v| 1.0 / v.max(1e-6).powi(2)).collect();
    let smooth = moving_average(&inverse, opts.smoothing_points.max(1));
    let feature_hz = f_center + ordinary(win.two_photon);
    let peaks = inverse_peaks(&win.freqs, &smooth, feature_hz);
    let peak_guess = peaks.map(|(fl, _, fr, _)| TAU * (fr - fl) / 2.0);

    // stage 2
    let (coupling0, gamma0, seeded) = match (opts.prior, peak_guess) {
        (Some(p), _) => (p.coupling, p.gamma_i, "prior"),
        (None, Some(g)) => (
            g,
            angular(100.0).min(g * g / kappa),
            "inverse-peak heuristic",
        ),
        (None, None) => (0.0, angular(100.0), "none"),
    };
    let (_, vmax) =
        win.data
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |a, (i, v)| if v > a.1 { (i, v) } else { a },
            );
    let imax = win.data.iter().position(|&v| v == vmax).unwrap_or(0);
    let offset0 = win.deltas[imax] - win.two_photon;
    let gamma_tot_hz = ordinary(4.0 * coupling0 * coupling0 / kappa + gamma0).max(10.0);
    let mut best = (f64::INFINITY, 0.0);
    for mult in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let trial = CentralParams {
            coupling: coupling0,
            gamma_i: gamma0,
            jitter_hz: mult * gamma_tot_hz,
            offset: offset0,
        };
        let c = win.cost(kappa, kappa_e, &trial)?;
        if c < best.0 {
            best = (c, trial.jitter_hz);
        }
    }
    let jit_scale = gamma_tot_hz;
    let off_scale = angular(gamma_tot_hz);
    let free_gamma = opts.prior.is_none();
    let stage2 = {
        let problem = Problem::new(|p: &[f64]| {
            let cp = CentralParams {
                coupling: coupling0,
                gamma_i: if free_gamma { p[2] * gamma0 } else { gamma0 },
                jitter_hz: p[0] * jit_scale,
                offset: p[1] * off_scale,
            };
            let m = win.model(kappa, kappa_e, &cp)?;
            Ok(m.iter().zip(&win.data).map(|(a, b)| a - b).collect())
        });
        let mut x0 = vec![(best.1 / jit_scale).max(0.05), offset0 / off_scale];
        if free_gamma {
            x0.push(1.0);
        }
        levenberg_marquardt(&problem, &x0, LmOptions::default())?
    };
    let jitter2 = stage2.params[0].abs() * jit_scale;
    let offset2 = stage2.params[1] * off_scale;
    let gamma2 = if free_gamma {
        stage2.params[2].abs() * gamma0
    } else {
        gamma0
    };
    report.stage_log.push(
        StageRecord::new("jitter_linewidth")
            .input(format!("trace {ci}, {} window samples", win.data.len()))
            .input(format!("coupling and damping from {seeded}"))
            .output("jitter_fwhm", jitter2)
            .output("jitter_fwhm_sigma", stage2.stderr(0) * jit_scale)
            .output("window_offset", ordinary(offset2))
            .output("gamma_i", ordinary(gamma2)),
    );

    // stage 3
    let Some((fl, vl, fr, vr)) = inverse_peaks(&win.freqs, &smooth, feature_hz + ordinary(offset2))
    else {
        let (_, top) =
            win.freqs
                .iter()
                .zip(&smooth)
                .fold(
                    (0.0, f64::NEG_INFINITY),
                    |a, (&f, &v)| if v > a.1 { (f, v) } else { a },
                );
        report.stage_log.push(
            StageRecord::new("inverse_peaks")
                .input(format!("trace {ci}"))
                .output("peak_count", 1.0)
                .note("single peak; coupling not determined"),
        );
        let at = win.freqs[smooth.iter().position(|&v| v == top).unwrap_or(0)];
        return Ok((
            EitPipelineFit {
                report: report.degenerate(format!(
                    "inverse response shows a single peak at {at} Hz; no splitting to read G from"
                )),
                central: ci,
                overlay: Vec::new(),
            },
            None,
        ));
    };
    let lo = fl.min(fr);
    let hi = fl.max(fr);
    let valley = win
        .freqs
        .iter()
        .zip(&smooth)
        .filter(|(f, _)| **f > lo && **f < hi)
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let inv_noise =
        super::ringdown::noise_sigma(&inverse) / (opts.smoothing_points.max(1) as f64).sqrt();
    if !(valley < vl.min(vr) - 3.0 * inv_noise) {
        report.stage_log.push(
            StageRecord::new("inverse_peaks")
                .input(format!("trace {ci}"))
                .output("left", fl)
                .output("right", fr)
                .note("maxima not separated by a resolvable dip"),
        );
        return Ok((
            EitPipelineFit {
                report: report.degenerate(format!(
                    "inverse response maxima at {fl} Hz and {fr} Hz are not resolved; single peak"
                )),
                central: ci,
                overlay: Vec::new(),
            },
            None,
        ));
    }
    let coupling3 = TAU * (hi - lo) / 2.0;
    report.stage_log.push(
        StageRecord::new("inverse_peaks")
            .input(format!(
                "trace {ci}, smoothed over {} samples",
                opts.smoothing_points
            ))
            .output("left", lo)
            .output("right", hi)
            .output("coupling_g", ordinary(coupling3)),
    );

    // stage 4, started from several corners of the jitter/damping trade-off
    let base = CentralParams {
        coupling: coupling3,
        gamma_i: gamma2,
        jitter_hz: jitter2.max(0.05 * jit_scale),
        offset: offset2,
    };
    let starts = [
        base,
        CentralParams {
            gamma_i: angular(10.0),
            ..base
        },
        CentralParams {
            gamma_i: angular(gamma_tot_hz),
            jitter_hz: 0.1 * jit_scale,
            ..base
        },
    ];
    let mut best: Option<InverseFit> = None;
    for st in &starts {
        if let Ok(f) = inverse_fit(&win, kappa, kappa_e, st, false) {
            if best.as_ref().is_none_or(|b| f.cost() < b.cost()) {
                best = Some(f);
            }
        }
    }
    let mut main =
        best.ok_or_else(|| Error::Fit("inverse-response fit failed from every start".into()))?;
    let dof = (win.data.len() as f64 - 4.0).max(1.0);
    let mut gamma_bound = None;
    if ordinary(main.params.gamma_i.abs()) < GAMMA_BOUNDARY_HZ {
        // damping consistent with zero: fit the rest with it pinned and take
        // the profile Δχ² = 1 point as the upper 1σ limit
        let pinned = CentralParams {
            gamma_i: 0.0,
            ..main.params
        };
        main = inverse_fit(&win, kappa, kappa_e, &pinned, true)?;
        let s2 = main.cost() / dof;
        let upper = gamma_upper_bound(&win, kappa, kappa_e, &main.params, main.cost() + s2)?;
        main.sigma[1] = upper;
        gamma_bound = Some(upper);
    }
    let p4 = main.params;

    // propagate the cavity uncertainties by refitting
    let mut shifts = Vec::new();
    for (dk, dke) in [
        (angular(kappa_sigma_hz), 0.0),
        (0.0, angular(kappa_e_sigma_hz)),
    ] {
        if dk == 0.0 && dke == 0.0 || !(dk + dke).is_finite() {
            continue;
        }
        let (k2, ke2) = (kappa + dk, (kappa_e + dke).min(kappa + dk));
        if let Ok(refit) = inverse_fit(&win, k2, ke2, &p4, gamma_bound.is_some()) {
            let q = refit.params;
            shifts.push((
                q.coupling.abs() - p4.coupling.abs(),
                q.gamma_i.abs() - p4.gamma_i.abs(),
                q.jitter_hz.abs() - p4.jitter_hz.abs(),
                dk,
            ));
        }
    }
    let comb = |base: f64, pick: fn(&(f64, f64, f64, f64)) -> f64| {
        (base * base + shifts.iter().map(|s| pick(s).powi(2)).sum::<f64>()).sqrt()
    };
    let g = p4.coupling.abs();
    let gi = p4.gamma_i.abs();
    let sigma_g = comb(main.sigma[0], |s| s.0);
    let sigma_gi = comb(main.sigma[1], |s| s.1);
    let sigma_j = comb(main.sigma[2], |s| s.2);
    let (coop, sigma_c) = match gamma_bound {
        Some(_) => (f64::INFINITY, f64::INFINITY),
        None => {
            let coop = cooperativity_of(&p4, kappa);
            // C = 4G²/(κγi), linearised
            let grad = [2.0 * coop / g, -coop / gi];
            let stat = match &main.cov_rates {
                Some(c) => {
                    let mut v = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            v += grad[a] * grad[b] * c[a][b];
                        }
                    }
                    v.max(0.0)
                }
                None => f64::INFINITY,
            };
            let sys: f64 = shifts
                .iter()
                .map(|s| (grad[0] * s.0 + grad[1] * s.1 - coop * s.3 / kappa).powi(2))
                .sum();
            (coop, (stat + sys).sqrt())
        }
    };
    let mut st4 = StageRecord::new("inverse_fit")
        .input(format!("trace {ci}, weights |S11|^3/2"))
        .input(format!("{} starting points", starts.len()))
        .output("coupling_g", ordinary(g))
        .output("gamma_i", ordinary(gi))
        .output("jitter_fwhm", p4.jitter_hz.abs())
        .output("window_offset", ordinary(p4.offset))
        .output("iterations", main.outcome.iterations as f64);
    let mut note = format!(
        "uncertainties include {} refits at shifted cavity rates",
        shifts.len()
    );
    if let Some(up) = gamma_bound {
        let lower = 4.0 * g * g / (kappa * up);
        st4 = st4
            .output("gamma_i_upper", ordinary(up))
            .output("cooperativity_lower_bound", lower);
        note.push_str("; intrinsic damping at zero, sigma is the profile upper limit");
        report.diagnosis = Some(format!(
            "gamma_i is consistent with zero (1 sigma upper limit {:.1} Hz); cooperativity is only bounded below, by {lower:.2}",
            ordinary(up)
        ));
    }
    report.stage_log.push(st4.note(note));
    report.set("jitter_fwhm", p4.jitter_hz.abs(), sigma_j, ParamUnit::Hz);
    report.set("coupling_g", ordinary(g), ordinary(sigma_g), ParamUnit::Hz);
    report.set("gamma_i", ordinary(gi), ordinary(sigma_gi), ParamUnit::Hz);
    report.set("cooperativity", coop, sigma_c, ParamUnit::Dimensionless);
    report.set(
        "window_offset",
        ordinary(p4.offset),
        ordinary(main.sigma[3]),
        ParamUnit::Hz,
    );
    report.residual_norm = main.outcome.residual_norm;
    if !main.outcome.converged {
        report.convergence = Convergence::MaxIter;
    }
    let model = win.model(kappa, kappa_e, &p4)?;
    let overlay = win
        .freqs
        .iter()
        .zip(&win.data)
        .zip(&model)
        .map(|((&f, &d), &m)| (f, d, m))
        .collect();
    let cavity = CavityStage {
        off,
        lines: set.lines,
        kappa_e: set.kappa_e,
    };
    Ok((
        EitPipelineFit {
            report,
            central: ci,
            overlay,
        },
        Some(cavity),
    ))
}

fn cooperativity_of(p: &CentralParams, kappa: f64) -> f64 {
    4.0 * p.coupling * p.coupling / (kappa * p.gamma_i.abs())
}

/// Below this the intrinsic damping is treated as pinned at zero (Hz).
const GAMMA_BOUNDARY_HZ: f64 = 0.5;

struct InverseFit {
    outcome: LmOutcome,
    params: CentralParams,
    /// Standard errors of `(G, γi, jitter, offset)` in their own units.
    sigma: [f64; 4],
    /// Covariance of `(G, γi)`.
    cov_rates: Option<[[f64; 2]; 2]>,
}

impl InverseFit {
    fn cost(&self) -> f64 {
        self.outcome.residual_norm * self.outcome.residual_norm
    }
}

/// Weighted fit of the inverse response with `(G, γi, jitter, offset)` free,
/// or with `γi` held at its starting value.
fn inverse_fit(
    win: &CentralWindow,
    kappa: f64,
    kappa_e: f64,
    start: &CentralParams,
    pin_gamma: bool,
) -> Result<InverseFit> {
    let scales = [
        start.coupling.abs().max(1.0),
        start.gamma_i.abs().max(angular(1.0)),
        start.jitter_hz.abs().max(1.0),
        angular(start.jitter_hz.abs().max(1.0)),
    ];
    let free: Vec<usize> = if pin_gamma {
        vec![0, 2, 3]
    } else {
        vec![0, 1, 2, 3]
    };
    // noise on |S| maps to 2σ/|S|³ on 1/|S|²
    let weights: Vec<f64> = win.data.iter().map(|d| d.max(1e-6).powi(3) / 2.0).collect();
    let inv_data: Vec<f64> = win.data.iter().map(|d| 1.0 / d.max(1e-6).powi(2)).collect();
    let full = [start.coupling, start.gamma_i, start.jitter_hz, start.offset];
    let unpack = |p: &[f64]| {
        let mut v = full;
        for (k, &i) in free.iter().enumerate() {
            v[i] = p[k] * scales[i];
        }
        CentralParams {
            coupling: v[0],
            gamma_i: v[1],
            jitter_hz: v[2],
            offset: v[3],
        }
    };
    let problem = Problem::new(|p: &[f64]| {
        let m = win.model(kappa, kappa_e, &unpack(p))?;
        Ok(m.iter()
            .zip(&inv_data)
            .zip(&weights)
            .map(|((mv, iv), w)| (1.0 / (mv * mv) - iv) * w)
            .collect())
    });
    let x0: Vec<f64> = free.iter().map(|&i| full[i] / scales[i]).collect();
    let outcome = levenberg_marquardt(&problem, &x0, LmOptions::default())?;
    let params = unpack(&outcome.params);
    let mut sigma = [0.0; 4];
    for (k, &i) in free.iter().enumerate() {
        sigma[i] = outcome.stderr(k) * scales[i];
    }
    let cov_rates = outcome.covariance.as_ref().map(|c: &DMatrix<f64>| {
        let mut m = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                if let (Some(ka), Some(kb)) = (
                    free.iter().position(|&i| i == a),
                    free.iter().position(|&i| i == b),
                ) {
                    m[a][b] = c[(ka, kb)] * scales[a] * scales[b];
                }
            }
        }
        m
    });
    Ok(InverseFit {
        outcome,
        params,
        sigma,
        cov_rates,
    })
}

/// Smallest intrinsic damping whose profile cost reaches `target`, found by
/// doubling then bisection (rad/s).
fn gamma_upper_bound(
    win: &CentralWindow,
    kappa: f64,
    kappa_e: f64,
    base: &CentralParams,
    target: f64,
) -> Result<f64> {
    let cost = |g: f64| -> Result<f64> {
        let st = CentralParams {
            gamma_i: g,
            ..*base
        };
        Ok(inverse_fit(win, kappa, kappa_e, &st, true)?.cost())
    };
    let (mut lo, mut hi) = (0.0, angular(4.0));
    while cost(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > angular(1e6) {
            return Ok(f64::INFINITY);
        }
    }
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if cost(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Linear regression `y = a + b·x`; returns `a` and the prediction standard
/// deviation of a single new observation at `x = 0`.
fn regress_at_zero(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if xs.len() < 3 || sxx == 0.0 {
        let var = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        return (my, var.sqrt());
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let s2 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).powi(2))
        .sum::<f64>()
        / (n - 2.0);
    (a, (s2 * (1.0 + 1.0 / n + mx * mx / sxx)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_prediction_interval() {
        let xs = [-1.0, 0.0, 1.0, 2.0];
        let ys = [1.0, 2.0, 3.0, 4.0];
        let (a, s) = regress_at_zero(&xs, &ys);
        assert!((a - 2.0).abs() < 1e-12);
        assert_eq!(s, 0.0);
        let (a, s) = regress_at_zero(&[0.0, 0.0], &[1.0, 3.0]);
        assert_eq!(a, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn smoothing_preserves_constants() {
        let v = moving_average(&[2.0; 10], 5);
        assert!(v.iter().all(|x| (x - 2.0).abs() < 1e-15));
    }
}
