//! The `emx` workflows as library functions. Each returns the files it wrote
//! and whether any fit came out degenerate; the binary maps that to exit
//! codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::config::ExperimentConfig;
use super::design::DesignFile;
use super::synth::{generate, Manifest, MANIFEST};
use super::tracefile::TraceFile;
use super::{write_atomic, OUT_DIR_ENV};
use crate::dynamics::ringdown_signal;
use crate::error::{Error, Result};
use crate::estimation::{
    captured_fraction, fit_g0_slope, fit_heating, fit_lorentzian, fit_ringdown,
    lorentzian_magnitude, noise_sigma, occupancy_from_area, run_eit_pipeline, subtract_background,
    to_quanta, Convergence, DampingPoint, EitPipelineOptions, EitPrior, FitReport, HeatingCurve,
    ParamUnit, StageRecord,
};
use crate::model::{angular, ordinary, MechMode};
use crate::spectra::{
    backaction_rate, eit_trace_jittered, inverse_response, linspace, npsd_trace, occupancy_steady,
    SpectrumTrace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    Eit,
    Inverse,
    Npsd,
}

impl SpectrumKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectrumKind::Eit => "eit",
            SpectrumKind::Inverse => "inverse",
            SpectrumKind::Npsd => "npsd",
        }
    }
}

impl FromStr for SpectrumKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "eit" => Ok(SpectrumKind::Eit),
            "inverse" => Ok(SpectrumKind::Inverse),
            "npsd" => Ok(SpectrumKind::Npsd),
            _ => Err(format!(
                "unknown spectrum `{s}` (expected eit, inverse or npsd)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Lorentzian,
    Eit,
    Ringdown,
    G0Slope,
    Occupancy,
    Heating,
}

impl Pipeline {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pipeline::Lorentzian => "lorentzian",
            Pipeline::Eit => "eit",
            Pipeline::Ringdown => "ringdown",
            Pipeline::G0Slope => "g0slope",
            Pipeline::Occupancy => "occupancy",
            Pipeline::Heating => "heating",
        }
    }
}

impl FromStr for Pipeline {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "lorentzian" => Pipeline::Lorentzian,
            "eit" => Pipeline::Eit,
            "ringdown" => Pipeline::Ringdown,
            "g0slope" => Pipeline::G0Slope,
            "occupancy" => Pipeline::Occupancy,
            "heating" => Pipeline::Heating,
            _ => {
                return Err(format!(
                    "unknown pipeline `{s}` (expected lorentzian, eit, ringdown, g0slope, occupancy or heating)"
                ))
            }
        })
    }
}

/// Probe grid as offsets from the even supermode, in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("grid `{s}` must be start,stop,points"));
        };
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| format!("`{v}` is not a number"))
        };
        let grid = Grid {
            start: num(a)?,
            stop: num(b)?,
            points: n
                .parse()
                .map_err(|_| format!("`{n}` is not a point count"))?,
        };
        if !(grid.stop > grid.start)
            || grid.points < 2
            || !grid.start.is_finite()
            || !grid.stop.is_finite()
        {
            return Err(format!(
                "grid `{s}` needs start < stop and at least 2 points"
            ));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub degenerate: bool,
    /// Short human-readable summary for the terminal.
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.degenerate {
            2
        } else {
            0
        }
    }
}

/// `--out`, then the environment, then `fallback`.
pub fn resolve_out_dir(flag: Option<PathBuf>, fallback: impl Into<PathBuf>) -> PathBuf {
    flag.or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    })
    .unwrap_or_else(|| fallback.into())
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = fs::metadata(dir).map_err(|e| Error::io(dir, e))?;
    if meta.permissions().readonly() {
        return Err(Error::Config(format!(
            "output directory {} is read-only",
            dir.display()
        )));
    }
    Ok(())
}

pub fn cmd_spectrum(
    cfg: &ExperimentConfig,
    kind: SpectrumKind,
    grid: Option<Grid>,
    out: &Path,
) -> Result<Outcome> {
    cfg.validate()?;
    ensure_writable(out)?;
    let cav = cfg.cavity();
    let mech = cfg.mech();
    let grid = grid.unwrap_or(Grid {
        start: -cfg.eit.probe_span_hz / 2.0,
        stop: cfg.eit.probe_span_hz / 2.0,
        points: cfg.eit.probe_points,
    });
    let f_plus = ordinary(cav.omega_plus());
    let freqs = linspace(f_plus + grid.start, f_plus + grid.stop, grid.points);
    let (coupling, n_d) = cfg.drive_coupling()?;
    let detuning = cfg.drive_detuning();
    let mut trace: SpectrumTrace = match kind {
        SpectrumKind::Eit | SpectrumKind::Inverse => {
            let kernel = cfg.jitter_kernel();
            let jitter = (kernel.fwhm > 0.0).then_some((&kernel, cfg.jitter.nodes));
            let t = eit_trace_jittered(&freqs, &cav, &mech, coupling, detuning, jitter)?;
            if kind == SpectrumKind::Inverse {
                inverse_response(&t)?
            } else {
                t
            }
        }
        SpectrumKind::Npsd => {
            npsd_trace(&freqs, &cav, &mech, coupling, cav.omega_plus() - detuning)?
        }
    };
    trace.meta.n_d = n_d;
    let mut file = TraceFile::from_spectrum(&trace);
    file.set_f64("coupling_hz", ordinary(coupling));
    let path = out.join(format!("spectrum_{}.tsv", kind.as_str()));
    file.write(&path)?;
    Ok(Outcome {
        summary: format!(
            "{} spectrum, {} points, G/2π = {} Hz",
            kind.as_str(),
            grid.points,
            ordinary(coupling)
        ),
        written: vec![path],
        degenerate: false,
    })
}

pub fn cmd_synth(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    ensure_writable(out)?;
    let ds = generate(cfg)?;
    let written = ds.write(out)?;
    Ok(Outcome {
        summary: format!("{} files, seed {}", written.len(), cfg.seed),
        written,
        degenerate: false,
    })
}

pub fn cmd_design(file: &Path, out: &Path) -> Result<Outcome> {
    let design = DesignFile::load(file)?;
    let report = design.evaluate()?;
    ensure_writable(out)?;
    let path = out.join("design.txt");
    let text = report.to_text();
    write_atomic(&path, text.as_bytes())?;
    Ok(Outcome {
        summary: text,
        written: vec![path],
        degenerate: false,
    })
}

/// Configuration for fitting `dir`: explicit, else the dataset manifest,
/// else the preset.
pub fn fit_config(dir: &Path, explicit: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
    if let Some(c) = explicit {
        return Ok(c);
    }
    let m = dir.join(MANIFEST);
    if m.exists() {
        let manifest = Manifest::load(&m)?;
        manifest.config.validate()?;
        return Ok(manifest.config);
    }
    Ok(ExperimentConfig::preset())
}

/// Trace files in `dir/sub` whose names start with `prefix`, sorted by name.
fn list_traces(dir: &Path, sub: &str, prefix: &str) -> Vec<PathBuf> {
    let Ok(entries) = fs::read_dir(dir.join(sub)) else {
        return Vec::new();
    };
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "tsv")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with(prefix))
        })
        .collect();
    out.sort();
    out
}

fn require(paths: Vec<PathBuf>, pattern: PathBuf) -> Result<Vec<PathBuf>> {
    if paths.is_empty() {
        return Err(Error::MissingInputs(vec![pattern]));
    }
    Ok(paths)
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trace")
        .to_string()
}

fn severity(c: Convergence) -> u8 {
    match c {
        Convergence::Converged => 0,
        Convergence::MaxIter => 1,
        Convergence::Degenerate => 2,
    }
}

/// Combine per-trace reports, prefixing parameter and stage names.
fn merge(pipeline: &str, parts: Vec<(String, FitReport)>) -> FitReport {
    let mut out = FitReport::new(pipeline);
    let mut sq = 0.0;
    let mut diagnoses = Vec::new();
    for (name, r) in parts {
        for (p, v) in r.params {
            out.params.insert(format!("{name}.{p}"), v);
        }
        for mut st in r.stage_log {
            st.name = format!("{name}.{}", st.name);
            out.stage_log.push(st);
        }
        if severity(r.convergence) > severity(out.convergence) {
            out.convergence = r.convergence;
        }
        if let Some(d) = r.diagnosis {
            diagnoses.push(format!("{name}: {d}"));
        }
        sq += r.residual_norm * r.residual_norm;
    }
    out.residual_norm = sq.sqrt();
    if !diagnoses.is_empty() {
        out.diagnosis = Some(diagnoses.join("; "));
    }
    out
}

struct FitOutput {
    report: FitReport,
    overlays: Vec<(String, TraceFile)>,
}

pub fn cmd_fit(
    dir: &Path,
    pipeline: Pipeline,
    cfg: Option<ExperimentConfig>,
    out: &Path,
) -> Result<Outcome> {
    if !dir.is_dir() {
        return Err(Error::MissingInputs(vec![dir.to_path_buf()]));
    }
    let cfg = fit_config(dir, cfg)?;
    let result = match pipeline {
        Pipeline::Lorentzian => fit_lorentzian_dir(dir)?,
        Pipeline::Eit => fit_eit_dir(dir, &cfg)?,
        Pipeline::Ringdown => fit_ringdown_dir(dir)?,
        Pipeline::G0Slope => fit_g0_dir(dir, &cfg)?,
        Pipeline::Occupancy => fit_occupancy_dir(dir, &cfg)?,
        Pipeline::Heating => fit_heating_dir(dir)?,
    };
    ensure_writable(out)?;
    let mut written = Vec::new();
    let report_path = out.join(format!("fit_{}.txt", pipeline.as_str()));
    write_atomic(&report_path, result.report.to_text().as_bytes())?;
    written.push(report_path);
    for (name, f) in &result.overlays {
        let p = out.join(format!("overlay_{}_{name}.tsv", pipeline.as_str()));
        f.write(&p)?;
        written.push(p);
    }
    let summary = result
        .report
        .params
        .iter()
        .map(|(k, p)| format!("{k} = {} ± {} {}", p.value, p.stderr, p.unit.as_str()))
        .chain(
            result
                .report
                .diagnosis
                .clone()
                .map(|d| format!("diagnosis: {d}")),
        )
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Outcome {
        written,
        degenerate: result.report.is_degenerate(),
        summary,
    })
}

fn fit_lorentzian_dir(dir: &Path) -> Result<FitOutput> {
    let files = require(list_traces(dir, "cavity", ""), dir.join("cavity/*.tsv"))?;
    let mut parts = Vec::new();
    let mut overlays = Vec::new();
    for p in files {
        let trace = TraceFile::read(&p)?.to_spectrum()?;
        let r = fit_lorentzian(&trace)?;
        let (f0, k, ke) = (
            r.value("omega_0").unwrap_or_default(),
            r.value("kappa").unwrap_or_default(),
            r.value("kappa_e").unwrap_or_default(),
        );
        let model: Vec<f64> = trace
            .freqs
            .iter()
            .map(|&f| lorentzian_magnitude(f, f0, k, ke))
            .collect();
        overlays.push((
            stem(&p),
            TraceFile::overlay(&trace.freqs, &trace.values, &model, "Hz"),
        ));
        parts.push((stem(&p), r));
    }
    Ok(FitOutput {
        report: merge("lorentzian", parts),
        overlays,
    })
}

fn eit_options(cfg: &ExperimentConfig) -> Result<EitPipelineOptions> {
    let mut opts = EitPipelineOptions::new(cfg.mech().omega_m);
    opts.window_half_hz = cfg.fit.window_half_hz;
    opts.resonance_tolerance_hz = cfg.fit.resonance_tolerance_hz;
    opts.jitter_shape = cfg.jitter.shape.into();
    opts.quad_nodes = cfg.jitter.nodes;
    opts.prior = match (cfg.fit.prior_coupling_hz, cfg.fit.prior_gamma_i_hz) {
        (Some(g), Some(gi)) => Some(EitPrior {
            coupling: angular(g),
            gamma_i: angular(gi),
        }),
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "fit: prior_coupling_hz and prior_gamma_i_hz must be given together".into(),
            ))
        }
    };
    Ok(opts)
}

fn fit_eit_dir(dir: &Path, cfg: &ExperimentConfig) -> Result<FitOutput> {
    let files = require(list_traces(dir, "eit", ""), dir.join("eit/*.tsv"))?;
    let traces = files
        .iter()
        .map(|p| TraceFile::read(p)?.to_spectrum())
        .collect::<Result<Vec<_>>>()?;
    let fit = run_eit_pipeline(&traces, &eit_options(cfg)?)?;
    let mut overlays = Vec::new();
    if !fit.overlay.is_empty() {
        let (x, (d, m)): (Vec<f64>, (Vec<f64>, Vec<f64>)) =
            fit.overlay.iter().map(|&(x, d, m)| (x, (d, m))).unzip();
        overlays.push((
            stem(&files[fit.central]),
            TraceFile::overlay(&x, &d, &m, "Hz"),
        ));
    }
    Ok(FitOutput {
        report: fit.report,
        overlays,
    })
}

fn ringdown_overlay(trace: &crate::dynamics::RingdownTrace, r: &FitReport) -> Result<TraceFile> {
    let gamma = angular(r.value("gamma_m").unwrap_or_default());
    let a_mech = r.value("a_mech").unwrap_or_default().max(0.0);
    let kappa = angular(r.value("kappa_plus").unwrap_or(1.0)).max(f64::MIN_POSITIVE);
    let a_cav = r.value("a_cav").unwrap_or(0.0).max(0.0);
    let model = if gamma > 0.0 {
        trace
            .times
            .iter()
            .map(|&t| ringdown_signal(t, a_cav, kappa, a_mech, gamma))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![0.0; trace.len()]
    };
    Ok(TraceFile::overlay(&trace.times, &trace.power, &model, "s"))
}

fn fit_ringdown_dir(dir: &Path) -> Result<FitOutput> {
    let path = dir.join("ringdown/dark.tsv");
    if !path.exists() {
        return Err(Error::MissingInputs(vec![path]));
    }
    let trace = TraceFile::read(&path)?.to_ringdown()?;
    let report = fit_ringdown(&trace)?;
    let overlay = ringdown_overlay(&trace, &report)?;
    Ok(FitOutput {
        report,
        overlays: vec![("dark".into(), overlay)],
    })
}

fn fit_g0_dir(dir: &Path, cfg: &ExperimentConfig) -> Result<FitOutput> {
    let mut files = list_traces(dir, "ringdown", "dark");
    files.extend(list_traces(dir, "ringdown", "sweep_"));
    let files = require(files, dir.join("ringdown/sweep_*.tsv"))?;
    let mut points = Vec::new();
    let mut stages = Vec::new();
    for p in &files {
        let f = TraceFile::read(p)?;
        let n_d = f
            .get_f64("n_d")?
            .ok_or_else(|| Error::InvalidTrace(format!("{} lacks an n_d header", p.display())))?;
        let r = fit_ringdown(&f.to_ringdown()?)?;
        if r.is_degenerate() {
            return Ok(FitOutput {
                report: merge("g0slope", vec![(stem(p), r)]),
                overlays: Vec::new(),
            });
        }
        let (g, e) = (
            r.value("gamma_m").unwrap_or_default(),
            r.stderr("gamma_m").unwrap_or_default(),
        );
        let weight = if e > 0.0 && e.is_finite() {
            1.0 / (e * e)
        } else {
            1.0
        };
        points.push(DampingPoint {
            n_d,
            gamma_m: angular(g),
            weight,
        });
        stages.push(
            StageRecord::new(format!("ringdown {}", stem(p)))
                .output("n_d", n_d)
                .output("gamma_m", g)
                .output("gamma_m_sigma", e),
        );
    }
    let mut report = fit_g0_slope(&points, cfg.cavity().kappa_plus)?;
    stages.append(&mut report.stage_log);
    report.stage_log = stages;
    let mut overlays = Vec::new();
    if let (Some(g0), Some(gi)) = (report.value("g0_pm"), report.value("gamma_i_intercept")) {
        let slope = 4.0 * g0 * g0 / cfg.device.kappa_plus_hz;
        let x: Vec<f64> = points.iter().map(|p| p.n_d).collect();
        let d: Vec<f64> = points.iter().map(|p| ordinary(p.gamma_m)).collect();
        let m: Vec<f64> = x.iter().map(|n| gi + slope * n).collect();
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let pick = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        overlays.push((
            "sweep".into(),
            TraceFile::overlay(&pick(&x), &pick(&d), &pick(&m), "photons"),
        ));
    }
    Ok(FitOutput { report, overlays })
}

fn fit_occupancy_dir(dir: &Path, cfg: &ExperimentConfig) -> Result<FitOutput> {
    let files = require(list_traces(dir, "npsd", ""), dir.join("npsd/*.tsv"))?;
    let cav = cfg.cavity();
    let mech = cfg.mech();
    let mut parts = Vec::new();
    let mut overlays = Vec::new();
    for p in files {
        let f = TraceFile::read(&p)?;
        let trace = f.to_spectrum()?;
        let n_d = trace
            .meta
            .n_d
            .ok_or_else(|| Error::InvalidTrace(format!("{} lacks an n_d header", p.display())))?;
        let gain = trace.meta.gain_db.unwrap_or(cfg.npsd.gain_db);
        let detuning = trace.meta.drive_detuning_hz.map_or(mech.omega_m, angular);
        let omega_d = cav.omega_plus() - detuning;
        let g = cfg.g0_pm() * n_d.sqrt();
        let gamma_em = backaction_rate(g, cav.kappa_plus)?;
        let quanta = to_quanta(&trace, gain, &cav)?;
        let sub = subtract_background(&quanta, &cav, &mech, g, omega_d)?;
        let area = sub.area();
        let frac = captured_fraction(&trace.freqs, &cav, &mech, g, omega_d)?;
        let n_m = occupancy_from_area(area, gamma_em, &cav)? / frac;
        let df = (trace.freqs[trace.len() - 1] - trace.freqs[0]) / (trace.len() - 1) as f64;
        let area_sigma = noise_sigma(&sub.values) * df * (trace.len() as f64).sqrt();
        let n_sigma = area_sigma / (cav.kappa_e_plus / cav.kappa_plus * gamma_em) / frac;
        let mut r = FitReport::new("occupancy");
        r.set("n_m", n_m, n_sigma, ParamUnit::Dimensionless);
        r.set("gamma_em", ordinary(gamma_em), 0.0, ParamUnit::Hz);
        r.stage_log.push(
            StageRecord::new("calibration")
                .input(format!("n_d = {n_d}"))
                .output("area", area)
                .output("captured_fraction", frac)
                .output("gain_db", gain),
        );
        // model spectrum at the bath occupancy reproducing n_m
        let occ = |nb: f64| {
            occupancy_steady(
                &cav,
                &MechMode {
                    n_bath_m: nb,
                    ..mech
                },
                g,
            )
        };
        let (b, a) = (occ(0.0)?, occ(1.0)?);
        let nb = if a > b {
            ((n_m - b) / (a - b)).max(0.0)
        } else {
            0.0
        };
        let model = npsd_trace(
            &trace.freqs,
            &cav,
            &MechMode {
                n_bath_m: nb,
                ..mech
            },
            g,
            omega_d,
        )?;
        overlays.push((
            stem(&p),
            TraceFile::overlay(&quanta.freqs, &quanta.values, &model.values, "Hz"),
        ));
        parts.push((stem(&p), r));
    }
    Ok(FitOutput {
        report: merge("occupancy", parts),
        overlays,
    })
}

fn fit_heating_dir(dir: &Path) -> Result<FitOutput> {
    let path = dir.join("heating/pulse.tsv");
    if !path.exists() {
        return Err(Error::MissingInputs(vec![path]));
    }
    let (t, n) = TraceFile::read(&path)?.to_heating()?;
    let report = fit_heating(&t, &n)?;
    let v = |k: &str| report.value(k).unwrap_or_default();
    let gamma = angular(v("gamma"));
    let gamma_s = angular(v("gamma_s"));
    let curve = HeatingCurve {
        n_initial: v("n_initial"),
        n_hot: v("n_hot"),
        gamma,
        slow_amplitude: v("n_delta") * (gamma_s - gamma),
        gamma_s,
    };
    let model: Vec<f64> = t.iter().map(|&x| curve.eval(x)).collect();
    Ok(FitOutput {
        report,
        overlays: vec![("pulse".into(), TraceFile::overlay(&t, &n, &model, "s"))],
    })
}
