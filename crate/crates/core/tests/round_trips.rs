//! Each fit pipeline applied to noiseless data from its own forward model.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use emx_core::dynamics::{heating_closed_form, ringdown_trace, HeatingParams, RingdownTrace};
use emx_core::estimation::{
    fit_heating, fit_lorentzian, fit_ringdown, lorentzian_magnitude, FitReport,
};
use emx_core::io::commands::{cmd_fit, cmd_synth, Pipeline};
use emx_core::io::synth::Manifest;
use emx_core::io::ExperimentConfig;
use emx_core::model::angular;
use emx_core::spectra::{linspace, SpectrumTrace, TraceKind};

const TRIALS: usize = 500;

fn noiseless() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset();
    cfg.eit.noise = 0.0;
    cfg.eit.kappa_scatter = 0.0;
    cfg.ringdown.snr = 1e12;
    cfg.heating.noise = 0.0;
    cfg.npsd.noise = 0.0;
    cfg
}

fn run(cfg: &ExperimentConfig, pipeline: Pipeline) -> (FitReport, String, BTreeMap<String, f64>) {
    let dir = tempfile::tempdir().unwrap();
    cmd_synth(cfg, dir.path()).unwrap();
    let out = dir.path().join("fits");
    let outcome = cmd_fit(dir.path(), pipeline, None, &out).unwrap();
    assert!(!outcome.degenerate, "{}", outcome.summary);
    let text = std::fs::read_to_string(out.join(format!("fit_{}.txt", pipeline.as_str()))).unwrap();
    let truth = Manifest::load(&dir.path().join("manifest.toml"))
        .unwrap()
        .truth;
    (FitReport::from_text(&text).unwrap(), text, truth)
}

fn check(report: &FitReport, truth: &BTreeMap<String, f64>, pairs: &[(&str, &str)], tol: f64) {
    for (param, key) in pairs {
        let v = report.value(param).unwrap_or_else(|| panic!("no {param}"));
        let t = truth[*key];
        assert!(((v - t) / t).abs() < tol, "{param}: {v} vs {t}");
    }
}

#[test]
fn lorentzian() {
    let (r, _, t) = run(&noiseless(), Pipeline::Lorentzian);
    check(
        &r,
        &t,
        &[
            ("bare.omega_0", "cavity.omega_0_hz"),
            ("bare.kappa", "cavity.kappa_hz"),
            ("bare.kappa_e", "cavity.kappa_e_hz"),
        ],
        1e-6,
    );
}

#[test]
fn ringdown_and_slope() {
    let cfg = noiseless();
    let (r, _, t) = run(&cfg, Pipeline::Ringdown);
    check(&r, &t, &[("gamma_m", "ringdown.dark.gamma_m_hz")], 1e-6);
    let (r, _, t) = run(&cfg, Pipeline::G0Slope);
    check(
        &r,
        &t,
        &[
            ("g0_pm", "ringdown.g0_pm_hz"),
            ("gamma_i_intercept", "ringdown.gamma_i_hz"),
        ],
        1e-6,
    );
}

#[test]
fn heating() {
    let (r, _, t) = run(&noiseless(), Pipeline::Heating);
    check(
        &r,
        &t,
        &[
            ("n_initial", "heating.n_initial"),
            ("n_hot", "heating.n_hot"),
            ("gamma", "heating.gamma_hz"),
            ("gamma_s", "heating.gamma_s_hz"),
            ("n_delta", "heating.n_delta"),
        ],
        1e-6,
    );
}

#[test]
fn occupancy() {
    let (r, _, t) = run(&noiseless(), Pipeline::Occupancy);
    check(
        &r,
        &t,
        &[
            ("npsd_00.n_m", "npsd.npsd_00.n_m"),
            ("npsd_01.n_m", "npsd.npsd_01.n_m"),
        ],
        1e-6,
    );
}

#[test]
fn eit() {
    let (r, _, t) = run(&noiseless(), Pipeline::Eit);
    check(
        &r,
        &t,
        &[
            ("kappa_plus", "eit.kappa_plus_hz"),
            ("kappa_e_plus", "eit.kappa_e_plus_hz"),
            ("coupling_g", "eit.coupling_hz"),
            ("gamma_i", "eit.gamma_i_hz"),
            ("jitter_fwhm", "eit.jitter_fwhm_hz"),
            ("cooperativity", "eit.cooperativity"),
        ],
        1e-6,
    );
}

#[test]
fn pipelines_are_deterministic() {
    let cfg = ExperimentConfig::preset();
    for p in [Pipeline::Eit, Pipeline::Heating] {
        let (_, a, _) = run(&cfg, p);
        let (_, b, _) = run(&cfg, p);
        assert_eq!(a, b);
    }
}

#[test]
fn lorentzian_within_two_percent_at_one_percent_noise() {
    let (f0, kappa, kappa_e) = (10.993e9, 230e3, 85e3);
    let freqs = linspace(f0 - 1e6, f0 + 1e6, 801);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..TRIALS {
        let values = freqs
            .iter()
            .map(|&f| lorentzian_magnitude(f, f0, kappa, kappa_e) + noise.sample(&mut rng))
            .collect();
        let r = fit_lorentzian(
            &SpectrumTrace::new(freqs.clone(), values, TraceKind::Reflection).unwrap(),
        )
        .unwrap();
        assert!((r.value("kappa").unwrap() / kappa - 1.0).abs() < 0.02);
        assert!((r.value("kappa_e").unwrap() / kappa_e - 1.0).abs() < 0.02);
    }
}

#[test]
fn dark_ringdown_within_one_percent_at_snr_100() {
    let gamma = angular(68.0);
    let times = linspace(0.0, 5.0 / gamma, 2000);
    let clean = ringdown_trace(&times, 20.0, angular(230e3), 1.0, gamma).unwrap();
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let power = clean
            .power
            .iter()
            .map(|p| p + noise.sample(&mut rng))
            .collect();
        let r = fit_ringdown(&RingdownTrace::new(times.clone(), power).unwrap()).unwrap();
        assert!((r.value("gamma_m").unwrap() / 68.0 - 1.0).abs() < 0.01);
    }
}

#[test]
fn heating_errors_cover_the_truth() {
    let p = HeatingParams {
        gamma_i: angular(68.0),
        gamma_em: angular(370.0),
        gamma_p: angular(100.0),
        n_bath_m: 2.0,
        n_p: 46.8,
        delta_b: 0.5,
        gamma_s: angular(50.0),
    };
    let times = linspace(0.0, 0.02, 400);
    let clean: Vec<f64> = times
        .iter()
        .map(|&t| heating_closed_form(t, &p).unwrap())
        .collect();
    let truth = [
        ("n_initial", p.n_bath_m),
        ("n_hot", p.n_hot()),
        ("gamma", p.gamma_total() / std::f64::consts::TAU),
        ("n_delta", p.n_delta()),
        ("gamma_s", 50.0),
    ];
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut hits = [0usize; 5];
    for _ in 0..TRIALS {
        let occ: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let r = fit_heating(&times, &occ).unwrap();
        for (h, (name, t)) in hits.iter_mut().zip(truth) {
            let f = r.get(name).unwrap();
            *h += usize::from((f.value - t).abs() <= 3.0 * f.stderr);
        }
    }
    for (h, (name, _)) in hits.iter().zip(truth) {
        assert!(*h as f64 >= 0.98 * TRIALS as f64, "{name}: {h} of {TRIALS}");
    }
}
