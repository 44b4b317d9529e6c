//! Frequentist check of the EIT pipeline uncertainties over many seeds.

use emx_core::estimation::FitReport;
use emx_core::io::commands::{cmd_fit, cmd_synth, Pipeline};
use emx_core::io::synth::Manifest;
use emx_core::io::ExperimentConfig;

const PARAMS: [(&str, &str); 5] = [
    ("kappa_plus", "eit.kappa_plus_hz"),
    ("kappa_e_plus", "eit.kappa_e_plus_hz"),
    ("coupling_g", "eit.coupling_hz"),
    ("gamma_i", "eit.gamma_i_hz"),
    ("jitter_fwhm", "eit.jitter_fwhm_hz"),
];

#[test]
fn reported_sigmas_cover_the_truth() {
    const SEEDS: u64 = 20;
    let mut within1 = [0usize; 5];
    let mut within2 = [0usize; 5];
    for seed in 1..=SEEDS {
        let cfg = ExperimentConfig {
            seed,
            ..ExperimentConfig::preset()
        };
        let dir = tempfile::tempdir().unwrap();
        cmd_synth(&cfg, dir.path()).unwrap();
        let out = dir.path().join("fits");
        let outcome = cmd_fit(dir.path(), Pipeline::Eit, None, &out).unwrap();
        assert!(!outcome.degenerate, "seed {seed}");
        let report =
            FitReport::from_text(&std::fs::read_to_string(out.join("fit_eit.txt")).unwrap())
                .unwrap();
        let truth = Manifest::load(&dir.path().join("manifest.toml"))
            .unwrap()
            .truth;
        for (i, (name, key)) in PARAMS.iter().enumerate() {
            let p = report.get(name).unwrap();
            assert!(p.stderr.is_finite() && p.stderr > 0.0, "seed {seed} {name}");
            let z = (p.value - truth[*key]).abs() / p.stderr;
            within1[i] += usize::from(z <= 1.0);
            within2[i] += usize::from(z <= 2.0);
        }
        let c = report.get("cooperativity").unwrap();
        if report.value("gamma_i") == Some(0.0) {
            assert!(c.value.is_infinite());
            assert!(report
                .diagnosis
                .as_deref()
                .unwrap_or("")
                .contains("bounded below"));
        } else {
            assert!(c.stderr.is_finite() && c.stderr > 0.0, "seed {seed}");
        }
    }
    for (i, (name, _)) in PARAMS.iter().enumerate() {
        let (c1, c2) = (
            within1[i] as f64 / SEEDS as f64,
            within2[i] as f64 / SEEDS as f64,
        );
        eprintln!("{name}: 1 sigma {c1:.2}, 2 sigma {c2:.2}");
        assert!(c1 >= 0.5, "{name}: 1 sigma coverage {c1}");
        assert!(c2 >= 0.75, "{name}: 2 sigma coverage {c2}");
    }
}
