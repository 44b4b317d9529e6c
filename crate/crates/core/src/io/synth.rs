//! Synthetic datasets drawn from the forward models with seeded noise.
//!
//! Layout of a dataset directory:
//!
//! ```text
//! manifest.toml            config used plus ground truth
//! cavity/bare.tsv          reflection without pump
//! eit/trace_XX.tsv         reflection for each drive detuning
//! ringdown/dark.tsv        ringdown without pump
//! ringdown/sweep_XX.tsv    ringdowns at increasing drive photon number
//! heating/pulse.tsv        occupancy after the pump turns on
//! npsd/npsd_XX.tsv         output noise spectra under the pump
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, NpsdUnitName};
use super::tracefile::TraceFile;
use super::{read_text, write_atomic};
use crate::dynamics::{heating_closed_form, ringdown_trace, HeatingParams};
use crate::error::{Error, Result};
use crate::model::constants::HBAR;
use crate::model::{angular, ordinary, MechMode};
use crate::spectra::{
    backaction_rate, eit_trace_jittered, linspace, npsd_trace, occupancy_steady, PsdUnits,
    TraceMeta,
};

pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config: ExperimentConfig,
    /// Ground-truth values keyed `group.name`, in the units of their suffix.
    pub truth: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| {
                text[..s.start.min(text.len())].matches('\n').count() + 1
            }),
            message: e.message().trim().to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    /// Relative path and contents of every trace.
    pub files: Vec<(PathBuf, TraceFile)>,
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Generator for trace `index` of family `tag`: independent of every other
/// trace, so adding traces leaves existing ones unchanged.
pub fn trace_rng(seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(tag));
    rng.set_stream(index);
    rng
}

fn add_noise(values: &mut [f64], sigma: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    if sigma == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(format!("noise level: {e}")))?;
    values.iter_mut().for_each(|v| *v += normal.sample(rng));
    Ok(())
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").sample(rng)
}

pub fn generate(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut truth = BTreeMap::new();
    let mut files = Vec::new();
    let seed = cfg.seed;
    let cav = cfg.cavity();
    let f_plus = ordinary(cav.omega_plus());
    let stamp = |mut f: TraceFile| {
        f.set("seed", seed.to_string());
        f
    };

    // reflection
    let e = &cfg.eit;
    let probe = linspace(
        f_plus - e.probe_span_hz / 2.0,
        f_plus + e.probe_span_hz / 2.0,
        e.probe_points,
    );
    let eit_mech = MechMode {
        gamma_i: angular(e.gamma_i_hz),
        ..cfg.mech()
    };
    let kernel = cfg.jitter_kernel();
    let jitter = (kernel.fwhm > 0.0).then_some((&kernel, cfg.jitter.nodes));
    let coupling = angular(e.coupling_hz);
    {
        let mut rng = trace_rng(seed, "cavity", 0);
        let mut t = eit_trace_jittered(&probe, &cav, &eit_mech, 0.0, eit_mech.omega_m, None)?;
        t.meta = TraceMeta::default();
        add_noise(&mut t.values, e.noise, &mut rng)?;
        files.push((
            PathBuf::from("cavity/bare.tsv"),
            stamp(TraceFile::from_spectrum(&t)),
        ));
        truth.insert("cavity.kappa_hz".into(), cfg.device.kappa_plus_hz);
        truth.insert("cavity.kappa_e_hz".into(), cfg.device.kappa_e_plus_hz);
        truth.insert("cavity.omega_0_hz".into(), f_plus);
    }
    for (i, &off) in e.drive_offsets_hz.iter().enumerate() {
        let mut rng = trace_rng(seed, "eit", i as u64);
        let scatter = if off.abs() <= cfg.fit.resonance_tolerance_hz {
            0.0
        } else {
            e.kappa_scatter * standard_normal(&mut rng)
        };
        let mut trace_cav = cav;
        trace_cav.kappa_plus = (cav.kappa_plus * (1.0 + scatter)).max(cav.kappa_e_plus);
        let detuning = angular(cfg.device.omega_m_hz + off);
        let mut t = eit_trace_jittered(&probe, &trace_cav, &eit_mech, coupling, detuning, jitter)?;
        add_noise(&mut t.values, e.noise, &mut rng)?;
        let name = format!("trace_{i:02}");
        truth.insert(
            format!("eit.{name}.kappa_plus_hz"),
            ordinary(trace_cav.kappa_plus),
        );
        files.push((
            PathBuf::from(format!("eit/{name}.tsv")),
            stamp(TraceFile::from_spectrum(&t)),
        ));
    }
    if !e.drive_offsets_hz.is_empty() {
        truth.insert("eit.kappa_plus_hz".into(), cfg.device.kappa_plus_hz);
        truth.insert("eit.kappa_e_plus_hz".into(), cfg.device.kappa_e_plus_hz);
        truth.insert("eit.coupling_hz".into(), e.coupling_hz);
        truth.insert("eit.gamma_i_hz".into(), e.gamma_i_hz);
        truth.insert("eit.jitter_fwhm_hz".into(), cfg.jitter.fwhm_hz);
        truth.insert(
            "eit.cooperativity".into(),
            4.0 * e.coupling_hz * e.coupling_hz / (cfg.device.kappa_plus_hz * e.gamma_i_hz),
        );
    }

    // ringdowns
    let r = &cfg.ringdown;
    let mech = cfg.mech();
    let mut sweep = 0usize;
    for (i, &n_d) in r.photon_numbers.iter().enumerate() {
        let g = cfg.g0_pm() * n_d.sqrt();
        let gamma_m = mech.gamma_i + backaction_rate(g, cav.kappa_plus)?;
        let times = linspace(0.0, r.decay_constants / gamma_m, r.points);
        let mut tr = ringdown_trace(&times, r.a_cav, cav.kappa_plus, 1.0, gamma_m)?;
        let mut rng = trace_rng(seed, "ringdown", i as u64);
        add_noise(&mut tr.power, 1.0 / r.snr, &mut rng)?;
        let name = if n_d == 0.0 {
            "dark".to_string()
        } else {
            sweep += 1;
            format!("sweep_{:02}", sweep - 1)
        };
        let mut f = TraceFile::from_ringdown(&tr);
        f.set_f64("n_d", n_d);
        truth.insert(format!("ringdown.{name}.gamma_m_hz"), ordinary(gamma_m));
        files.push((PathBuf::from(format!("ringdown/{name}.tsv")), stamp(f)));
    }
    if !r.photon_numbers.is_empty() {
        truth.insert("ringdown.g0_pm_hz".into(), cfg.device.g0_pm_hz);
        truth.insert("ringdown.gamma_i_hz".into(), cfg.device.gamma_i_hz);
    }

    // pump heating
    let h = &cfg.heating;
    let hp = HeatingParams {
        gamma_i: mech.gamma_i,
        gamma_em: angular(h.gamma_em_hz),
        gamma_p: angular(h.gamma_p_hz),
        n_bath_m: mech.n_bath_m,
        n_p: h.n_p,
        delta_b: h.delta_b,
        gamma_s: angular(h.gamma_s_hz),
    };
    let times = linspace(0.0, h.duration_s, h.points);
    let mut occ = times
        .iter()
        .map(|&t| heating_closed_form(t, &hp))
        .collect::<Result<Vec<_>>>()?;
    add_noise(&mut occ, h.noise, &mut trace_rng(seed, "heating", 0))?;
    files.push((
        PathBuf::from("heating/pulse.tsv"),
        stamp(TraceFile::from_heating(&times, &occ)),
    ));
    truth.insert("heating.n_initial".into(), hp.n_bath_m);
    truth.insert("heating.n_hot".into(), hp.n_hot());
    truth.insert("heating.gamma_hz".into(), ordinary(hp.gamma_total()));
    truth.insert("heating.n_delta".into(), hp.n_delta());
    truth.insert("heating.gamma_s_hz".into(), h.gamma_s_hz);

    // noise spectra
    let n = &cfg.npsd;
    let hot = MechMode {
        n_bath_m: n.bath_occupancy,
        ..mech
    };
    let omega_d = cav.omega_plus() - mech.omega_m;
    let center = ordinary(omega_d + mech.omega_m);
    let freqs = linspace(center - n.span_hz / 2.0, center + n.span_hz / 2.0, n.points);
    for (i, &n_d) in n.photon_numbers.iter().enumerate() {
        let g = cfg.g0_pm() * n_d.sqrt();
        let mut t = npsd_trace(&freqs, &cav, &hot, g, omega_d)?;
        add_noise(
            &mut t.values,
            n.noise,
            &mut trace_rng(seed, "npsd", i as u64),
        )?;
        t.meta.n_d = Some(n_d);
        t.meta.gain_db = Some(n.gain_db);
        if n.units == NpsdUnitName::Watts {
            let scale = 10f64.powf(n.gain_db / 10.0) * HBAR * cav.omega_plus();
            t.values.iter_mut().for_each(|v| *v *= scale);
            t.meta.psd_units = PsdUnits::WattsPerHz;
        }
        let name = format!("npsd_{i:02}");
        truth.insert(format!("npsd.{name}.n_m"), occupancy_steady(&cav, &hot, g)?);
        files.push((
            PathBuf::from(format!("npsd/{name}.tsv")),
            stamp(TraceFile::from_spectrum(&t)),
        ));
    }

    Ok(Dataset {
        manifest: Manifest {
            config: cfg.clone(),
            truth,
        },
        files,
    })
}

impl Dataset {
    /// Write every trace and the manifest below `dir`; returns the paths
    /// written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len() + 1);
        for (rel, f) in &self.files {
            let p = dir.join(rel);
            f.write(&p)?;
            written.push(p);
        }
        let m = dir.join(MANIFEST);
        write_atomic(&m, self.manifest.to_toml().as_bytes())?;
        written.push(m);
        Ok(written)
    }

    pub fn file(&self, rel: &str) -> Option<&TraceFile> {
        self.files
            .iter()
            .find(|(p, _)| p == Path::new(rel))
            .map(|(_, f)| f)
    }
}
