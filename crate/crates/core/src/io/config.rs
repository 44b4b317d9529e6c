//! Experiment configuration. Every physical value is given in the unit named
//! by its key suffix (`_hz`, `_db`, `_dbm`, `_s`); missing keys take the
//! values of the reference device.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::read_text;
use crate::error::{Error, Result};
use crate::model::{angular, CavityPair, DriveConfig, MechMode};
use crate::spectra::{JitterKernel, JitterShape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub device: DeviceSection,
    pub drive: DriveSection,
    pub eit: EitSection,
    pub jitter: JitterSection,
    pub ringdown: RingdownSection,
    pub heating: HeatingSection,
    pub npsd: NpsdSection,
    pub fit: FitSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceSection {
    pub omega_r0_hz: f64,
    pub coupling_j_hz: f64,
    pub kappa_plus_hz: f64,
    pub kappa_e_plus_hz: f64,
    pub kappa_minus_hz: f64,
    pub kappa_e_minus_hz: f64,
    pub n_bath_plus: f64,
    pub omega_m_hz: f64,
    pub gamma_i_hz: f64,
    pub n_bath_m: f64,
    /// Cross-mode single-photon coupling.
    pub g0_pm_hz: f64,
}

impl Default for DeviceSection {
    fn default() -> Self {
        DeviceSection {
            omega_r0_hz: 10.7859e9,
            coupling_j_hz: 207.1e6,
            kappa_plus_hz: 230e3,
            kappa_e_plus_hz: 85.3e3,
            kappa_minus_hz: 8.9e6,
            kappa_e_minus_hz: 8.9e6,
            n_bath_plus: 0.0,
            omega_m_hz: 424.7e6,
            gamma_i_hz: 68.0,
            n_bath_m: 1.5,
            g0_pm_hz: 17.3,
        }
    }
}

/// Pump tone used by `spectrum`. The coupling comes from `n_d` when given,
/// otherwise from `power_in_dbm`, otherwise from `eit.coupling_hz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    pub attenuation_db: f64,
    pub power_in_dbm: Option<f64>,
    pub n_d: Option<f64>,
    /// Detuning below the even supermode; defaults to the mechanical frequency.
    pub detuning_hz: Option<f64>,
}

impl Default for DriveSection {
    fn default() -> Self {
        DriveSection {
            attenuation_db: -76.0,
            power_in_dbm: None,
            n_d: None,
            detuning_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EitSection {
    pub coupling_hz: f64,
    pub gamma_i_hz: f64,
    /// Drive detunings relative to the mechanical frequency, one trace each.
    pub drive_offsets_hz: Vec<f64>,
    pub probe_span_hz: f64,
    pub probe_points: usize,
    /// Relative trace-to-trace spread of the cavity linewidth away from
    /// two-photon resonance.
    pub kappa_scatter: f64,
    /// Gaussian noise on `|S11|`.
    pub noise: f64,
}

impl Default for EitSection {
    fn default() -> Self {
        EitSection {
            coupling_hz: 8.4e3,
            gamma_i_hz: 91.0,
            drive_offsets_hz: vec![-1.5e6, -1.0e6, -0.6e6, 0.0, 0.6e6, 1.0e6, 1.5e6],
            probe_span_hz: 800e3,
            probe_points: 4001,
            kappa_scatter: 0.02,
            noise: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    #[default]
    Gaussian,
    Lorentzian,
}

impl From<ShapeName> for JitterShape {
    fn from(s: ShapeName) -> Self {
        match s {
            ShapeName::Gaussian => JitterShape::Gaussian,
            ShapeName::Lorentzian => JitterShape::Lorentzian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JitterSection {
    pub shape: ShapeName,
    pub fwhm_hz: f64,
    pub nodes: usize,
}

impl Default for JitterSection {
    fn default() -> Self {
        JitterSection {
            shape: ShapeName::Gaussian,
            fwhm_hz: 1.98e3,
            nodes: 61,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingdownSection {
    /// Drive photon numbers of the sweep; 0 is the dark ringdown.
    pub photon_numbers: Vec<f64>,
    /// Initial cavity-leak amplitude relative to the mechanical amplitude.
    pub a_cav: f64,
    pub points: usize,
    /// Initial mechanical amplitude over the noise standard deviation.
    pub snr: f64,
    /// Record length in units of the mechanical decay time.
    pub decay_constants: f64,
}

impl Default for RingdownSection {
    fn default() -> Self {
        RingdownSection {
            photon_numbers: vec![0.0, 2e4, 5e4, 1e5, 1.42e5],
            a_cav: 20.0,
            points: 2000,
            snr: 100.0,
            decay_constants: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatingSection {
    pub gamma_em_hz: f64,
    pub gamma_p_hz: f64,
    pub n_p: f64,
    pub delta_b: f64,
    pub gamma_s_hz: f64,
    pub duration_s: f64,
    pub points: usize,
    pub noise: f64,
}

impl Default for HeatingSection {
    fn default() -> Self {
        HeatingSection {
            gamma_em_hz: 370.0,
            gamma_p_hz: 100.0,
            n_p: 46.8,
            delta_b: 0.5,
            gamma_s_hz: 50.0,
            duration_s: 0.02,
            points: 400,
            noise: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NpsdUnitName {
    #[default]
    Quanta,
    Watts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NpsdSection {
    pub photon_numbers: Vec<f64>,
    /// Mechanical bath occupancy while the pump is on.
    pub bath_occupancy: f64,
    pub span_hz: f64,
    pub points: usize,
    /// Gaussian noise per bin, in quanta.
    pub noise: f64,
    pub gain_db: f64,
    pub units: NpsdUnitName,
}

impl Default for NpsdSection {
    fn default() -> Self {
        NpsdSection {
            photon_numbers: vec![7.1e4, 4.3e5],
            bath_occupancy: 8.9,
            span_hz: 100e3,
            points: 10001,
            noise: 0.002,
            gain_db: 57.6,
            units: NpsdUnitName::Quanta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub prior_coupling_hz: Option<f64>,
    pub prior_gamma_i_hz: Option<f64>,
    pub window_half_hz: f64,
    pub resonance_tolerance_hz: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            prior_coupling_hz: None,
            prior_gamma_i_hz: None,
            window_half_hz: 40e3,
            resonance_tolerance_hz: 5e3,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            device: DeviceSection::default(),
            drive: DriveSection::default(),
            eit: EitSection::default(),
            jitter: JitterSection::default(),
            ringdown: RingdownSection::default(),
            heating: HeatingSection::default(),
            npsd: NpsdSection::default(),
            fit: FitSection::default(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn field_err(field: &str, err: Error) -> Error {
    Error::Config(format!("{field}: {err}"))
}

fn check_finite_positive(field: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Config(format!("{field}: must be > 0, got {v}")));
    }
    Ok(())
}

fn check_non_negative(field: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Config(format!("{field}: must be >= 0, got {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// The reference device used when no config file is given.
    pub fn preset() -> Self {
        Self::default()
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.cavity()
            .validate()
            .map_err(|e| field_err("device", e))?;
        self.mech().validate().map_err(|e| field_err("device", e))?;
        check_non_negative("device.g0_pm_hz", self.device.g0_pm_hz)?;
        if let Some(n) = self.drive.n_d {
            check_non_negative("drive.n_d", n)?;
        }
        if let Some(d) = self.drive.detuning_hz {
            check_non_negative("drive.detuning_hz", d)?;
        }
        let e = &self.eit;
        check_non_negative("eit.coupling_hz", e.coupling_hz)?;
        check_finite_positive("eit.gamma_i_hz", e.gamma_i_hz)?;
        check_finite_positive("eit.probe_span_hz", e.probe_span_hz)?;
        check_non_negative("eit.kappa_scatter", e.kappa_scatter)?;
        check_non_negative("eit.noise", e.noise)?;
        if e.probe_points < 16 {
            return Err(Error::Config("eit.probe_points: need at least 16".into()));
        }
        if e.drive_offsets_hz.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(
                "eit.drive_offsets_hz: values must be finite".into(),
            ));
        }
        check_non_negative("jitter.fwhm_hz", self.jitter.fwhm_hz)?;
        if self.jitter.nodes == 0 {
            return Err(Error::Config("jitter.nodes: must be at least 1".into()));
        }
        let r = &self.ringdown;
        if r.photon_numbers
            .iter()
            .any(|n| !(n.is_finite() && *n >= 0.0))
        {
            return Err(Error::Config(
                "ringdown.photon_numbers: values must be >= 0".into(),
            ));
        }
        check_non_negative("ringdown.a_cav", r.a_cav)?;
        check_finite_positive("ringdown.snr", r.snr)?;
        check_finite_positive("ringdown.decay_constants", r.decay_constants)?;
        if r.points < 16 {
            return Err(Error::Config("ringdown.points: need at least 16".into()));
        }
        let h = &self.heating;
        check_non_negative("heating.gamma_em_hz", h.gamma_em_hz)?;
        check_non_negative("heating.gamma_p_hz", h.gamma_p_hz)?;
        check_non_negative("heating.n_p", h.n_p)?;
        check_finite_positive("heating.gamma_s_hz", h.gamma_s_hz)?;
        check_finite_positive("heating.duration_s", h.duration_s)?;
        check_non_negative("heating.noise", h.noise)?;
        if !h.delta_b.is_finite() {
            return Err(Error::Config("heating.delta_b: must be finite".into()));
        }
        if h.points < 8 {
            return Err(Error::Config("heating.points: need at least 8".into()));
        }
        let n = &self.npsd;
        if n.photon_numbers
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::Config(
                "npsd.photon_numbers: values must be >= 0".into(),
            ));
        }
        check_non_negative("npsd.bath_occupancy", n.bath_occupancy)?;
        check_finite_positive("npsd.span_hz", n.span_hz)?;
        check_non_negative("npsd.noise", n.noise)?;
        if !n.gain_db.is_finite() {
            return Err(Error::Config("npsd.gain_db: must be finite".into()));
        }
        if n.points < 16 {
            return Err(Error::Config("npsd.points: need at least 16".into()));
        }
        check_finite_positive("fit.window_half_hz", self.fit.window_half_hz)?;
        check_finite_positive(
            "fit.resonance_tolerance_hz",
            self.fit.resonance_tolerance_hz,
        )?;
        for (name, v) in [
            ("fit.prior_coupling_hz", self.fit.prior_coupling_hz),
            ("fit.prior_gamma_i_hz", self.fit.prior_gamma_i_hz),
        ] {
            if let Some(v) = v {
                check_finite_positive(name, v)?;
            }
        }
        Ok(())
    }

    pub fn cavity(&self) -> CavityPair {
        let d = &self.device;
        CavityPair {
            omega_r0: angular(d.omega_r0_hz),
            coupling_j: angular(d.coupling_j_hz),
            kappa_plus: angular(d.kappa_plus_hz),
            kappa_minus: angular(d.kappa_minus_hz),
            kappa_e_plus: angular(d.kappa_e_plus_hz),
            kappa_e_minus: angular(d.kappa_e_minus_hz),
            n_bath_plus: d.n_bath_plus,
        }
    }

    pub fn mech(&self) -> MechMode {
        MechMode {
            omega_m: angular(self.device.omega_m_hz),
            gamma_i: angular(self.device.gamma_i_hz),
            n_bath_m: self.device.n_bath_m,
        }
    }

    pub fn g0_pm(&self) -> f64 {
        angular(self.device.g0_pm_hz)
    }

    /// `Δ_{r+,d}` of the configured pump (rad/s).
    pub fn drive_detuning(&self) -> f64 {
        angular(self.drive.detuning_hz.unwrap_or(self.device.omega_m_hz))
    }

    /// Enhanced coupling of the configured pump (rad/s) and its photon
    /// number when known.
    pub fn drive_coupling(&self) -> Result<(f64, Option<f64>)> {
        if let Some(n) = self.drive.n_d {
            return Ok((self.g0_pm() * n.sqrt(), Some(n)));
        }
        if let Some(p) = self.drive.power_in_dbm {
            let cav = self.cavity();
            let drive = DriveConfig {
                power_in_dbm: p,
                attenuation_db: self.drive.attenuation_db,
                omega_d: cav.omega_plus() - self.drive_detuning(),
                g0_pm: self.g0_pm(),
            };
            let n = drive.photon_number(&cav)?;
            return Ok((drive.coupling(&cav)?, Some(n)));
        }
        Ok((angular(self.eit.coupling_hz), None))
    }

    pub fn jitter_kernel(&self) -> JitterKernel {
        JitterKernel {
            shape: self.jitter.shape.into(),
            fwhm: self.jitter.fwhm_hz,
        }
    }
}
