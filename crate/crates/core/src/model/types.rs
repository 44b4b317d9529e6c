use std::f64::consts::TAU;

use num_complex::Complex64;

use super::constants::{HBAR, K_B};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

/// Angular frequency (rad/s) of an ordinary frequency in Hz.
#[inline]
pub fn angular(hz: f64) -> f64 {
    TAU * hz
}

/// Ordinary frequency (Hz) of an angular frequency in rad/s.
#[inline]
pub fn ordinary(rad_per_s: f64) -> f64 {
    rad_per_s / TAU
}

/// Bose-Einstein occupancy of a mode at angular frequency `omega` in a bath at `temperature` (K).
pub fn bose_occupancy(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (K_B * temperature)).exp_m1()
}

/// Electrical parameters of two identical, tunnel-coupled LC resonators.
///
/// All rates are angular (rad/s). The `plus`/`minus` rates refer to the even
/// (higher frequency) and odd (lower frequency) supermodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityPair {
    /// Bare frequency of each local LC mode.
    pub omega_r0: f64,
    /// Tunnel coupling between the local modes.
    pub coupling_j: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub kappa_e_plus: f64,
    pub kappa_e_minus: f64,
    /// Thermal occupancy of the bath seen by the even supermode.
    pub n_bath_plus: f64,
}

impl CavityPair {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("omega_r0", self.omega_r0)?;
        ensure_non_negative("coupling_j", self.coupling_j)?;
        ensure_non_negative("kappa_plus", self.kappa_plus)?;
        ensure_non_negative("kappa_minus", self.kappa_minus)?;
        ensure_non_negative("kappa_e_plus", self.kappa_e_plus)?;
        ensure_non_negative("kappa_e_minus", self.kappa_e_minus)?;
        ensure_non_negative("n_bath_plus", self.n_bath_plus)?;
        if self.kappa_e_plus > self.kappa_plus {
            return Err(Error::param(
                "kappa_e_plus",
                format!(
                    "external rate {} exceeds total rate {}",
                    self.kappa_e_plus, self.kappa_plus
                ),
            ));
        }
        if self.kappa_e_minus > self.kappa_minus {
            return Err(Error::param(
                "kappa_e_minus",
                format!(
                    "external rate {} exceeds total rate {}",
                    self.kappa_e_minus, self.kappa_minus
                ),
            ));
        }
        if self.coupling_j >= self.omega_r0 {
            return Err(Error::param(
                "coupling_j",
                "must be smaller than omega_r0 so the odd supermode stays positive",
            ));
        }
        Ok(())
    }

    /// Even supermode frequency `omega_r0 + J`.
    pub fn omega_plus(&self) -> f64 {
        self.omega_r0 + self.coupling_j
    }

    /// Odd supermode frequency `omega_r0 - J`.
    pub fn omega_minus(&self) -> f64 {
        self.omega_r0 - self.coupling_j
    }

    /// Internal loss rate of the even supermode.
    pub fn kappa_i_plus(&self) -> f64 {
        self.kappa_plus - self.kappa_e_plus
    }

    pub fn kappa_i_minus(&self) -> f64 {
        self.kappa_minus - self.kappa_e_minus
    }
}

/// The mechanical breathing mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechMode {
    pub omega_m: f64,
    /// Intrinsic energy decay rate.
    pub gamma_i: f64,
    /// Occupancy of the ambient phonon bath.
    pub n_bath_m: f64,
}

impl MechMode {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("omega_m", self.omega_m)?;
        ensure_non_negative("gamma_i", self.gamma_i)?;
        ensure_non_negative("n_bath_m", self.n_bath_m)
    }

    /// True when the mechanical frequency exceeds the even-mode linewidth.
    pub fn is_sideband_resolved(&self, cav: &CavityPair) -> bool {
        self.omega_m > cav.kappa_plus
    }

    /// Mechanical quality factor `omega_m / gamma_i`.
    pub fn quality_factor(&self) -> f64 {
        self.omega_m / self.gamma_i
    }

    /// 1/e energy lifetime in seconds.
    pub fn energy_lifetime(&self) -> f64 {
        1.0 / self.gamma_i
    }
}

/// Strong pump tone applied through the input line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveConfig {
    /// Generator power in dBm.
    pub power_in_dbm: f64,
    /// Input-line attenuation in dB, stored with a negative sign (e.g. -76).
    pub attenuation_db: f64,
    /// Drive angular frequency.
    pub omega_d: f64,
    /// Cross-mode single-photon coupling `g0/2` (rad/s).
    pub g0_pm: f64,
}

impl DriveConfig {
    /// A drive parked one mechanical frequency below the even supermode.
    pub fn red_sideband(
        cav: &CavityPair,
        mech: &MechMode,
        power_in_dbm: f64,
        attenuation_db: f64,
        g0_pm: f64,
    ) -> Self {
        DriveConfig {
            power_in_dbm,
            attenuation_db,
            omega_d: cav.omega_plus() - mech.omega_m,
            g0_pm,
        }
    }

    /// `omega_plus - omega_d`.
    pub fn delta_plus(&self, cav: &CavityPair) -> f64 {
        cav.omega_plus() - self.omega_d
    }

    /// `omega_minus - omega_d`.
    pub fn delta_minus(&self, cav: &CavityPair) -> f64 {
        cav.omega_minus() - self.omega_d
    }

    /// Power reaching the device input, in watts.
    pub fn cavity_input_power(&self) -> f64 {
        1e-3 * 10f64.powf((self.attenuation_db + self.power_in_dbm) / 10.0)
    }

    pub fn photon_number(&self, cav: &CavityPair) -> Result<f64> {
        super::intracavity_photons(self, cav)
    }

    /// Parametrically enhanced coupling `G = g0_pm * sqrt(n_d)`.
    pub fn coupling(&self, cav: &CavityPair) -> Result<f64> {
        super::enhanced_coupling(self.g0_pm, self.photon_number(cav)?)
    }
}

/// Unit carried by a [`ComplexResponse`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseUnit {
    Dimensionless,
    Seconds,
}

/// A complex response value tagged with its unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexResponse {
    pub value: Complex64,
    pub unit: ResponseUnit,
    /// Set when a zero damping rate was replaced by the configured floor.
    pub floored: bool,
}

impl ComplexResponse {
    pub(crate) fn new(value: Complex64, unit: ResponseUnit) -> Self {
        ComplexResponse {
            value,
            unit,
            floored: false,
        }
    }

    pub fn re(&self) -> f64 {
        self.value.re
    }

    pub fn im(&self) -> f64 {
        self.value.im
    }

    pub fn norm(&self) -> f64 {
        self.value.norm()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.value.norm_sqr()
    }
}
