//! Physical domain types, bare susceptibilities, the supermode transform and
//! drive-power calibration.
//!
//! Internally every frequency and rate is angular (rad/s). Conversion to and
//! from ordinary frequency happens at the I/O boundary via [`angular`] and
//! [`ordinary`].
//!
//! The printed design values for the supermodes (10.9975 / 10.5625 GHz) do not
//! follow from `omega_r0 ± J` with `omega_r0/2π = 10.77 GHz` and
//! `2J/2π = 415 MHz`, which give 10.9775 / 10.5625 GHz. The functions here
//! implement `omega_r0 ± J` exactly.

pub mod constants;
mod types;

pub use types::{
    angular, bose_occupancy, ordinary, CavityPair, ComplexResponse, DriveConfig, MechMode,
    ResponseUnit,
};

use num_complex::Complex64;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use constants::{DEFAULT_GAMMA_FLOOR, HBAR};

/// Even and odd supermode frequencies `(omega_r0 + J, omega_r0 - J)`.
pub fn supermode_frequencies(omega_r0: f64, coupling_j: f64) -> Result<(f64, f64)> {
    ensure_positive("omega_r0", omega_r0)?;
    ensure_non_negative("coupling_j", coupling_j)?;
    Ok((omega_r0 + coupling_j, omega_r0 - coupling_j))
}

/// Bare electrical susceptibility `1 / (kappa/2 + i(Delta - omega))`, in seconds.
pub fn chi_electrical(omega: f64, kappa: f64, delta: f64) -> Result<ComplexResponse> {
    ensure_non_negative("kappa", kappa)?;
    let inv = Complex64::new(kappa / 2.0, delta - omega);
    if inv == Complex64::new(0.0, 0.0) {
        return Err(Error::Singular(format!(
            "electrical susceptibility with kappa = 0 at omega = Delta = {omega}"
        )));
    }
    Ok(ComplexResponse::new(inv.inv(), ResponseUnit::Seconds))
}

/// Bare mechanical susceptibility `1 / (gamma_i/2 + i(omega_m - omega))`, in seconds.
///
/// A zero `gamma_i` is replaced by [`DEFAULT_GAMMA_FLOOR`] and the result is
/// flagged; see [`chi_mechanical_with_floor`].
pub fn chi_mechanical(omega: f64, gamma_i: f64, omega_m: f64) -> Result<ComplexResponse> {
    chi_mechanical_with_floor(omega, gamma_i, omega_m, DEFAULT_GAMMA_FLOOR)
}

pub fn chi_mechanical_with_floor(
    omega: f64,
    gamma_i: f64,
    omega_m: f64,
    gamma_floor: f64,
) -> Result<ComplexResponse> {
    ensure_non_negative("gamma_i", gamma_i)?;
    ensure_non_negative("gamma_floor", gamma_floor)?;
    let floored = gamma_i == 0.0;
    let gamma = if floored { gamma_floor } else { gamma_i };
    let inv = Complex64::new(gamma / 2.0, omega_m - omega);
    if inv == Complex64::new(0.0, 0.0) {
        return Err(Error::Singular(format!(
            "mechanical susceptibility with zero damping at omega = omega_m = {omega}"
        )));
    }
    Ok(ComplexResponse {
        value: inv.inv(),
        unit: ResponseUnit::Seconds,
        floored,
    })
}

/// Intracavity photon number of the odd supermode for a given drive.
///
/// `n_d = (P_d / ħω_d) · 4κ_e,− / (κ_−² + 4Δ_−²)` with
/// `P_d = 1 mW · 10^((A + P_in)/10)` and `A` the (negative) line attenuation.
pub fn intracavity_photons(drive: &DriveConfig, cav: &CavityPair) -> Result<f64> {
    if !drive.power_in_dbm.is_finite() || !drive.attenuation_db.is_finite() {
        return Err(Error::param(
            "power_in_dbm",
            "drive power and attenuation must be finite",
        ));
    }
    photons_from_input_power(
        drive.cavity_input_power(),
        drive.omega_d,
        drive.delta_minus(cav),
        cav,
    )
}

/// Same relation as [`intracavity_photons`] starting from the power at the
/// device input in watts.
pub fn photons_from_input_power(
    power_w: f64,
    omega_d: f64,
    delta_minus: f64,
    cav: &CavityPair,
) -> Result<f64> {
    ensure_non_negative("power", power_w)?;
    ensure_positive("omega_d", omega_d)?;
    ensure_positive("kappa_minus", cav.kappa_minus)?;
    let flux = power_w / (HBAR * omega_d);
    let lorentz = 4.0 * cav.kappa_e_minus / (cav.kappa_minus.powi(2) + 4.0 * delta_minus.powi(2));
    Ok(flux * lorentz)
}

/// Enhanced coupling `G = g0_pm · sqrt(n_d)`.
pub fn enhanced_coupling(g0_pm: f64, n_d: f64) -> Result<f64> {
    ensure_non_negative("n_d", n_d)?;
    Ok(g0_pm * n_d.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn cav() -> CavityPair {
        CavityPair {
            omega_r0: angular(10.7859e9),
            coupling_j: angular(207.1e6),
            kappa_plus: angular(230e3),
            kappa_minus: angular(8.9e6),
            kappa_e_plus: angular(85e3),
            kappa_e_minus: angular(8.9e6),
            n_bath_plus: 0.0,
        }
    }

    #[test]
    fn supermodes_split_by_two_j() {
        let (p, m) = supermode_frequencies(angular(10.77e9), angular(207.5e6)).unwrap();
        assert!((ordinary(p) - 10.9775e9).abs() < 1e-3);
        assert!((ordinary(m) - 10.5625e9).abs() < 1e-3);
        assert!((ordinary(p - m) - 415e6).abs() < 1e-3);
        let (p, m) = supermode_frequencies(5.0, 0.0).unwrap();
        assert_eq!(p, m);
        assert!(supermode_frequencies(0.0, 1.0).is_err());
        assert!(supermode_frequencies(-1.0, 1.0).is_err());
    }

    #[test]
    fn electrical_susceptibility_peak_and_half_width() {
        let kappa = angular(230e3);
        let chi = chi_electrical(3.0, kappa, 3.0).unwrap();
        assert_eq!(chi.im(), 0.0);
        assert!((chi.re() - 2.0 / kappa).abs() < 1e-20);
        assert!((chi.re() - 1.384e-6).abs() < 1e-9);
        let half = chi_electrical(kappa / 2.0, kappa, 0.0).unwrap();
        assert!((half.norm_sqr() / chi.norm_sqr() - 0.5).abs() < 1e-12);
        assert!(matches!(
            chi_electrical(1.0, 0.0, 1.0),
            Err(Error::Singular(_))
        ));
        assert!(chi_electrical(1.0, 0.0, 2.0).is_ok());
    }

    #[test]
    fn mechanical_susceptibility() {
        let g = angular(68.0);
        let chi = chi_mechanical(1e9, g, 1e9).unwrap();
        assert!((chi.norm() - 4.68e-3).abs() < 0.01e-3);
        assert!(!chi.floored);
        // far detuned: -i / (omega_m - omega)
        let d = 1e6;
        let far = chi_mechanical(1e9 - d, g, 1e9).unwrap();
        let expect = Complex64::new(0.0, -1.0 / d);
        assert!((far.value - expect).norm() / expect.norm() < 1e-3);
        // zero damping is floored, not rejected
        let fl = chi_mechanical(1e9, 0.0, 1e9).unwrap();
        assert!(fl.floored);
        assert!((fl.re() - 2.0 / DEFAULT_GAMMA_FLOOR).abs() < 1e-3);
        assert!(matches!(
            chi_mechanical_with_floor(1.0, 0.0, 1.0, 0.0),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn photon_number_calibration() {
        let c = cav();
        let omega_d = angular(10.5683e9);
        let n = photons_from_input_power(0.62e-15, omega_d, angular(10.5e6), &c).unwrap();
        assert!((n - 1.0).abs() < 0.1, "n_d = {n}");
        assert_eq!(
            photons_from_input_power(0.0, omega_d, angular(10.5e6), &c).unwrap(),
            0.0
        );
        let n2 = photons_from_input_power(1.24e-15, omega_d, angular(10.5e6), &c).unwrap();
        assert_eq!(n2, 2.0 * n);
        let mut bad = c;
        bad.kappa_minus = 0.0;
        assert!(photons_from_input_power(1e-15, omega_d, 0.0, &bad).is_err());
    }

    #[test]
    fn drive_config_uses_attenuation_sign() {
        let c = cav();
        let mech = MechMode {
            omega_m: angular(424.7e6),
            gamma_i: angular(68.0),
            n_bath_m: 0.0,
        };
        let d = DriveConfig::red_sideband(&c, &mech, 6.0, -76.0, angular(17.3));
        assert!((d.cavity_input_power() - 1e-10).abs() < 1e-22);
        assert!((ordinary(d.delta_minus(&c)) - 10.5e6).abs() < 1.0);
        assert!((d.delta_plus(&c) - mech.omega_m).abs() < 1e-3);
        let n = d.photon_number(&c).unwrap();
        assert!(n > 1.0e5 && n < 2.0e5);
        let g = d.coupling(&c).unwrap();
        assert!((g - angular(17.3) * n.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn enhanced_coupling_values() {
        let g = enhanced_coupling(angular(17.3), 2.25e5).unwrap();
        assert!((ordinary(g) - 8206.0).abs() < 5.0);
        assert!((ordinary(g) - 8.4e3).abs() / 8.4e3 < 0.05);
        let g = enhanced_coupling(angular(17.3), 4.3e5).unwrap();
        assert!((ordinary(g) - 11.34e3).abs() < 10.0);
        assert_eq!(enhanced_coupling(1.0, 0.0).unwrap(), 0.0);
        assert!(enhanced_coupling(1.0, -1.0).is_err());
    }

    #[test]
    fn bose_occupancy_limits() {
        assert_eq!(bose_occupancy(1e9, 0.0), 0.0);
        let n = bose_occupancy(TAU * 424.7e6, 0.5);
        assert!(n > 23.0 && n < 25.0, "{n}");
    }

    #[test]
    fn cavity_validation() {
        assert!(cav().validate().is_ok());
        let mut c = cav();
        c.kappa_e_plus = 2.0 * c.kappa_plus;
        assert!(c.validate().is_err());
        let mut c = cav();
        c.coupling_j = -1.0;
        assert!(c.validate().is_err());
        assert!(cav().omega_plus() > cav().omega_minus());
    }
}
