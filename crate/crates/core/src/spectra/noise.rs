//! Output noise spectrum, steady-state occupancy and back-action rates.
//!
//! The noise model keeps only the even-mode/mechanics cross terms and is
//! valid for red-sideband pumping of the even supermode in the
//! sideband-resolved regime. Frequencies `omega` are measured in the frame
//! rotating at the drive frequency.

use num_complex::Complex64;

use super::trace::{SpectrumTrace, TraceKind, TraceMeta};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::model::{angular, chi_electrical, chi_mechanical, ordinary, CavityPair, MechMode};

/// The three contributions to the detected noise spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NpsdTerms {
    /// Coherent (vacuum input) background.
    pub coherent: f64,
    /// Noise entering from the even-mode electrical bath.
    pub electrical: f64,
    /// Noise entering from the mechanical bath.
    pub mechanical: f64,
}

impl NpsdTerms {
    pub fn total(&self) -> f64 {
        self.coherent + self.electrical + self.mechanical
    }
}

pub fn npsd_terms(
    omega: f64,
    cav: &CavityPair,
    mech: &MechMode,
    coupling: f64,
    delta_drive: f64,
) -> Result<NpsdTerms> {
    ensure_non_negative("coupling", coupling)?;
    let chi_r = chi_electrical(omega, cav.kappa_plus, delta_drive)?.value;
    let chi_m = chi_mechanical(omega, mech.gamma_i, mech.omega_m)?.value;
    let g2 = coupling * coupling;
    let dressing = Complex64::new(1.0, 0.0) + g2 * chi_m * chi_r;
    let d2 = dressing.norm_sqr();
    if d2 == 0.0 {
        return Err(Error::Singular(
            "dressed response denominator vanishes".into(),
        ));
    }
    let kappa_e = cav.kappa_e_plus;
    let kappa_i = cav.kappa_i_plus();
    let coherent = (1.0 - kappa_e * chi_r / dressing).norm_sqr();
    let electrical = (cav.n_bath_plus + 1.0) * kappa_e * kappa_i * chi_r.norm_sqr() / d2;
    let mechanical =
        (mech.n_bath_m + 1.0) * kappa_e * mech.gamma_i * g2 * chi_m.norm_sqr() * chi_r.norm_sqr()
            / d2;
    let terms = NpsdTerms {
        coherent,
        electrical,
        mechanical,
    };
    if !terms.total().is_finite() {
        return Err(Error::Singular(format!(
            "non-finite noise spectrum at omega = {omega}"
        )));
    }
    Ok(terms)
}

/// Detected noise spectrum `S_II(omega)` in units of the vacuum floor.
pub fn npsd_sii(
    omega: f64,
    cav: &CavityPair,
    mech: &MechMode,
    coupling: f64,
    delta_drive: f64,
) -> Result<f64> {
    npsd_terms(omega, cav, mech, coupling, delta_drive).map(|t| t.total())
}

/// Noise spectrum on absolute output frequencies (Hz) for a drive at
/// `omega_d`.
pub fn npsd_trace(
    freqs_hz: &[f64],
    cav: &CavityPair,
    mech: &MechMode,
    coupling: f64,
    omega_d: f64,
) -> Result<SpectrumTrace> {
    cav.validate()?;
    mech.validate()?;
    let delta = cav.omega_plus() - omega_d;
    let values = freqs_hz
        .iter()
        .map(|&f| npsd_sii(angular(f) - omega_d, cav, mech, coupling, delta))
        .collect::<Result<Vec<_>>>()?;
    let meta = TraceMeta {
        drive_detuning_hz: Some(ordinary(delta)),
        ..TraceMeta::default()
    };
    Ok(SpectrumTrace::new(freqs_hz.to_vec(), values, TraceKind::Npsd)?.with_meta(meta))
}

/// Steady-state phonon occupancy under red-sideband pumping:
///
/// `n_m = n_bm (γi/κ)(4G² + κ²)/(4G² + κγi) + n_r 4G²/(4G² + κγi)`
pub fn occupancy_steady(cav: &CavityPair, mech: &MechMode, coupling: f64) -> Result<f64> {
    ensure_positive("kappa_plus", cav.kappa_plus)?;
    ensure_non_negative("coupling", coupling)?;
    let k = cav.kappa_plus;
    let g = mech.gamma_i;
    let g4 = 4.0 * coupling * coupling;
    let den = g4 + k * g;
    if den == 0.0 {
        // no damping and no coupling: the mode keeps its bath occupancy
        return Ok(mech.n_bath_m);
    }
    Ok(mech.n_bath_m * (g / k) * (g4 + k * k) / den + cav.n_bath_plus * g4 / den)
}

/// Back-action damping rate `γ_em = 4G²/κ`.
pub fn backaction_rate(coupling: f64, kappa_plus: f64) -> Result<f64> {
    ensure_positive("kappa_plus", kappa_plus)?;
    Ok(4.0 * coupling * coupling / kappa_plus)
}

/// Cooperativity `C = 4G²/(κ γi)`.
pub fn cooperativity(coupling: f64, kappa_plus: f64, gamma_i: f64) -> Result<f64> {
    ensure_positive("gamma_i", gamma_i)?;
    Ok(backaction_rate(coupling, kappa_plus)? / gamma_i)
}
