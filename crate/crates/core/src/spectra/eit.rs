use num_complex::Complex64;

use super::jitter::JitterKernel;
use super::trace::{SpectrumTrace, TraceKind, TraceMeta};
use crate::error::{ensure_non_negative, Error, Result};
use crate::model::{angular, ordinary, CavityPair, ComplexResponse, MechMode, ResponseUnit};

/// Probe reflection near the even supermode in the presence of a red-detuned
/// drive.
///
/// `delta_probe` is `omega_p - omega_plus`, `delta_drive` is
/// `omega_plus - omega_d`, `coupling` is the enhanced coupling `G`:
///
/// `S11 = 1 - κe / (κ/2 + iδ + 2G² / (γi + 2i(δ - (ωm - Δ))))`
pub fn s11_eit(
    delta_probe: f64,
    cav: &CavityPair,
    mech: &MechMode,
    coupling: f64,
    delta_drive: f64,
) -> Result<ComplexResponse> {
    ensure_non_negative("coupling", coupling)?;
    let value = s11_value(
        delta_probe,
        cav.kappa_plus,
        cav.kappa_e_plus,
        mech.gamma_i,
        coupling,
        mech.omega_m - delta_drive,
    )?;
    Ok(ComplexResponse::new(value, ResponseUnit::Dimensionless))
}

/// Core of [`s11_eit`] in terms of the two-photon offset
/// `two_photon = omega_m - Delta` (the probe detuning at which the
/// mechanical feature sits).
pub(crate) fn s11_value(
    delta: f64,
    kappa: f64,
    kappa_e: f64,
    gamma_i: f64,
    coupling: f64,
    two_photon: f64,
) -> Result<Complex64> {
    let mech_den = Complex64::new(gamma_i, 2.0 * (delta - two_photon));
    let mech_term = if mech_den == Complex64::new(0.0, 0.0) {
        if coupling == 0.0 {
            return Err(Error::Singular(
                "zero mechanical damping and zero coupling at two-photon resonance".into(),
            ));
        }
        // infinite dressing: the cavity is fully transparent
        return Ok(Complex64::new(1.0, 0.0));
    } else {
        2.0 * coupling * coupling / mech_den
    };
    let den = Complex64::new(kappa / 2.0, delta) + mech_term;
    if den == Complex64::new(0.0, 0.0) {
        return Err(Error::Singular("reflection denominator vanishes".into()));
    }
    Ok(1.0 - kappa_e / den)
}

/// Time-averaged `S11` when the mechanical frequency wanders according to
/// `kernel`. The complex response is averaged over the kernel using `nodes`
/// quadrature points.
pub fn s11_eit_jittered(
    delta_probe: f64,
    cav: &CavityPair,
    mech: &MechMode,
    coupling: f64,
    delta_drive: f64,
    kernel: &JitterKernel,
    nodes: usize,
) -> Result<ComplexResponse> {
    let quad = kernel.quadrature(nodes);
    let value = jittered_value(
        delta_probe,
        cav.kappa_plus,
        cav.kappa_e_plus,
        mech.gamma_i,
        coupling,
        mech.omega_m - delta_drive,
        &quad,
    )?;
    Ok(ComplexResponse::new(value, ResponseUnit::Dimensionless))
}

pub(crate) fn jittered_value(
    delta: f64,
    kappa: f64,
    kappa_e: f64,
    gamma_i: f64,
    coupling: f64,
    two_photon: f64,
    quad: &[(f64, f64)],
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for &(offset, weight) in quad {
        acc += weight
            * s11_value(
                delta,
                kappa,
                kappa_e,
                gamma_i,
                coupling,
                two_photon + offset,
            )?;
    }
    Ok(acc)
}

/// `|S11|` evaluated on absolute probe frequencies (Hz).
pub fn eit_trace(
    probe_freqs_hz: &[f64],
    cav: &CavityPair,
    mech: &MechMode,
    coupling: f64,
    delta_drive: f64,
) -> Result<SpectrumTrace> {
    eit_trace_jittered(probe_freqs_hz, cav, mech, coupling, delta_drive, None)
}

/// As [`eit_trace`], optionally averaging over mechanical frequency jitter.
pub fn eit_trace_jittered(
    probe_freqs_hz: &[f64],
    cav: &CavityPair,
    mech: &MechMode,
    coupling: f64,
    delta_drive: f64,
    jitter: Option<(&JitterKernel, usize)>,
) -> Result<SpectrumTrace> {
    cav.validate()?;
    mech.validate()?;
    if !mech.is_sideband_resolved(cav) {
        log::warn!(
            "omega_m/2π = {:.3e} Hz does not exceed kappa_+/2π = {:.3e} Hz; reflection model is outside its regime",
            ordinary(mech.omega_m),
            ordinary(cav.kappa_plus)
        );
    }
    let quad = jitter.map(|(k, n)| k.quadrature(n));
    let values = probe_freqs_hz
        .iter()
        .map(|&f| {
            let delta = angular(f) - cav.omega_plus();
            let s = match &quad {
                Some(q) => jittered_value(
                    delta,
                    cav.kappa_plus,
                    cav.kappa_e_plus,
                    mech.gamma_i,
                    coupling,
                    mech.omega_m - delta_drive,
                    q,
                )?,
                None => s11_eit(delta, cav, mech, coupling, delta_drive)?.value,
            };
            Ok(s.norm())
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = TraceMeta {
        drive_detuning_hz: Some(ordinary(delta_drive)),
        ..TraceMeta::default()
    };
    Ok(SpectrumTrace::new(probe_freqs_hz.to_vec(), values, TraceKind::Reflection)?.with_meta(meta))
}
