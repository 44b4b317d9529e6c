use crate::error::{ensure_positive, Error, Result};
use crate::model::constants::HBAR;
use crate::model::{CavityPair, MechMode};
use crate::spectra::{
    backaction_rate, npsd_trace, occupancy_steady, PsdUnits, SpectrumTrace, TraceKind,
};

/// Convert a detected spectrum to quanta using the amplifier chain gain.
pub fn to_quanta(trace: &SpectrumTrace, gain_db: f64, cav: &CavityPair) -> Result<SpectrumTrace> {
    let mut out = trace.clone();
    if trace.meta.psd_units == PsdUnits::WattsPerHz {
        let scale = 10f64.powf(gain_db / 10.0) * HBAR * cav.omega_plus();
        out.values.iter_mut().for_each(|v| *v /= scale);
        out.meta.psd_units = PsdUnits::Quanta;
    }
    Ok(out)
}

/// Remove the part of the spectrum that does not scale with the mechanical
/// bath: the model spectrum at zero bath occupancy.
pub fn subtract_background(
    trace: &SpectrumTrace,
    cav: &CavityPair,
    mech: &MechMode,
    coupling: f64,
    omega_d: f64,
) -> Result<SpectrumTrace> {
    let cold = MechMode {
        n_bath_m: 0.0,
        ..*mech
    };
    let bg = npsd_trace(&trace.freqs, cav, &cold, coupling, omega_d)?;
    let mut out = trace.clone();
    out.values
        .iter_mut()
        .zip(&bg.values)
        .for_each(|(v, b)| *v -= b);
    Ok(out)
}

/// Occupancy equivalent to a background-subtracted peak area (Hz·quanta):
/// `n_m = area / ((κe/κ)·γem)`, with anti-Stokes detection so the area is
/// proportional to `n_m` rather than `n_m + 1`.
pub fn occupancy_from_area(area_hz: f64, gamma_em: f64, cav: &CavityPair) -> Result<f64> {
    ensure_positive("gamma_em", gamma_em)?;
    ensure_positive("kappa_plus", cav.kappa_plus)?;
    ensure_positive("kappa_e_plus", cav.kappa_e_plus)?;
    if area_hz < 0.0 {
        log::warn!(
            "background-subtracted area {area_hz:.3e} is negative; reporting zero occupancy"
        );
        return Ok(0.0);
    }
    Ok(area_hz / (cav.kappa_e_plus / cav.kappa_plus * gamma_em))
}

/// Share of the full mechanical sideband area that falls inside the sampled
/// band, according to the noise model. Dividing an area-based occupancy by
/// it removes the bias from truncated line tails.
pub fn captured_fraction(
    freqs_hz: &[f64],
    cav: &CavityPair,
    mech: &MechMode,
    coupling: f64,
    omega_d: f64,
) -> Result<f64> {
    let at = |n_bath_m: f64| MechMode { n_bath_m, ..*mech };
    let hot = npsd_trace(freqs_hz, cav, &at(1.0), coupling, omega_d)?;
    let cold = npsd_trace(freqs_hz, cav, &at(0.0), coupling, omega_d)?;
    let mut signal = hot.clone();
    signal
        .values
        .iter_mut()
        .zip(&cold.values)
        .for_each(|(h, c)| *h -= c);
    let gamma_em = backaction_rate(coupling, cav.kappa_plus)?;
    let slope =
        occupancy_steady(cav, &at(1.0), coupling)? - occupancy_steady(cav, &at(0.0), coupling)?;
    ensure_positive("occupancy slope", slope)?;
    let frac = occupancy_from_area(signal.area(), gamma_em, cav)? / slope;
    ensure_positive("captured fraction", frac)?;
    Ok(frac)
}

/// Phonon occupancy from the area under a background-subtracted noise
/// spectrum. Traces in W/Hz are referred to the device with `gain_db`;
/// traces already in quanta ignore it.
pub fn calibrate_occupancy(
    trace: &SpectrumTrace,
    gain_db: f64,
    gamma_em: f64,
    cav: &CavityPair,
) -> Result<f64> {
    trace.validate()?;
    if trace.kind != TraceKind::Npsd {
        return Err(Error::InvalidTrace(format!(
            "occupancy calibration needs a noise spectrum, got {}",
            trace.kind.as_str()
        )));
    }
    let quanta = to_quanta(trace, gain_db, cav)?;
    occupancy_from_area(quanta.area(), gamma_em, cav)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::angular;
    use crate::spectra::linspace;

    fn cav() -> CavityPair {
        CavityPair {
            omega_r0: angular(10.7859e9),
            coupling_j: angular(207.1e6),
            kappa_plus: angular(230e3),
            kappa_minus: angular(8.9e6),
            kappa_e_plus: angular(85.3e3),
            kappa_e_minus: angular(8.9e6),
            n_bath_plus: 0.0,
        }
    }

    #[test]
    fn linear_in_area() {
        let c = cav();
        let g = angular(1e3);
        let a = occupancy_from_area(2.0, g, &c).unwrap();
        let b = occupancy_from_area(6.0, g, &c).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12 * b);
        assert_eq!(occupancy_from_area(0.0, g, &c).unwrap(), 0.0);
        assert_eq!(occupancy_from_area(-1.0, g, &c).unwrap(), 0.0);
        assert!(occupancy_from_area(1.0, 0.0, &c).is_err());
    }

    #[test]
    fn round_trip_through_noise_model() {
        let c = cav();
        let m = MechMode {
            omega_m: angular(424.7e6),
            gamma_i: angular(68.0),
            n_bath_m: 1.5,
        };
        let g = angular(17.3) * (7.1e4f64).sqrt();
        let omega_d = c.omega_plus() - m.omega_m;
        let fc = (omega_d + m.omega_m) / (2.0 * std::f64::consts::PI);
        let f = linspace(fc - 20e3, fc + 20e3, 8001);
        let raw = npsd_trace(&f, &c, &m, g, omega_d).unwrap();
        let sub = subtract_background(&raw, &c, &m, g, omega_d).unwrap();
        let em = backaction_rate(g, c.kappa_plus).unwrap();
        let n = calibrate_occupancy(&sub, 0.0, em, &c).unwrap();
        let expect = occupancy_steady(&c, &m, g).unwrap();
        assert!(((n - expect) / expect).abs() < 0.05, "{n} vs {expect}");
    }

    #[test]
    fn narrow_window_is_corrected() {
        let c = cav();
        let m = MechMode {
            omega_m: angular(424.7e6),
            gamma_i: angular(68.0),
            n_bath_m: 8.9,
        };
        let g = angular(17.3) * (4.3e5f64).sqrt();
        let omega_d = c.omega_plus() - m.omega_m;
        let fc = (omega_d + m.omega_m) / (2.0 * std::f64::consts::PI);
        let f = linspace(fc - 10e3, fc + 10e3, 4001);
        let raw = npsd_trace(&f, &c, &m, g, omega_d).unwrap();
        let sub = subtract_background(&raw, &c, &m, g, omega_d).unwrap();
        let em = backaction_rate(g, c.kappa_plus).unwrap();
        let naive = calibrate_occupancy(&sub, 0.0, em, &c).unwrap();
        let frac = captured_fraction(&f, &c, &m, g, omega_d).unwrap();
        let expect = occupancy_steady(&c, &m, g).unwrap();
        assert!(frac < 0.95);
        assert!((naive / expect - 1.0).abs() > 0.05);
        assert!(
            (naive / frac / expect - 1.0).abs() < 1e-9,
            "{} vs {expect}",
            naive / frac
        );
    }

    #[test]
    fn watts_per_hz_conversion() {
        let c = cav();
        let f = linspace(0.0, 10.0, 11);
        let mut t = SpectrumTrace::new(f, vec![1.0; 11], TraceKind::Npsd).unwrap();
        t.meta.psd_units = PsdUnits::WattsPerHz;
        let q = to_quanta(&t, 57.6, &c).unwrap();
        let expect = 1.0 / (10f64.powf(5.76) * HBAR * c.omega_plus());
        assert!((q.values[0] - expect).abs() < 1e-9 * expect);
    }
}
