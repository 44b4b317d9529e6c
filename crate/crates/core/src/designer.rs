//! Circuit design helpers: planar-spiral inductance, stray capacitance from
//! the self-resonance, participation ratio, zero-point motion and the
//! vacuum coupling rate from circuit quantities.

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::model::constants::{HBAR, MU_0};

/// Square planar spiral; lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoilGeometry {
    pub wire_width: f64,
    pub pitch: f64,
    pub turns: f64,
    /// Side of the outer square.
    pub outer_dim: f64,
    pub thickness: f64,
}

impl CoilGeometry {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("wire_width", self.wire_width)?;
        ensure_positive("pitch", self.pitch)?;
        ensure_positive("turns", self.turns)?;
        ensure_positive("outer_dim", self.outer_dim)?;
        ensure_positive("thickness", self.thickness)?;
        if self.wire_width > self.pitch {
            return Err(Error::param(
                "wire_width",
                format!(
                    "wire width {} exceeds the pitch {}",
                    self.wire_width, self.pitch
                ),
            ));
        }
        if self.inner_dim() <= 0.0 {
            return Err(Error::param(
                "turns",
                format!(
                    "{} turns at pitch {} do not fit in an outer dimension of {}",
                    self.turns, self.pitch, self.outer_dim
                ),
            ));
        }
        Ok(())
    }

    /// `d_in = d_out − 2·n·pitch`.
    pub fn inner_dim(&self) -> f64 {
        self.outer_dim - 2.0 * self.turns * self.pitch
    }

    pub fn mean_dim(&self) -> f64 {
        (self.outer_dim + self.inner_dim()) / 2.0
    }

    /// `ρ = (d_out − d_in)/(d_out + d_in)`.
    pub fn fill_ratio(&self) -> f64 {
        let d_in = self.inner_dim();
        (self.outer_dim - d_in) / (self.outer_dim + d_in)
    }
}

/// Layout coefficients of the modified Wheeler expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelerCoefficients {
    pub k1: f64,
    pub k2: f64,
}

impl WheelerCoefficients {
    pub const SQUARE: WheelerCoefficients = WheelerCoefficients { k1: 2.34, k2: 2.75 };
}

impl Default for WheelerCoefficients {
    fn default() -> Self {
        Self::SQUARE
    }
}

/// `L = K1·μ0·n²·d_avg/(1 + K2·ρ)` with square-spiral coefficients.
pub fn wheeler_inductance(geom: &CoilGeometry) -> Result<f64> {
    wheeler_inductance_with(geom, WheelerCoefficients::SQUARE)
}

pub fn wheeler_inductance_with(geom: &CoilGeometry, coeffs: WheelerCoefficients) -> Result<f64> {
    geom.validate()?;
    ensure_positive("k1", coeffs.k1)?;
    ensure_non_negative("k2", coeffs.k2)?;
    let n = geom.turns;
    Ok(coeffs.k1 * MU_0 * n * n * geom.mean_dim() / (1.0 + coeffs.k2 * geom.fill_ratio()))
}

/// Capacitance resonating with `inductance` at `omega_srf`: `1/(L ω²)`.
pub fn stray_capacitance_from_srf(inductance: f64, omega_srf: f64) -> Result<f64> {
    ensure_positive("inductance", inductance)?;
    ensure_positive("omega_srf", omega_srf)?;
    Ok(1.0 / (inductance * omega_srf * omega_srf))
}

/// LC resonance `1/sqrt(L C)`.
pub fn lc_frequency(inductance: f64, capacitance: f64) -> Result<f64> {
    ensure_positive("inductance", inductance)?;
    ensure_positive("capacitance", capacitance)?;
    Ok(1.0 / (inductance * capacitance).sqrt())
}

/// Motional and stray capacitance (F).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitorBudget {
    pub motional: f64,
    pub stray: f64,
}

impl CapacitorBudget {
    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("motional", self.motional)?;
        ensure_non_negative("stray", self.stray)
    }

    pub fn total(&self) -> f64 {
        self.motional + self.stray
    }
}

/// `η = C_m/(C_s + C_m)`.
pub fn participation_ratio(budget: &CapacitorBudget) -> Result<f64> {
    budget.validate()?;
    let total = budget.total();
    if total <= 0.0 {
        return Err(Error::param("total", "total capacitance must be positive"));
    }
    Ok(budget.motional / total)
}

/// `x_zpf = sqrt(ħ/(2 m ω))` in metres.
pub fn zero_point_motion(m_eff: f64, omega_m: f64) -> Result<f64> {
    ensure_positive("m_eff", m_eff)?;
    ensure_positive("omega_m", omega_m)?;
    Ok((HBAR / (2.0 * m_eff * omega_m)).sqrt())
}

/// `g0 = −η·x_zpf·(ω_r0/(2C_m))·∂C_m/∂u` (rad/s, sign kept).
pub fn g0_from_circuit(
    eta: f64,
    x_zpf: f64,
    omega_r0: f64,
    c_motional: f64,
    dc_du: f64,
) -> Result<f64> {
    ensure_positive("c_motional", c_motional)?;
    ensure_non_negative("x_zpf", x_zpf)?;
    Ok(-eta * x_zpf * omega_r0 / (2.0 * c_motional) * dc_du)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{angular, ordinary};

    fn reference_coil() -> CoilGeometry {
        CoilGeometry {
            wire_width: 500e-9,
            pitch: 1e-6,
            turns: 35.0,
            outer_dim: 74e-6,
            thickness: 120e-9,
        }
    }

    #[test]
    fn reference_coil_inductance() {
        let l = wheeler_inductance(&reference_coil()).unwrap();
        assert!(((l - 41.8e-9) / 41.8e-9).abs() < 0.10, "L = {l}");
    }

    #[test]
    fn inductance_scaling() {
        let mut g = reference_coil();
        g.turns = 0.0;
        assert!(wheeler_inductance(&g).is_err());
        g.turns = 1e-6;
        assert!(wheeler_inductance(&g).unwrap() < 1e-18);
        // n² at fixed d_avg and ρ
        let l = |n: f64| MU_0 * 2.34 * n * n * 50e-6 / (1.0 + 2.75 * 0.3);
        assert!((l(20.0) / l(10.0) - 4.0).abs() < 1e-12);
        // larger footprint at fixed turns
        let mut prev = 0.0;
        for k in 0..20 {
            let mut g = reference_coil();
            g.outer_dim = 74e-6 + k as f64 * 5e-6;
            let v = wheeler_inductance(&g).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn geometry_that_does_not_fit() {
        let mut g = reference_coil();
        g.turns = 37.0;
        assert!(g.validate().is_err());
        let mut g = reference_coil();
        g.wire_width = 2e-6;
        assert!(g.validate().is_err());
    }

    #[test]
    fn stray_capacitance_and_frequency() {
        let c = stray_capacitance_from_srf(41.8e-9, angular(13.98e9)).unwrap();
        assert!(((c - 3.1e-15) / 3.1e-15).abs() < 0.02);
        let c2 = stray_capacitance_from_srf(41.8e-9, angular(2.0 * 13.98e9)).unwrap();
        assert!((c / c2 - 4.0).abs() < 1e-12);
        let w = lc_frequency(41.8e-9, c + 2.1e-15).unwrap();
        assert!(((ordinary(w) - 10.77e9) / 10.77e9).abs() < 0.01);
        // self-inverse
        let w0 = lc_frequency(41.8e-9, 3.1e-15).unwrap();
        let back = stray_capacitance_from_srf(41.8e-9, w0).unwrap();
        assert!(((back - 3.1e-15) / 3.1e-15).abs() < 1e-12);
    }

    #[test]
    fn participation() {
        let eta = participation_ratio(&CapacitorBudget {
            motional: 2.1e-15,
            stray: 3.1e-15,
        })
        .unwrap();
        assert!((eta - 0.40).abs() < 0.01);
        assert_eq!(
            participation_ratio(&CapacitorBudget {
                motional: 0.0,
                stray: 1.0
            })
            .unwrap(),
            0.0
        );
        assert_eq!(
            participation_ratio(&CapacitorBudget {
                motional: 1.0,
                stray: 0.0
            })
            .unwrap(),
            1.0
        );
        assert!(participation_ratio(&CapacitorBudget {
            motional: 0.0,
            stray: 0.0
        })
        .is_err());
    }

    #[test]
    fn zero_point_scaling() {
        let x = zero_point_motion(1e-15, angular(425e6)).unwrap();
        assert!((x - 4.44e-15).abs() < 0.01e-15, "x_zpf = {x}");
        assert!((zero_point_motion(4e-15, angular(425e6)).unwrap() - x / 2.0).abs() < 1e-27);
        assert!((zero_point_motion(1e-15, angular(1700e6)).unwrap() - x / 2.0).abs() < 1e-27);
    }

    #[test]
    fn coupling_from_circuit() {
        assert_eq!(g0_from_circuit(0.4, 4e-15, 1e10, 2e-15, 0.0).unwrap(), 0.0);
        let a = g0_from_circuit(0.4, 4e-15, 1e10, 2e-15, -1e-9).unwrap();
        let b = g0_from_circuit(0.8, 4e-15, 1e10, 2e-15, -1e-9).unwrap();
        let c = g0_from_circuit(0.4, 8e-15, 1e10, 2e-15, -1e-9).unwrap();
        assert!(a > 0.0);
        assert!((b - 2.0 * a).abs() < 1e-12 * b);
        assert!((c - 2.0 * a).abs() < 1e-12 * c);
        // a gradient chosen for |g0|/2π = 34.6 Hz
        let eta = 0.4038;
        let x = zero_point_motion(1e-15, angular(424.7e6)).unwrap();
        let w = angular(10.77e9);
        let target = angular(34.6);
        let dc_du = -target * 2.0 * 2.1e-15 / (eta * x * w);
        let g = g0_from_circuit(eta, x, w, 2.1e-15, dc_du).unwrap();
        assert!((ordinary(g) - 34.6).abs() < 1e-9);
    }
}
