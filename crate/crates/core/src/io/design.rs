//! Design input files for `emx design`.
//!
//! ```toml
//! [coil]
//! wire_width_nm = 500.0
//! pitch_nm = 1000.0
//! turns = 35.0
//! outer_dim_nm = 74000.0
//! thickness_nm = 120.0
//!
//! [capacitance]
//! motional_ff = 2.1
//! srf_hz = 13.98e9
//! ```

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::Deserialize;

use super::read_text;
use crate::designer::{
    g0_from_circuit, lc_frequency, participation_ratio, stray_capacitance_from_srf,
    wheeler_inductance_with, zero_point_motion, CapacitorBudget, CoilGeometry, WheelerCoefficients,
};
use crate::error::{Error, Result};
use crate::model::{angular, ordinary};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub coil: CoilSection,
    pub capacitance: CapacitanceSection,
    pub mechanics: Option<MechanicsSection>,
    pub wheeler: Option<WheelerSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoilSection {
    pub wire_width_nm: f64,
    pub pitch_nm: f64,
    pub turns: f64,
    pub outer_dim_nm: f64,
    pub thickness_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitanceSection {
    pub motional_ff: f64,
    /// Self-resonance of the bare coil, used to infer the stray capacitance.
    pub srf_hz: Option<f64>,
    pub stray_ff: Option<f64>,
    /// Measured or simulated inductance overriding the coil estimate.
    pub inductance_nh: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsSection {
    pub m_eff_kg: f64,
    pub omega_m_hz: f64,
    /// Motional capacitance change per unit displacement (F/m).
    pub dc_du_f_per_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelerSection {
    pub k1: f64,
    pub k2: f64,
}

/// Derived design quantities in file units, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    pub values: IndexMap<&'static str, f64>,
    pub inductance_source: &'static str,
}

impl DesignReport {
    pub fn to_text(&self) -> String {
        let mut s = String::from("[design]\n");
        let _ = writeln!(s, "inductance_source: {}", self.inductance_source);
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }
}

impl DesignFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| {
                text[..s.start.min(text.len())].matches('\n').count() + 1
            }),
            message: e.message().trim().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn geometry(&self) -> CoilGeometry {
        let c = &self.coil;
        CoilGeometry {
            wire_width: c.wire_width_nm * 1e-9,
            pitch: c.pitch_nm * 1e-9,
            turns: c.turns,
            outer_dim: c.outer_dim_nm * 1e-9,
            thickness: c.thickness_nm * 1e-9,
        }
    }

    pub fn evaluate(&self) -> Result<DesignReport> {
        let coeffs = self
            .wheeler
            .map_or(WheelerCoefficients::SQUARE, |w| WheelerCoefficients {
                k1: w.k1,
                k2: w.k2,
            });
        let wheeler = wheeler_inductance_with(&self.geometry(), coeffs)?;
        let (inductance, source) = match self.capacitance.inductance_nh {
            Some(l) => (l * 1e-9, "given"),
            None => (wheeler, "wheeler"),
        };
        let cap = &self.capacitance;
        let stray = match (cap.stray_ff, cap.srf_hz) {
            (Some(c), _) => c * 1e-15,
            (None, Some(f)) => stray_capacitance_from_srf(inductance, angular(f))?,
            (None, None) => {
                return Err(Error::Config(
                    "capacitance: give stray_ff or srf_hz to fix the stray capacitance".into(),
                ))
            }
        };
        let budget = CapacitorBudget {
            motional: cap.motional_ff * 1e-15,
            stray,
        };
        let eta = participation_ratio(&budget)?;
        let omega_r0 = lc_frequency(inductance, budget.total())?;
        let mut values = IndexMap::new();
        values.insert("wheeler_inductance_nh", wheeler * 1e9);
        values.insert("inductance_nh", inductance * 1e9);
        values.insert("inner_dim_nm", self.geometry().inner_dim() * 1e9);
        values.insert("stray_ff", stray * 1e15);
        values.insert("total_ff", budget.total() * 1e15);
        values.insert("participation", eta);
        values.insert("omega_r0_hz", ordinary(omega_r0));
        if let Some(m) = &self.mechanics {
            let x_zpf = zero_point_motion(m.m_eff_kg, angular(m.omega_m_hz))?;
            let g0 = g0_from_circuit(eta, x_zpf, omega_r0, budget.motional, m.dc_du_f_per_m)?;
            values.insert("x_zpf_m", x_zpf);
            values.insert("g0_hz", ordinary(g0));
        }
        Ok(DesignReport {
            values,
            inductance_source: source,
        })
    }
}
