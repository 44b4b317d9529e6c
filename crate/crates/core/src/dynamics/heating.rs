use super::ode::{integrate, Tolerances};
use crate::error::{ensure_non_negative, Error, Result};

/// Relative gap `|γs − γ|/γ` below which the closed form switches to its
/// analytic limit.
pub const DEGENERATE_RATE_GAP: f64 = 1e-9;

/// Rate-equation model of pump-induced heating of the mechanical mode.
///
/// The mode couples to its ambient bath (`gamma_i`, `n_bath_m`), to the
/// zero-temperature drive (`gamma_em`) and to a hot bath (`gamma_p`, `n_p`) of
/// which a fraction `delta_b` switches on at rate `gamma_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatingParams {
    pub gamma_i: f64,
    pub gamma_em: f64,
    pub gamma_p: f64,
    pub n_bath_m: f64,
    pub n_p: f64,
    pub delta_b: f64,
    pub gamma_s: f64,
}

impl HeatingParams {
    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("gamma_i", self.gamma_i)?;
        ensure_non_negative("gamma_em", self.gamma_em)?;
        ensure_non_negative("gamma_p", self.gamma_p)?;
        ensure_non_negative("n_bath_m", self.n_bath_m)?;
        ensure_non_negative("n_p", self.n_p)?;
        ensure_non_negative("gamma_s", self.gamma_s)?;
        if !(0.0..=1.0).contains(&self.delta_b) {
            return Err(Error::param(
                "delta_b",
                format!("must lie in [0, 1], got {}", self.delta_b),
            ));
        }
        if self.gamma_total() <= 0.0 {
            return Err(Error::param(
                "gamma_total",
                "total damping must be positive",
            ));
        }
        Ok(())
    }

    /// `γ = γi + γem + γp`.
    pub fn gamma_total(&self) -> f64 {
        self.gamma_i + self.gamma_em + self.gamma_p
    }

    /// Steady-state occupancy `n_H = (γp n_p + γi n_bm)/γ`.
    pub fn n_hot(&self) -> f64 {
        (self.gamma_p * self.n_p + self.gamma_i * self.n_bath_m) / self.gamma_total()
    }

    /// Amplitude `n_δ = γp n_p δb / (γs − γ)` of the slow term; infinite on
    /// the degenerate branch.
    pub fn n_delta(&self) -> f64 {
        self.gamma_p * self.n_p * self.delta_b / (self.gamma_s - self.gamma_total())
    }

    /// Right-hand side of the rate equation.
    pub fn rate(&self, t: f64, n: f64) -> f64 {
        -self.gamma_total() * n
            + self.gamma_p * self.n_p * (1.0 - self.delta_b * (-self.gamma_s * t).exp())
            + self.gamma_i * self.n_bath_m
    }
}

/// Closed-form occupancy
/// `n(t) = n_bm e^{−γt} + n_H (1 − e^{−γt}) + n_δ (e^{−γs t} − e^{−γt})`.
///
/// The slow term is evaluated through `expm1` with `c = γp n_p δb`, which
/// stays accurate as `γs → γ`; within [`DEGENERATE_RATE_GAP`] it is replaced
/// by its limit `−c·t·e^{−γt}`.
pub fn heating_closed_form(t: f64, p: &HeatingParams) -> Result<f64> {
    p.validate()?;
    ensure_non_negative("t", t)?;
    let gamma = p.gamma_total();
    let c = p.gamma_p * p.n_p * p.delta_b;
    Ok(p.n_bath_m * (-gamma * t).exp()
        + p.n_hot() * -(-gamma * t).exp_m1()
        + slow_term(c, gamma, p.gamma_s, t))
}

/// `c·(e^{−γs t} − e^{−γt})/(γs − γ)`, factored on the slower rate and
/// replaced by `−c·t·e^{−γt}` when the rates coincide.
pub(crate) fn slow_term(c: f64, gamma: f64, gamma_s: f64, t: f64) -> f64 {
    let gap = gamma_s - gamma;
    if (gap / gamma).abs() < DEGENERATE_RATE_GAP {
        -c * t * (-gamma * t).exp()
    } else if gap > 0.0 {
        c * (-gamma * t).exp() * (-gap * t).exp_m1() / gap
    } else {
        -c * (-gamma_s * t).exp() * (gap * t).exp_m1() / gap
    }
}

/// Integrate the rate equation numerically from `n(0) = n_bm`
/// (rtol 1e-9, atol 1e-12). `t_grid` must start at 0 and be increasing.
pub fn heating_ode_oracle(t_grid: &[f64], p: &HeatingParams) -> Result<Vec<f64>> {
    p.validate()?;
    if let Some(&t0) = t_grid.first() {
        if t0 != 0.0 {
            return Err(Error::Integration(format!(
                "time grid must start at 0, got {t0}"
            )));
        }
    }
    integrate(
        |t, n| p.rate(t, n),
        p.n_bath_m,
        t_grid,
        Tolerances::default(),
    )
}
