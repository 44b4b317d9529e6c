use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentLabel {
    CavityLeak,
    MechanicalDecay,
}

impl SegmentLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SegmentLabel::CavityLeak => "cavity_leak",
            SegmentLabel::MechanicalDecay => "mechanical_decay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cavity_leak" => Some(SegmentLabel::CavityLeak),
            "mechanical_decay" => Some(SegmentLabel::MechanicalDecay),
            _ => None,
        }
    }
}

/// A labelled half-open sample range `[start, end)` of a ringdown trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub label: SegmentLabel,
    pub start: usize,
    pub end: usize,
}

/// Detected power after the excitation pulse, proportional to the stored
/// phonon number.
#[derive(Debug, Clone, PartialEq)]
pub struct RingdownTrace {
    pub times: Vec<f64>,
    pub power: Vec<f64>,
    pub segments: Vec<Segment>,
}

impl RingdownTrace {
    /// Build a trace; noisy measurements may dip below zero, so only
    /// finiteness and time ordering are enforced here.
    pub fn new(times: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        let trace = RingdownTrace {
            times,
            power,
            segments: Vec::new(),
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.power.len() {
            return Err(Error::InvalidTrace(format!(
                "{} times but {} samples",
                self.times.len(),
                self.power.len()
            )));
        }
        if self.times.len() < 2 {
            return Err(Error::InvalidTrace("need at least two samples".into()));
        }
        if let Some(i) = self.times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTrace(format!(
                "times not strictly increasing at index {}",
                i + 1
            )));
        }
        if self.times.iter().chain(&self.power).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTrace("non-finite sample".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Two-exponential energy decay `A_cav e^{−κt} + A_mech e^{−γm t}`.
pub fn ringdown_signal(
    t: f64,
    a_cav: f64,
    kappa_plus: f64,
    a_mech: f64,
    gamma_m: f64,
) -> Result<f64> {
    ensure_positive("kappa_plus", kappa_plus)?;
    ensure_positive("gamma_m", gamma_m)?;
    ensure_non_negative("a_cav", a_cav)?;
    ensure_non_negative("a_mech", a_mech)?;
    Ok(a_cav * (-kappa_plus * t).exp() + a_mech * (-gamma_m * t).exp())
}

/// Noise-free ringdown sampled at `times`.
pub fn ringdown_trace(
    times: &[f64],
    a_cav: f64,
    kappa_plus: f64,
    a_mech: f64,
    gamma_m: f64,
) -> Result<RingdownTrace> {
    let power = times
        .iter()
        .map(|&t| ringdown_signal(t, a_cav, kappa_plus, a_mech, gamma_m))
        .collect::<Result<Vec<_>>>()?;
    RingdownTrace::new(times.to_vec(), power)
}

/// Back-action damped energy decay rate `γm = γi + γem`.
pub fn total_damping(gamma_i: f64, gamma_em: f64) -> f64 {
    gamma_i + gamma_em
}
