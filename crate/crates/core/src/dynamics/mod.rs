//! Time-domain models: ringdown with cavity leakage, back-action damping and
//! the pump-heating rate equation with its numerical oracle.

mod heating;
pub mod ode;
mod ringdown;

pub(crate) use heating::slow_term;
pub use heating::{heating_closed_form, heating_ode_oracle, HeatingParams, DEGENERATE_RATE_GAP};
pub use ringdown::{
    ringdown_signal, ringdown_trace, total_damping, RingdownTrace, Segment, SegmentLabel,
};
