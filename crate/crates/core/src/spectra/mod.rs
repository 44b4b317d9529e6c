//! Frequency-domain forward models: probe reflection, its inverse, output
//! noise spectra, steady-state occupancy and frequency-jitter handling.

mod eit;
mod inverse;
mod jitter;
mod noise;
mod trace;

pub(crate) use eit::jittered_value;
pub use eit::{eit_trace, eit_trace_jittered, s11_eit, s11_eit_jittered};
pub use inverse::{inverse_response, local_maxima, peak_pair, Peak};
pub use jitter::{
    jitter_budget, jitter_convolve, jitter_decompose, JitterBudget, JitterDecomposition,
    JitterKernel, JitterShape,
};
pub use noise::{
    backaction_rate, cooperativity, npsd_sii, npsd_terms, npsd_trace, occupancy_steady, NpsdTerms,
};
pub use trace::{
    linspace, peak_fwhm, resample_uniform, PsdUnits, SpectrumTrace, TraceKind, TraceMeta,
};
