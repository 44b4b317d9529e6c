//! Inverse problems: least-squares fits of the forward models and the
//! multi-stage reflection pipeline.

mod eit;
mod g0;
mod heating;
pub mod lm;
mod lorentzian;
mod occupancy;
mod report;
mod ringdown;

pub use eit::{fit_eit_pipeline, run_eit_pipeline, EitPipelineFit, EitPipelineOptions, EitPrior};
pub use g0::{fit_g0_slope, DampingPoint};
pub use heating::{fit_heating, fit_heating_with, HeatingCurve};
pub use lorentzian::{
    fit_lorentzian, fit_lorentzian_raw, fit_lorentzian_set, lorentzian_guess, lorentzian_magnitude,
    LorentzianFit, LorentzianSetFit,
};
pub use occupancy::{
    calibrate_occupancy, captured_fraction, occupancy_from_area, subtract_background, to_quanta,
};
pub use report::{Convergence, FitParam, FitReport, ParamUnit, StageRecord};
pub use ringdown::{
    detect_breakpoint, fit_ringdown, fit_ringdown_with, noise_sigma, segment_ringdown,
    RingdownOptions,
};
