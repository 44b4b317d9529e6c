//! Physical constants (CODATA 2018).

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Vacuum permeability, H/m.
pub const MU_0: f64 = 1.256_637_062_12e-6;

/// Floor substituted for a zero intrinsic mechanical damping rate (rad/s).
pub const DEFAULT_GAMMA_FLOOR: f64 = 1e-6;
