//! Numerical tolerances shared across the crate.

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_RTOL: f64 = 1e-9;

/// Newton iteration defaults for inverting the Legendre map.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;

/// How far off the Legendre graph a point may be and still count as on it.
pub const GRAPH_TOL: f64 = 1e-9;

/// Default tolerance for structure-equation validation.
pub const ALGEBROID_TOL: f64 = 1e-10;

/// Relative residual accepted after solving the second-order fiber system.
pub const SOLVE_RESIDUAL_RTOL: f64 = 1e-9;

/// Gauss-Newton projection onto constraint sets.
pub const PROJECTION_TOL: f64 = 1e-12;
pub const PROJECTION_MAX_ITER: usize = 60;
