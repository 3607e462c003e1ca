//! Numerical tolerances and thresholds used across the crate.
//!
//! Everything that gates a check or switches an algorithm lives here so
//! the verification harness, the tests and the library agree on one set
//! of numbers.

/// Relative accuracy target of the special functions.
pub const SPECIAL_FUNCTION_REL: f64 = 1e-13;

/// `1 - m` below which Jacobi functions use the hyperbolic limit.
pub const HYPERBOLIC_LIMIT_GAP: f64 = 1e-12;

/// Pythagorean identities of sn, cn, dn.
pub const JACOBI_IDENTITY: f64 = 1e-11;

/// sn(u + 4K) - sn(u).
pub const JACOBI_PERIODICITY: f64 = 1e-10;

/// sn(F(phi|m)|m) - sin(phi).
pub const JACOBI_INVERSE: f64 = 1e-11;

/// d(sn)/du - cn dn by central differences.
pub const JACOBI_DERIVATIVE: f64 = 1e-6;

/// Step used for finite-difference residuals of the linear field.
pub const FIELD_FD_STEP: f64 = 1e-4;

/// Linearized-system and boundary residuals.
pub const FIELD_RESIDUAL: f64 = 1e-6;

/// Mean of u over one wavelength against c0.
pub const MEAN_CURRENT: f64 = 1e-10;

/// Below this shallowness the ratio x / sinh(x) is evaluated by series.
pub const SHALLOW_SERIES_DELTA: f64 = 1e-6;

/// Round trip through the scaling maps (relative).
pub const SCALING_ROUND_TRIP: f64 = 1e-14;

/// Frame round trip (absolute).
pub const FRAME_ROUND_TRIP: f64 = 1e-14;

/// Chain-rule agreement of the lab and moving-frame right sides.
pub const CHAIN_RULE: f64 = 1e-12;

/// Drift of the Case I first integrals along numeric trajectories.
pub const FIRST_INTEGRAL_DRIFT: f64 = 1e-8;

/// Algebraic identities of the Case I integration constants.
pub const CONSTANT_IDENTITY: f64 = 1e-10;

/// Residuals of the scalar first-order equations for y(t) and w(t).
pub const SCALAR_ODE_RESIDUAL: f64 = 1e-8;

/// Closed form against adaptive integration, Case I.
pub const CASE_I_ORACLE: f64 = 1e-8;

/// Second-derivative residuals of the Case I closed form.
pub const CASE_I_SECOND_ORDER: f64 = 1e-6;

/// Horizontal drift over one period against c times the period.
pub const DRIFT: f64 = 1e-8;

/// Fitted initial data reproduced at t = 0.
pub const INITIAL_FIT: f64 = 1e-10;

/// Canonical-form residual of the parametric Abel solution.
pub const CANONICAL_FORM: f64 = 1e-9;

/// u = y'/(1 + y^2) along the parametrization.
pub const SUBSTITUTION_CHAIN: f64 = 1e-8;

/// Abel reduction residual with finite-difference derivatives.
pub const ABEL_RESIDUAL: f64 = 1e-6;

/// Closed form against adaptive integration, Case II.
pub const CASE_II_ORACLE: f64 = 1e-6;

/// Case II is selected when |c0 - c| exceeds this.
pub const CASE_SELECTION: f64 = 1e-12;

/// Inversion t -> tau.
pub const TAU_INVERSION: f64 = 1e-10;

/// Particles above this non-dimensional height are considered escaped;
/// trajectories are truncated there.
pub const ESCAPE_HEIGHT: f64 = 10.0;

/// Largest moving-frame height `Z = 2 pi delta |z|` followed before a
/// particle counts as escaped. Velocities grow like `exp(Z)`.
pub const ESCAPE_PHASE: f64 = 12.0;

/// Escape height for shallowness `delta`: the smaller of
/// [`ESCAPE_HEIGHT`] and the height where `Z` reaches [`ESCAPE_PHASE`].
pub fn escape_height(delta: f64) -> f64 {
    ESCAPE_HEIGHT.min(ESCAPE_PHASE / (2.0 * std::f64::consts::PI * delta))
}

/// Default integrator tolerances.
pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_ABS_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_STEP: f64 = 0.1;
