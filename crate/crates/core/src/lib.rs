//! Particle trajectories beneath small-amplitude capillary-gravity waves.
//!
//! The crate evaluates the linear wave field, integrates particle paths
//! numerically, and evaluates the closed-form paths for a current equal to
//! the wave speed (Jacobi elliptic functions) and for a general current
//! (parametric solution of an Abel equation of the second kind).

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exact_case_equal;
pub mod exact_case_general;
pub mod io;
pub mod particle_dynamics;
pub mod quadrature;
pub mod roots;
pub mod run;
pub mod special_functions;
pub mod tolerances;
pub mod verify;
pub mod wave_model;

pub use config::{C0Mode, Method, OutputFormat, RunConfig};
pub use error::{Error, Result};
pub use exact_case_equal::{first_integral_constants, trajectory_case1, CaseIConstants, RegimeTag};
pub use exact_case_general::{fit_constants, trajectory_case2, CaseIIConstants, RadicandConvention, TauBridge};
pub use io::{TrajectoryDocument, TrajectoryRow, CSV_HEADER};
pub use particle_dynamics::{
    drift_diagnostic, integrate, mean_current_check, rhs_lab, rhs_moving, transform_frame, ComponentSource, Frame,
    IntegratorConfig, MethodTag, MovingFrameState, ParticleState, Trajectory, TrajectoryMeta,
};
pub use run::{run_dispersion, run_field, run_trajectory, sweep, TrajectoryRun};
pub use special_functions::{
    complete_elliptic_k, incomplete_elliptic_f, jacobi_elliptic, EllipticModulusSquared, JacobiTriple,
};
pub use verify::{run_verify, VerificationReport, VerifyOptions};
pub use wave_model::{
    dispersion_speed, field_sample, mean_curvature, scale_variables, weber_number, DimensionalParameters, FieldSample,
    WaveParameters,
};
