//! Shared fixtures for the benchmarks.

use capwave_core::WaveParameters;

/// Deep-ish water, no surface tension, current equal to the wave speed.
pub fn co_moving_params() -> WaveParameters {
    WaveParameters::co_moving(1.0, 0.0).expect("valid parameters")
}

/// Moderate depth with a current slightly faster than the wave.
pub fn general_params() -> WaveParameters {
    let c = capwave_core::dispersion_speed(0.5, 0.0).expect("valid parameters");
    WaveParameters::new(0.5, 0.0, c + 0.05).expect("valid parameters")
}
