//! Non-dimensionalization, the dispersion relation and the linear
//! capillary-gravity field `(eta, u, v, p)`.
//!
//! Horizontal lengths are scaled by the wavelength, vertical lengths by the
//! undisturbed depth and the horizontal velocity by `sqrt(g h0)`; the
//! wavenumber is fixed at `2 pi`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::{CASE_SELECTION, SHALLOW_SERIES_DELTA};

/// Wavenumber of the periodic travelling wave in scaled variables.
pub const WAVENUMBER: f64 = 2.0 * PI;

/// Physical parameters of the flow, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParameters {
    /// Undisturbed depth.
    pub h0: f64,
    /// Wavelength.
    pub lambda: f64,
    /// Surface-tension coefficient.
    pub gamma: f64,
    /// Gravitational acceleration.
    pub g: f64,
    /// Density.
    pub rho: f64,
    /// Wave amplitude.
    pub a_amp: f64,
    /// Atmospheric (reference) pressure.
    pub p0: f64,
}

impl DimensionalParameters {
    pub fn new(h0: f64, lambda: f64, gamma: f64, g: f64, rho: f64, a_amp: f64, p0: f64) -> Result<Self> {
        let p = Self {
            h0,
            lambda,
            gamma,
            g,
            rho,
            a_amp,
            p0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h0", self.h0),
            ("lambda", self.lambda),
            ("g", self.g),
            ("rho", self.rho),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("a_amp", self.a_amp)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.p0.is_finite() {
            return Err(Error::Domain("p0 must be finite".into()));
        }
        Ok(())
    }

    /// Shallowness `h0 / lambda`.
    pub fn delta(&self) -> f64 {
        self.h0 / self.lambda
    }

    /// Amplitude parameter `a / h0`.
    pub fn epsilon(&self) -> f64 {
        self.a_amp / self.h0
    }

    /// Velocity scale `sqrt(g h0)`.
    pub fn velocity_scale(&self) -> f64 {
        (self.g * self.h0).sqrt()
    }
}

/// Weber number `Gamma / (rho g h0^2)`.
pub fn weber_number(params: &DimensionalParameters) -> f64 {
    params.gamma / (params.rho * params.g * params.h0 * params.h0)
}

/// `x / sinh(x)`, by series near zero.
pub(crate) fn x_over_sinh(x: f64) -> f64 {
    if x.abs() < WAVENUMBER * SHALLOW_SERIES_DELTA {
        let x2 = x * x;
        1.0 - x2 / 6.0 + 7.0 * x2 * x2 / 360.0
    } else if x.abs() > 700.0 {
        2.0 * x.abs() * (-x.abs()).exp()
    } else {
        x / x.sinh()
    }
}

/// `tanh(x) / x`, by series near zero.
fn tanh_over_x(x: f64) -> f64 {
    if x.abs() < WAVENUMBER * SHALLOW_SERIES_DELTA {
        let x2 = x * x;
        1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    } else {
        x.tanh() / x
    }
}

/// Depth profiles `kd cosh(kd z) / sinh(kd)` and `kd sinh(kd z) / sinh(kd)`.
fn depth_profiles(kd: f64, z: f64) -> (f64, f64) {
    if kd < 20.0 {
        let r = x_over_sinh(kd);
        (r * (kd * z).cosh(), r * (kd * z).sinh())
    } else {
        // exp form avoids overflow of sinh and cosh for deep water
        let decay = (kd * (z - 1.0)).exp() / (1.0 - (-2.0 * kd).exp());
        let e = (-2.0 * kd * z).exp();
        (kd * decay * (1.0 + e), kd * decay * (1.0 - e))
    }
}

/// Linear wave speed `c = sqrt(tanh(2 pi delta) / (2 pi delta) * (1 + 4 pi^2 delta^2 We))`.
pub fn dispersion_speed(delta: f64, weber: f64) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    if !(weber.is_finite() && weber >= 0.0) {
        return Err(Error::Domain(format!("Weber number must be non-negative, got {weber}")));
    }
    let kd = WAVENUMBER * delta;
    Ok((tanh_over_x(kd) * (1.0 + kd * kd * weber)).sqrt())
}

/// Non-dimensional wave and flow parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParameters {
    pub delta: f64,
    pub epsilon: f64,
    pub weber: f64,
    /// Strength of the uniform current.
    pub c0: f64,
    /// Linear wave speed, derived from `(delta, weber)`.
    pub c: f64,
}

impl WaveParameters {
    pub fn new(delta: f64, weber: f64, c0: f64) -> Result<Self> {
        if !c0.is_finite() {
            return Err(Error::Domain(format!("c0 must be finite, got {c0}")));
        }
        let c = dispersion_speed(delta, weber)?;
        Ok(Self {
            delta,
            epsilon: 0.0,
            weber,
            c0,
            c,
        })
    }

    /// Parameters with the current equal to the wave speed, `c0 = c`.
    pub fn co_moving(delta: f64, weber: f64) -> Result<Self> {
        let c = dispersion_speed(delta, weber)?;
        Ok(Self {
            delta,
            epsilon: 0.0,
            weber,
            c0: c,
            c,
        })
    }

    pub fn from_dimensional(params: &DimensionalParameters, c0: Option<f64>) -> Result<Self> {
        params.validate()?;
        let mut wp = match c0 {
            Some(c0) => Self::new(params.delta(), weber_number(params), c0)?,
            None => Self::co_moving(params.delta(), weber_number(params))?,
        };
        wp.epsilon = params.epsilon();
        Ok(wp)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn wavenumber(&self) -> f64 {
        WAVENUMBER
    }

    /// True when the current equals the wave speed within the case
    /// selection threshold.
    pub fn is_co_moving(&self) -> bool {
        (self.c0 - self.c).abs() <= CASE_SELECTION
    }

    /// `b = 2 pi (c0 - c)`, the drift of the phase in the moving frame.
    pub fn phase_drift(&self) -> f64 {
        if self.is_co_moving() {
            0.0
        } else {
            WAVENUMBER * (self.c0 - self.c)
        }
    }

    /// Prefactor `4 pi^2 delta c / sinh(2 pi delta)` of the moving-frame system.
    pub fn frame_prefactor(&self) -> f64 {
        WAVENUMBER * self.c * x_over_sinh(WAVENUMBER * self.delta)
    }

    /// `a^2 = 8 pi^4 delta^2 c^2 / sinh^2(2 pi delta)`.
    pub fn a_squared(&self) -> f64 {
        let a = self.frame_prefactor();
        0.5 * a * a
    }
}

/// Field values of the linear solution at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub u: f64,
    pub v: f64,
    pub p: f64,
    pub eta: f64,
}

/// Linear field without the `0 <= z <= 1` check; used by the finite
/// difference stencils and by trajectories that leave the strip.
pub fn field_values(x: f64, z: f64, t: f64, wp: &WaveParameters) -> FieldSample {
    let (s, c) = (WAVENUMBER * (x - wp.c * t)).sin_cos();
    field_from_phase(s, c, z, wp)
}

/// Field for a phase `2 pi (x - c t)` given through its sine and cosine.
fn field_from_phase(s: f64, c: f64, z: f64, wp: &WaveParameters) -> FieldSample {
    let kd = WAVENUMBER * wp.delta;
    let (ch, sh) = depth_profiles(kd, z);
    FieldSample {
        u: wp.c * ch * c + wp.c0,
        v: wp.c / wp.delta * sh * s,
        p: wp.c * wp.c * ch * c,
        eta: c,
    }
}

/// Linear field `(u, v, p, eta)` at `(x, z, t)`.
pub fn field_sample(x: f64, z: f64, t: f64, wp: &WaveParameters) -> Result<FieldSample> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!(
            "linear solution is defined for 0 <= z <= 1, got z = {z}"
        )));
    }
    Ok(field_values(x, z, t, wp))
}

/// Mean curvature `eta_xx / (1 + eta_x^2)^(3/2)`.
pub fn mean_curvature(eta_x: f64, eta_xx: f64) -> f64 {
    eta_xx / (1.0 + eta_x * eta_x).powf(1.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleDirection {
    ToNondimensional,
    ToDimensional,
}

/// Labelled physical quantities; absent entries pass through untouched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhysicalState {
    pub x: Option<f64>,
    pub z: Option<f64>,
    pub t: Option<f64>,
    pub u: Option<f64>,
    pub v: Option<f64>,
    pub p: Option<f64>,
    pub eta: Option<f64>,
}

/// Maps between dimensional quantities and the scaled variables of the
/// linear problem (including the amplitude scaling of `u`, `v`, `p`).
pub fn scale_variables(
    direction: ScaleDirection,
    state: &PhysicalState,
    params: &DimensionalParameters,
) -> Result<PhysicalState> {
    params.validate()?;
    let eps = params.epsilon();
    let needs_amplitude = state.u.is_some() || state.v.is_some() || state.p.is_some() || state.eta.is_some();
    if needs_amplitude && eps <= 0.0 {
        return Err(Error::Configuration(
            "amplitude a must be positive to scale u, v, p or eta".into(),
        ));
    }
    if state.p.is_some() && state.z.is_none() {
        return Err(Error::Configuration(
            "pressure conversion needs z for the hydrostatic part".into(),
        ));
    }
    let vs = params.velocity_scale();
    let h0 = params.h0;
    let lam = params.lambda;
    let rgh = params.rho * params.g * h0;
    let vscale = h0 * vs / lam;
    let out = match direction {
        ScaleDirection::ToNondimensional => {
            let z = state.z.map(|z| z / h0);
            PhysicalState {
                x: state.x.map(|x| x / lam),
                z,
                t: state.t.map(|t| t * vs / lam),
                u: state.u.map(|u| u / vs / eps),
                v: state.v.map(|v| v / vscale / eps),
                p: state
                    .p
                    .map(|p| (p - params.p0 - rgh * (1.0 - z.unwrap_or(0.0))) / rgh / eps),
                eta: state.eta.map(|e| e / params.a_amp),
            }
        }
        ScaleDirection::ToDimensional => PhysicalState {
            x: state.x.map(|x| x * lam),
            z: state.z.map(|z| z * h0),
            t: state.t.map(|t| t * lam / vs),
            u: state.u.map(|u| u * eps * vs),
            v: state.v.map(|v| v * eps * vscale),
            p: state
                .p
                .map(|p| params.p0 + rgh * (1.0 - state.z.unwrap_or(0.0)) + rgh * eps * p),
            eta: state.eta.map(|e| e * params.a_amp),
        },
    };
    Ok(out)
}

/// Residuals of the linearized system at one point, by fourth-order
/// central differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearResiduals {
    /// `u_t + p_x`
    pub momentum_x: f64,
    /// `delta^2 v_t + p_z`
    pub momentum_z: f64,
    /// `u_x + v_z`
    pub continuity: f64,
    /// `u_z - delta^2 v_x`
    pub irrotationality: f64,
    /// `v - eta_t` at `z = 1`
    pub kinematic_surface: f64,
    /// `p - eta + delta^2 We eta_xx` at `z = 1`
    pub dynamic_surface: f64,
}

impl LinearResiduals {
    pub fn max_abs(&self) -> f64 {
        [
            self.momentum_x,
            self.momentum_z,
            self.continuity,
            self.irrotationality,
            self.kinematic_surface,
            self.dynamic_surface,
        ]
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()))
    }
}

fn d1<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn d2<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h * h)
}

/// Finite-difference residuals of the linear system at `(x, z, t)`; the
/// surface conditions are evaluated at `(x, 1, t)`.
///
/// Stencil points are offsets from the base point, and their phase is
/// formed by angle addition from the base phase reduced to one period, so
/// the differences do not pick up the rounding error of `cos` at large
/// arguments.
pub fn linear_residuals(x: f64, z: f64, t: f64, wp: &WaveParameters, h: f64) -> LinearResiduals {
    let shift = x - wp.c * t;
    let (sb, cb) = (WAVENUMBER * (shift - shift.round())).sin_cos();
    // field at (x + dx, z, t + dt)
    let f = |dx: f64, z: f64, dt: f64| {
        let (sd, cd) = (WAVENUMBER * (dx - wp.c * dt)).sin_cos();
        field_from_phase(sb * cd + cb * sd, cb * cd - sb * sd, z, wp)
    };
    let d2coef = wp.delta * wp.delta;
    let surface = f(0.0, 1.0, 0.0);
    LinearResiduals {
        momentum_x: d1(|s| f(0.0, z, s).u, 0.0, h) + d1(|s| f(s, z, 0.0).p, 0.0, h),
        momentum_z: d2coef * d1(|s| f(0.0, z, s).v, 0.0, h) + d1(|s| f(0.0, s, 0.0).p, z, h),
        continuity: d1(|s| f(s, z, 0.0).u, 0.0, h) + d1(|s| f(0.0, s, 0.0).v, z, h),
        irrotationality: d1(|s| f(0.0, s, 0.0).u, z, h) - d2coef * d1(|s| f(s, z, 0.0).v, 0.0, h),
        kinematic_surface: surface.v - d1(|s| f(0.0, 1.0, s).eta, 0.0, h),
        dynamic_surface: surface.p - surface.eta + d2coef * wp.weber * d2(|s| f(s, 1.0, 0.0).eta, 0.0, h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn water() -> DimensionalParameters {
        DimensionalParameters::new(0.01, 0.05, 0.074, 9.81, 1000.0, 0.001, 101_325.0).unwrap()
    }

    #[test]
    fn weber_zero_without_surface_tension() {
        let mut p = water();
        p.gamma = 0.0;
        assert_eq!(weber_number(&p), 0.0);
    }

    #[test]
    fn weber_for_thin_water_layer() {
        // 0.074 / (1000 * 9.81 * 1e-4)
        assert!((weber_number(&water()) - 0.075_433_231_396_534_14).abs() < 1e-15);
    }

    #[test]
    fn weber_quarters_when_depth_doubles() {
        let p = water();
        let mut q = p;
        q.h0 *= 2.0;
        assert!((weber_number(&q) - 0.25 * weber_number(&p)).abs() < 1e-16);
    }

    #[test]
    fn invalid_dimensional_parameters() {
        assert!(DimensionalParameters::new(0.0, 1.0, 0.0, 9.81, 1.0, 0.0, 0.0).is_err());
        assert!(DimensionalParameters::new(1.0, 1.0, -1.0, 9.81, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn shallow_limit_speed_is_one() {
        let c = dispersion_speed(1e-9, 0.0).unwrap();
        assert!((c - 1.0).abs() < 1e-15);
        let c = dispersion_speed(1e-4, 0.0).unwrap();
        assert!((c - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deep_water_speed() {
        // tanh(pi) / pi evaluated to 30 digits
        let c = dispersion_speed(0.5, 0.0).unwrap();
        assert!((c * c - 0.317_123_251_189_915_7).abs() < 1e-15);
    }

    #[test]
    fn surface_tension_speeds_up_the_wave() {
        assert!(dispersion_speed(0.5, 1.0).unwrap() > dispersion_speed(0.5, 0.0).unwrap());
        assert!(dispersion_speed(0.0, 0.0).is_err());
        assert!(dispersion_speed(-1.0, 0.0).is_err());
    }

    #[test]
    fn bed_has_no_vertical_velocity() {
        let wp = WaveParameters::new(0.3, 0.2, 0.1).unwrap();
        for x in [0.0, 0.13, 0.71] {
            assert_eq!(field_sample(x, 0.0, 0.4, &wp).unwrap().v, 0.0);
        }
    }

    #[test]
    fn quarter_phase_zeros() {
        let wp = WaveParameters::new(0.3, 0.2, 0.4).unwrap();
        let t = 0.7;
        let x = 0.25 + wp.c * t;
        let f = field_sample(x, 0.6, t, &wp).unwrap();
        assert!(f.eta.abs() < 1e-14);
        assert!((f.u - wp.c0).abs() < 1e-14);
    }

    #[test]
    fn field_outside_strip_is_rejected() {
        let wp = WaveParameters::new(0.3, 0.0, 0.0).unwrap();
        assert!(field_sample(0.0, 1.2, 0.0, &wp).is_err());
        assert!(field_sample(0.0, -0.1, 0.0, &wp).is_err());
    }

    #[test]
    fn deep_water_field_does_not_overflow() {
        let wp = WaveParameters::new(200.0, 0.0, 0.0).unwrap();
        let f = field_sample(0.0, 1.0, 0.0, &wp).unwrap();
        assert!(f.u.is_finite() && f.p.is_finite());
        // at the surface p = c^2 * kd * coth(kd) -> c^2 kd
        assert!((f.p - wp.c * wp.c * WAVENUMBER * 200.0).abs() < 1e-9 * f.p);
    }

    #[test]
    fn curvature_cases() {
        assert_eq!(mean_curvature(0.0, 3.5), 3.5);
        assert_eq!(mean_curvature(0.7, 0.0), 0.0);
        assert!((mean_curvature(1.0, 2.0) - 2.0 / 2f64.powf(1.5)).abs() < 1e-16);
    }

    #[test]
    fn wavelength_maps_to_unit_length() {
        let p = water();
        let s = PhysicalState {
            x: Some(p.lambda),
            ..Default::default()
        };
        let n = scale_variables(ScaleDirection::ToNondimensional, &s, &p).unwrap();
        assert!((n.x.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hydrostatic_pressure_of_still_water() {
        let mut p = water();
        p.rho = 1.0;
        for z in [0.0, 0.25, 1.0] {
            let s = PhysicalState {
                z: Some(z),
                p: Some(0.0),
                ..Default::default()
            };
            let d = scale_variables(ScaleDirection::ToDimensional, &s, &p).unwrap();
            let expected = p.p0 + p.g * p.h0 * (1.0 - z);
            assert!((d.p.unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_needs_amplitude_and_depth() {
        let mut p = water();
        p.a_amp = 0.0;
        let s = PhysicalState {
            u: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            scale_variables(ScaleDirection::ToNondimensional, &s, &p),
            Err(Error::Configuration(_))
        ));
        let s = PhysicalState {
            p: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            scale_variables(ScaleDirection::ToDimensional, &s, &water()),
            Err(Error::Configuration(_))
        ));
    }

    proptest! {
        #[test]
        fn scaling_round_trip(
            x in -5.0f64..5.0, z in 0.0f64..0.02, t in 0.0f64..10.0,
            u in -1.0f64..1.0, v in -1.0f64..1.0, pr in 1e5f64..1.1e5, eta in -1e-3f64..1e-3,
        ) {
            let p = water();
            let s = PhysicalState { x: Some(x), z: Some(z), t: Some(t), u: Some(u), v: Some(v), p: Some(pr), eta: Some(eta) };
            let n = scale_variables(ScaleDirection::ToNondimensional, &s, &p).unwrap();
            let back = scale_variables(ScaleDirection::ToDimensional, &n, &p).unwrap();
            let close = |a: Option<f64>, b: Option<f64>| {
                let (a, b) = (a.unwrap(), b.unwrap());
                (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1e-300)
            };
            prop_assert!(close(back.x, s.x) && close(back.z, s.z) && close(back.t, s.t));
            prop_assert!(close(back.u, s.u) && close(back.v, s.v) && close(back.eta, s.eta));
            prop_assert!(close(back.p, s.p));
        }

        #[test]
        fn field_is_periodic_in_x(x in -3.0f64..3.0, z in 0.0f64..1.0, t in 0.0f64..5.0) {
            let wp = WaveParameters::new(0.4, 0.5, 0.2).unwrap();
            let a = field_sample(x, z, t, &wp).unwrap();
            let b = field_sample(x + 1.0, z, t, &wp).unwrap();
            prop_assert!((a.u - b.u).abs() < 1e-12);
            prop_assert!((a.v - b.v).abs() < 1e-12);
            prop_assert!((a.p - b.p).abs() < 1e-12);
            prop_assert!((a.eta - b.eta).abs() < 1e-12);
        }

        #[test]
        fn linear_system_residuals_vanish(x in 0.0f64..1.0, z in 0.0f64..1.0, t in 0.0f64..3.0) {
            let wp = WaveParameters::new(0.5, 2.0, 0.3).unwrap();
            let r = linear_residuals(x, z, t, &wp, 1e-4);
            prop_assert!(r.max_abs() < 1e-6, "{:?}", r);
        }
    }
}
