//! Closed-form particle paths when the current equals the wave speed.
//!
//! With `b = 0` the moving-frame system decouples into
//! `X'' = -a^2 sin 2X` and `Z'' = a^2 sinh 2Z`, with first integrals
//! `c1 = X'^2 - a^2 cos 2X` and `c2 = Z'^2 - a^2 cosh 2Z`. Writing
//! `y = tan X` and `w = tanh Z`,
//!
//! ```text
//! y'^2 = a^2 (1 - y^4) + c1 (1 + y^2)^2
//! w'^2 = a^2 (1 - w^4) + c2 (1 - w^2)^2
//! ```
//!
//! which integrate to `y = ±Y cn(sqrt(2) a (t - t0); m1)` when
//! `-a^2 < c1 < a^2` and `w = ±dn(sqrt(a^2 - c2) (t - t0); m2)` when
//! `c2 <= -a^2`. Other regimes have no closed form here and are integrated
//! numerically.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particle_dynamics::ode::{self, DenseOutput, IntegratorConfig};
use crate::particle_dynamics::{
    rhs_moving, ComponentSource, MethodTag, MovingFrameState, ParticleState, PathEvaluator, Trajectory, TrajectoryMeta,
};
use crate::special_functions::{complete_elliptic_k, incomplete_elliptic_f, jacobi_elliptic, EllipticModulusSquared};
use crate::tolerances::{escape_height, CASE_SELECTION, HYPERBOLIC_LIMIT_GAP};
use crate::wave_model::{WaveParameters, WAVENUMBER};

/// Relative width of the regime boundaries `c = ±a^2`.
const BOUNDARY_REL: f64 = 1e-12;

/// `a^2 = 8 pi^4 delta^2 c^2 / sinh^2(2 pi delta)`.
pub fn a_squared(wp: &WaveParameters) -> f64 {
    wp.a_squared()
}

/// Position of a first-integral constant relative to `±a^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentRegime {
    /// `c - a^2 > 0`.
    CMinusA2Positive,
    /// `c - a^2 < 0 < c + a^2`.
    Mixed,
    /// `c - a^2 < 0` and `c + a^2 < 0`.
    BothNegative,
    /// `c = a^2` to rounding.
    UpperBoundary,
    /// `c = -a^2` to rounding.
    LowerBoundary,
}

impl ComponentRegime {
    pub fn classify(c: f64, a_sq: f64) -> Self {
        let tol = BOUNDARY_REL * a_sq;
        if (c - a_sq).abs() <= tol {
            Self::UpperBoundary
        } else if (c + a_sq).abs() <= tol {
            Self::LowerBoundary
        } else if c > a_sq {
            Self::CMinusA2Positive
        } else if c > -a_sq {
            Self::Mixed
        } else {
            Self::BothNegative
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeTag {
    pub x_regime: ComponentRegime,
    pub z_regime: ComponentRegime,
}

impl RegimeTag {
    /// The cn solution for `y` exists for `-a^2 <= c1 < a^2`.
    pub fn x_closed_form(&self) -> bool {
        matches!(self.x_regime, ComponentRegime::Mixed | ComponentRegime::LowerBoundary)
    }

    /// The dn solution for `w` exists for `c2 <= -a^2`.
    pub fn z_closed_form(&self) -> bool {
        matches!(
            self.z_regime,
            ComponentRegime::BothNegative | ComponentRegime::LowerBoundary
        )
    }
}

/// Moving-frame state and velocity at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct InitialMotion {
    pub X0: f64,
    pub Z0: f64,
    pub Xdot0: f64,
    pub Zdot0: f64,
}

/// First-integral constants, elliptic parameters, branch signs and time
/// offsets of one Case I solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseIConstants {
    pub a_sq: f64,
    pub c1: f64,
    pub c2: f64,
    /// `k1^2 = (a^2 + c1) / (2 a^2)`, present when the cn solution applies.
    pub m1: Option<EllipticModulusSquared>,
    /// `k2^2 = 2 a^2 / (a^2 - c2)`, present when the dn solution applies.
    pub m2: Option<EllipticModulusSquared>,
    pub sign_x: f64,
    pub sign_z: f64,
    pub t0_x: Option<f64>,
    pub t0_z: Option<f64>,
    /// Multiple of pi added to `arctan y` to recover `X`.
    pub x_shift: f64,
    pub regime: RegimeTag,
    pub initial: Option<InitialMotion>,
}

/// Builds a squared modulus, mapping values that round to 1 onto the
/// largest representable value below 1 (the hyperbolic limit).
fn modulus(m: f64) -> Option<EllipticModulusSquared> {
    if (1.0..=1.0 + HYPERBOLIC_LIMIT_GAP).contains(&m) {
        EllipticModulusSquared::new(1.0 - f64::EPSILON / 2.0).ok()
    } else {
        EllipticModulusSquared::new(m.max(0.0)).ok()
    }
}

fn is_hyperbolic(m: EllipticModulusSquared) -> bool {
    m.complement() < HYPERBOLIC_LIMIT_GAP
}

/// `F(arcsin(s) | m)` for `0 <= s <= 1`, clamping rounding overshoot.
fn f_of_sine(s: f64, m: f64) -> Result<f64> {
    let s = s.clamp(0.0, 1.0);
    if s == 1.0 {
        return complete_elliptic_k(m.min(1.0 - f64::EPSILON));
    }
    incomplete_elliptic_f(s.asin(), m.min(1.0))
}

fn sign_or(v: f64, fallback: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        fallback
    }
}

impl CaseIConstants {
    /// Constants given directly, for example to study the regimes that
    /// physical initial data never reaches.
    pub fn from_integration_constants(
        wp: &WaveParameters,
        c1: f64,
        c2: f64,
        sign_x: f64,
        sign_z: f64,
        t0_x: f64,
        t0_z: f64,
    ) -> Result<Self> {
        require_co_moving(wp)?;
        for (name, v) in [("c1", c1), ("c2", c2), ("t0_x", t0_x), ("t0_z", t0_z)] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        let a_sq = wp.a_squared();
        let mut k = Self::bare(a_sq, c1, c2);
        k.sign_x = sign_or(sign_x, 1.0);
        k.sign_z = sign_or(sign_z, 1.0);
        if k.m1.is_some() {
            k.t0_x = Some(t0_x);
        }
        if k.m2.is_some() {
            k.t0_z = Some(t0_z);
        }
        Ok(k)
    }

    fn bare(a_sq: f64, c1: f64, c2: f64) -> Self {
        let regime = RegimeTag {
            x_regime: ComponentRegime::classify(c1, a_sq),
            z_regime: ComponentRegime::classify(c2, a_sq),
        };
        let m1 = if regime.x_closed_form() {
            modulus((a_sq + c1) / (2.0 * a_sq))
        } else {
            None
        };
        let m2 = if regime.z_closed_form() {
            modulus(2.0 * a_sq / (a_sq - c2))
        } else {
            None
        };
        Self {
            a_sq,
            c1,
            c2,
            m1,
            m2,
            sign_x: 1.0,
            sign_z: 1.0,
            t0_x: None,
            t0_z: None,
            x_shift: 0.0,
            regime,
            initial: None,
        }
    }

    /// Constants, signs and offsets matching a moving-frame state and
    /// velocity at `t = 0`.
    #[allow(non_snake_case)]
    pub fn fit_moving_state(a_sq: f64, motion: InitialMotion) -> Result<Self> {
        let InitialMotion { X0, Z0, Xdot0, Zdot0 } = motion;
        if ![X0, Z0, Xdot0, Zdot0].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("initial motion must be finite".into()));
        }
        let c1 = Xdot0 * Xdot0 - a_sq * (2.0 * X0).cos();
        let c2 = Zdot0 * Zdot0 - a_sq * (2.0 * Z0).cosh();
        let mut k = Self::bare(a_sq, c1, c2);
        k.initial = Some(motion);
        let a = a_sq.sqrt();

        let principal = X0.tan().atan();
        k.x_shift = ((X0 - principal) / PI).round() * PI;
        if let Some(m1) = k.m1 {
            let y0 = X0.tan();
            let ydot0 = Xdot0 * (1.0 + y0 * y0);
            let amp = ((a_sq + c1) / (a_sq - c1)).max(0.0).sqrt();
            k.sign_x = sign_or(y0, 1.0);
            let u_star = if amp == 0.0 {
                0.0
            } else {
                let ratio = (y0.abs() / amp).min(1.0);
                // cn(u*) = ratio  <=>  sn(u*) = sqrt(1 - ratio^2)
                f_of_sine((1.0 - ratio * ratio).sqrt(), m1.value())?
            };
            let u0 = -k.sign_x * sign_or(ydot0, 1.0) * u_star;
            k.t0_x = Some(-u0 / (2.0f64.sqrt() * a));
        }
        if let Some(m2) = k.m2 {
            let w0 = Z0.tanh();
            let wdot0 = Zdot0 * (1.0 - w0 * w0);
            k.sign_z = sign_or(w0, 1.0);
            // dn(u*)^2 = w0^2  <=>  sn(u*)^2 = (1 - w0^2) / m
            let sech_sq = 1.0 / Z0.cosh().powi(2);
            let u_star = f_of_sine((sech_sq / m2.value()).sqrt(), m2.value())?;
            let u0 = -k.sign_z * sign_or(wdot0, 1.0) * u_star;
            k.t0_z = Some(-u0 / (a_sq - c2).sqrt());
        }
        Ok(k)
    }

    /// Period `4 K(m1) / (sqrt(2) a)` of `y`, when the cn solution applies.
    pub fn x_period(&self) -> Option<f64> {
        let m1 = self.m1?;
        if is_hyperbolic(m1) {
            return None;
        }
        Some(4.0 * complete_elliptic_k(m1.value()).ok()? / (2.0 * self.a_sq).sqrt())
    }

    /// Period `2 K(m2) / sqrt(a^2 - c2)` of `w`, when the dn solution applies.
    pub fn z_period(&self) -> Option<f64> {
        let m2 = self.m2?;
        if is_hyperbolic(m2) {
            return None;
        }
        Some(2.0 * complete_elliptic_k(m2.value()).ok()? / (self.a_sq - self.c2).sqrt())
    }
}

fn require_co_moving(wp: &WaveParameters) -> Result<()> {
    if (wp.c0 - wp.c).abs() > CASE_SELECTION {
        return Err(Error::WrongCase(format!(
            "the elliptic-function solution needs c0 = c, got c0 = {} and c = {}",
            wp.c0, wp.c
        )));
    }
    Ok(())
}

/// First integrals `(c1, c2)` of a moving-frame state and velocity.
#[allow(non_snake_case)]
pub fn first_integrals(X: f64, Z: f64, Xdot: f64, Zdot: f64, a_sq: f64) -> (f64, f64) {
    (
        Xdot * Xdot - a_sq * (2.0 * X).cos(),
        Zdot * Zdot - a_sq * (2.0 * Z).cosh(),
    )
}

/// Constants for the particle at `(X0, Z0)` at `t = 0`.
#[allow(non_snake_case)]
pub fn first_integral_constants(X0: f64, Z0: f64, wp: &WaveParameters) -> Result<CaseIConstants> {
    require_co_moving(wp)?;
    if !(Z0 >= 0.0) {
        return Err(Error::Domain(format!("Z0 must be non-negative, got {Z0}")));
    }
    // b is exactly zero in this case.
    let co = WaveParameters { c0: wp.c, ..*wp };
    let (Xdot0, Zdot0) = rhs_moving(MovingFrameState { X: X0, Z: Z0, t: 0.0 }, &co);
    CaseIConstants::fit_moving_state(wp.a_squared(), InitialMotion { X0, Z0, Xdot0, Zdot0 })
}

pub fn regime_classify(constants: &CaseIConstants) -> RegimeTag {
    RegimeTag {
        x_regime: ComponentRegime::classify(constants.c1, constants.a_sq),
        z_regime: ComponentRegime::classify(constants.c2, constants.a_sq),
    }
}

/// `y(t) = sign_x Y cn(sqrt(2) a (t - t0_x); m1)` with its time derivative.
pub fn y_exact_with_derivative(t: f64, k: &CaseIConstants) -> Result<(f64, f64)> {
    let (m1, t0) = match (k.m1, k.t0_x) {
        (Some(m), Some(t0)) => (m, t0),
        _ => {
            return Err(Error::RegimeUnsupported(format!(
                "no closed form for y with c1 = {} and a^2 = {} ({:?}); use the numerical integrator",
                k.c1, k.a_sq, k.regime.x_regime
            )))
        }
    };
    let amp = ((k.a_sq + k.c1) / (k.a_sq - k.c1)).max(0.0).sqrt();
    let rate = (2.0 * k.a_sq).sqrt();
    let j = jacobi_elliptic(rate * (t - t0), m1);
    Ok((k.sign_x * amp * j.cn, -k.sign_x * amp * rate * j.sn * j.dn))
}

pub fn y_exact(t: f64, k: &CaseIConstants) -> Result<f64> {
    y_exact_with_derivative(t, k).map(|(y, _)| y)
}

/// `w(t) = sign_z dn(sqrt(a^2 - c2) (t - t0_z); m2)` with its time derivative.
pub fn w_exact_with_derivative(t: f64, k: &CaseIConstants) -> Result<(f64, f64)> {
    let (m2, rate, j) = z_jacobi(t, k)?;
    Ok((k.sign_z * j.dn, -k.sign_z * m2.value() * rate * j.sn * j.cn))
}

pub fn w_exact(t: f64, k: &CaseIConstants) -> Result<f64> {
    w_exact_with_derivative(t, k).map(|(w, _)| w)
}

fn z_jacobi(
    t: f64,
    k: &CaseIConstants,
) -> Result<(EllipticModulusSquared, f64, crate::special_functions::JacobiTriple)> {
    let (m2, t0) = match (k.m2, k.t0_z) {
        (Some(m), Some(t0)) => (m, t0),
        _ => {
            return Err(Error::RegimeUnsupported(format!(
                "no closed form for w with c2 = {} and a^2 = {} ({:?}); use the numerical integrator",
                k.c2, k.a_sq, k.regime.z_regime
            )))
        }
    };
    let rate = (k.a_sq - k.c2).sqrt();
    Ok((m2, rate, jacobi_elliptic(rate * (t - t0), m2)))
}

/// `Z = artanh(w)` evaluated as `ln((1 + dn) / (sqrt(m) |sn|))`, which keeps
/// full accuracy as `w -> 1`.
pub fn z_closed_form(t: f64, k: &CaseIConstants) -> Result<f64> {
    let (m2, _, j) = z_jacobi(t, k)?;
    let big = ((1.0 + j.dn) / (m2.value().sqrt() * j.sn.abs())).ln();
    Ok(k.sign_z * big)
}

/// `X = arctan(y) + x_shift`.
pub fn x_closed_form(t: f64, k: &CaseIConstants) -> Result<f64> {
    Ok(y_exact(t, k)?.atan() + k.x_shift)
}

/// `y'^2 - a^2 (1 - y^4) - c1 (1 + y^2)^2`.
pub fn y_ode_residual(y: f64, ydot: f64, a_sq: f64, c1: f64) -> f64 {
    let s = 1.0 + y * y;
    ydot * ydot - a_sq * (1.0 - y.powi(4)) - c1 * s * s
}

/// `w'^2 - a^2 (1 - w^4) - c2 (1 - w^2)^2`.
pub fn w_ode_residual(w: f64, wdot: f64, a_sq: f64, c2: f64) -> f64 {
    let s = 1.0 - w * w;
    wdot * wdot - a_sq * (1.0 - w.powi(4)) - c2 * s * s
}

/// Earliest `t >= 0` at which the dn solution reaches `|Z| = z_cap`.
fn z_escape_time(k: &CaseIConstants, z_cap: f64) -> Result<Option<f64>> {
    let (Some(m2), Some(t0)) = (k.m2, k.t0_z) else {
        return Ok(None);
    };
    let m = m2.value();
    let rate = (k.a_sq - k.c2).sqrt();
    let sech_sq = 1.0 / z_cap.cosh().powi(2);
    let u_cap = f_of_sine((sech_sq / m).sqrt(), m)?;
    let u0 = -rate * t0;
    // |Z| >= z_cap on the windows |u - 2nK| <= u_cap.
    let start = if is_hyperbolic(m2) {
        if u0 < -u_cap {
            -u_cap
        } else {
            return Ok(None);
        }
    } else {
        let two_k = 2.0 * complete_elliptic_k(m)?;
        let n = ((u0 + u_cap) / two_k).ceil();
        n * two_k - u_cap
    };
    Ok(Some(((start - u0) / rate).max(0.0)))
}

fn gd(x: f64) -> f64 {
    x.sinh().atan()
}

fn gd_inv(x: f64) -> f64 {
    x.sin().atanh()
}

/// Bed particle: `X' = A cos X` integrates to `X = gd(A t + gd^-1(X0))` on
/// the chart `|X| < pi/2`, and by reflection on the others.
#[allow(non_snake_case)]
fn bed_x(t: f64, X0: f64, prefactor: f64) -> f64 {
    let n = (X0 / (2.0 * PI)).round();
    let r = X0 - 2.0 * PI * n;
    let base = 2.0 * PI * n;
    if r.abs() <= FRAC_PI_2 {
        base + gd(prefactor * t + gd_inv(r))
    } else if r > 0.0 {
        let q = PI - r;
        base + PI - gd(prefactor * t + gd_inv(q))
    } else {
        let q = -PI - r;
        base - PI - gd(prefactor * t + gd_inv(q))
    }
}

fn fallback_config() -> IntegratorConfig {
    IntegratorConfig::with_tolerances(1e-12, 1e-12)
}

/// Integrates `X'' = -a^2 sin 2X` from `(X0, X'0)`; the X equation is
/// autonomous so this serves as the per-component numerical fallback.
#[allow(non_snake_case)]
pub fn integrate_x_component(
    X0: f64,
    Xdot0: f64,
    a_sq: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<DenseOutput<2>> {
    let sys = move |_t: f64, y: &[f64; 2]| [y[1], -a_sq * (2.0 * y[0]).sin()];
    let cfg = IntegratorConfig {
        dense_output: true,
        ..*cfg
    };
    let sol = ode::solve(&sys, 0.0, [X0, Xdot0], t_end, &cfg, |_, _| false)?;
    sol.dense
        .ok_or_else(|| Error::NumericalFailure("dense output missing".into()))
}

#[derive(Clone)]
enum XPath {
    Closed,
    Bed { x0: f64 },
    Numeric(Arc<DenseOutput<2>>),
}

#[derive(Clone)]
enum ZPath {
    Closed,
    Bed,
}

/// Continuous evaluation of a Case I trajectory in the lab frame.
#[derive(Clone)]
pub struct CaseISolution {
    pub constants: CaseIConstants,
    wp: WaveParameters,
    x_path: XPath,
    z_path: ZPath,
    t_limit: f64,
}

impl CaseISolution {
    #[allow(non_snake_case)]
    pub fn moving_state(&self, t: f64) -> Option<(f64, f64)> {
        if !(t >= 0.0 && t <= self.t_limit) {
            return None;
        }
        let X = match &self.x_path {
            XPath::Closed => x_closed_form(t, &self.constants).ok()?,
            XPath::Bed { x0 } => bed_x(t, *x0, self.wp.frame_prefactor()),
            XPath::Numeric(d) => d.eval(t)?[0],
        };
        let Z = match self.z_path {
            ZPath::Closed => z_closed_form(t, &self.constants).ok()?,
            ZPath::Bed => 0.0,
        };
        Some((X, Z))
    }
}

impl PathEvaluator for CaseISolution {
    fn position(&self, t: f64) -> Option<(f64, f64)> {
        let (x, z) = self.moving_state(t)?;
        Some((x / WAVENUMBER + self.wp.c * t, z / (WAVENUMBER * self.wp.delta)))
    }
}

fn validate_grid(t_grid: &[f64]) -> Result<f64> {
    let last = *t_grid
        .last()
        .ok_or_else(|| Error::Domain("time grid is empty".into()))?;
    if !(t_grid[0] >= 0.0) || !last.is_finite() {
        return Err(Error::Domain("time grid must be finite and start at t >= 0".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("time grid must increase strictly".into()));
    }
    Ok(last)
}

fn assemble(solution: CaseISolution, t_grid: &[f64], mut meta: TrajectoryMeta) -> Result<Trajectory> {
    let limit = solution.t_limit;
    let mut samples = Vec::with_capacity(t_grid.len());
    for &t in t_grid.iter().take_while(|&&t| t <= limit) {
        let (x, z) = solution
            .position(t)
            .ok_or_else(|| Error::NumericalFailure(format!("closed form could not be evaluated at t = {t}")))?;
        samples.push(ParticleState { x, z, t });
    }
    if samples.len() < t_grid.len() {
        meta.truncated_at = Some(limit);
    }
    if samples.iter().any(|s| !(0.0..=1.0).contains(&s.z)) {
        let msg = "particle leaves the strip 0 <= z <= 1; the linear field is continued analytically".to_string();
        warn!("{msg}");
        meta.warnings.push(msg);
    }
    Ok(Trajectory::new(samples, meta)?.with_evaluator(Arc::new(solution)))
}

fn escape_limit(k: &CaseIConstants, wp: &WaveParameters, meta: &mut TrajectoryMeta, t_end: f64) -> Result<f64> {
    let z_cap = WAVENUMBER * wp.delta * escape_height(wp.delta);
    match z_escape_time(k, z_cap)? {
        Some(t) if t < t_end => {
            let msg = format!(
                "w reaches tanh of the escape height (z = {}) at t = {t}; trajectory truncated before the blow-up of Z",
                escape_height(wp.delta)
            );
            warn!("{msg}");
            meta.warnings.push(msg);
            Ok(t)
        }
        _ => Ok(f64::INFINITY),
    }
}

/// Particle path for `c0 = c` starting at `(x0, z0)` at `t = 0`, sampled
/// at `t_grid`.
///
/// `z` always has a closed form (dn solution, or `z = 0` on the bed). For
/// `x` physical data gives `c1 >= a^2`, a regime without closed form; `x`
/// then comes from the numerical integrator (or from the elementary bed
/// solution when `z0 = 0`) and the metadata says so.
pub fn trajectory_case1(x0: f64, z0: f64, t_grid: &[f64], wp: &WaveParameters) -> Result<Trajectory> {
    require_co_moving(wp)?;
    if !x0.is_finite() || !(0.0..=1.0).contains(&z0) {
        return Err(Error::Domain(format!(
            "need finite x0 and 0 <= z0 <= 1, got x0 = {x0}, z0 = {z0}"
        )));
    }
    let t_end = validate_grid(t_grid)?;
    let x_start = WAVENUMBER * x0;
    let z_start = WAVENUMBER * wp.delta * z0;
    let k = first_integral_constants(x_start, z_start, wp)?;
    let mut meta = TrajectoryMeta {
        params: *wp,
        method: MethodTag::ExactCaseI,
        x_source: ComponentSource::ClosedForm,
        z_source: ComponentSource::ClosedForm,
        exact_until: None,
        truncated_at: None,
        warnings: Vec::new(),
    };

    let (x_path, z_path, t_limit) = if z0 == 0.0 {
        meta.x_source = ComponentSource::Degenerate;
        meta.z_source = ComponentSource::Degenerate;
        (XPath::Bed { x0: x_start }, ZPath::Bed, f64::INFINITY)
    } else {
        let t_limit = escape_limit(&k, wp, &mut meta, t_end)?;
        let x_path = if k.regime.x_closed_form() {
            XPath::Closed
        } else {
            meta.x_source = ComponentSource::NumericFallback;
            let msg = format!(
                "x has no closed form for c1 = {} >= a^2 = {}; integrated numerically",
                k.c1, k.a_sq
            );
            meta.warnings.push(msg);
            let motion = k.initial.expect("fitted constants carry initial data");
            let horizon = t_limit.min(t_end);
            if horizon > 0.0 {
                XPath::Numeric(Arc::new(integrate_x_component(
                    motion.X0,
                    motion.Xdot0,
                    k.a_sq,
                    horizon,
                    &fallback_config(),
                )?))
            } else {
                XPath::Bed { x0: x_start }
            }
        };
        if !k.regime.z_closed_form() {
            return Err(Error::NumericalFailure(format!(
                "unexpected z regime {:?} for physical data",
                k.regime.z_regime
            )));
        }
        (x_path, ZPath::Closed, t_limit)
    };

    let solution = CaseISolution {
        constants: k,
        wp: *wp,
        x_path,
        z_path,
        t_limit,
    };
    assemble(solution, t_grid, meta)
}

/// Path built from explicitly supplied constants; both components must be
/// in closed-form regimes.
pub fn trajectory_case1_from_constants(k: &CaseIConstants, t_grid: &[f64], wp: &WaveParameters) -> Result<Trajectory> {
    require_co_moving(wp)?;
    if !k.regime.x_closed_form() || !k.regime.z_closed_form() {
        return Err(Error::RegimeUnsupported(format!(
            "constants c1 = {}, c2 = {} are outside the closed-form regimes ({:?})",
            k.c1, k.c2, k.regime
        )));
    }
    let t_end = validate_grid(t_grid)?;
    let mut meta = TrajectoryMeta {
        params: *wp,
        method: MethodTag::ExactCaseI,
        x_source: ComponentSource::ClosedForm,
        z_source: ComponentSource::ClosedForm,
        exact_until: None,
        truncated_at: None,
        warnings: Vec::new(),
    };
    let t_limit = escape_limit(k, wp, &mut meta, t_end)?;
    let solution = CaseISolution {
        constants: *k,
        wp: *wp,
        x_path: XPath::Closed,
        z_path: ZPath::Closed,
        t_limit,
    };
    assemble(solution, t_grid, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wp(delta: f64) -> WaveParameters {
        WaveParameters::co_moving(delta, 0.0).unwrap()
    }

    #[test]
    fn a_squared_is_half_prefactor_squared() {
        let w = wp(0.2);
        let a = w.frame_prefactor();
        assert!((a_squared(&w) - 0.5 * a * a).abs() < 1e-14 * a * a);
        let w2 = WaveParameters::co_moving(0.2, 1.0).unwrap();
        let ratio = a_squared(&w2) / a_squared(&w);
        assert!((ratio - (w2.c / w.c).powi(2)).abs() < 1e-13);
    }

    #[test]
    fn bed_and_node_constants() {
        let w = wp(0.5);
        let a2 = w.a_squared();
        let k = first_integral_constants(0.7, 0.0, &w).unwrap();
        assert!((k.c1 - a2).abs() < 1e-12 * a2 && (k.c2 + a2).abs() < 1e-12 * a2);
        let k = first_integral_constants(FRAC_PI_2, 0.8, &w).unwrap();
        assert!((k.c1 - a2).abs() < 1e-12 * a2);
    }

    #[test]
    fn wrong_case_is_rejected() {
        let w = WaveParameters::new(0.5, 0.0, 0.0).unwrap();
        assert!(matches!(
            first_integral_constants(0.1, 0.1, &w),
            Err(Error::WrongCase(_))
        ));
    }

    #[test]
    fn classification_examples() {
        let a2 = 2.0;
        assert_eq!(ComponentRegime::classify(0.0, a2), ComponentRegime::Mixed);
        assert_eq!(ComponentRegime::classify(3.0, a2), ComponentRegime::CMinusA2Positive);
        let w = wp(0.5);
        let a2 = w.a_squared();
        let k = CaseIConstants::from_integration_constants(&w, 0.0, -2.0 * a2, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(k.regime.z_regime, ComponentRegime::BothNegative);
        assert!((k.m2.unwrap().value() - 2.0 / 3.0).abs() < 1e-15);
        let k = first_integral_constants(0.3, 0.5, &w).unwrap();
        assert_eq!(k.regime.x_regime, ComponentRegime::CMinusA2Positive);
        assert!(matches!(y_exact(0.0, &k), Err(Error::RegimeUnsupported(_))));
    }

    #[test]
    fn closed_forms_at_offsets() {
        let w = wp(0.8);
        let a2 = w.a_squared();
        let (c1, c2) = (0.3 * a2, -1.7 * a2);
        let k = CaseIConstants::from_integration_constants(&w, c1, c2, 1.0, 1.0, 0.4, -0.2).unwrap();
        let amp = ((a2 + c1) / (a2 - c1)).sqrt();
        assert!((y_exact(0.4, &k).unwrap() - amp).abs() < 1e-14);
        assert_eq!(w_exact(-0.2, &k).unwrap(), 1.0);
        let kk = complete_elliptic_k(k.m2.unwrap().value()).unwrap();
        let t = -0.2 + kk / (a2 - c2).sqrt();
        let expect = (1.0 - k.m2.unwrap().value()).sqrt();
        let got = w_exact(t, &k).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} {expect} {:?}", k.m2);
        let k0 = CaseIConstants::from_integration_constants(&w, -a2, c2, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(y_exact(0.3, &k0).unwrap(), 0.0);
    }

    #[test]
    fn fitted_trajectory_starts_at_initial_point() {
        let w = wp(1.0);
        let grid: Vec<f64> = (0..=20).map(|i| 0.25 * i as f64).collect();
        for (x0, z0) in [(-0.2, 0.3), (0.1, 0.2), (0.3, 0.0), (0.6, 0.5)] {
            let tr = trajectory_case1(x0, z0, &grid, &w).unwrap();
            let s = tr.samples[0];
            assert!((s.x - x0).abs() < 1e-10 && (s.z - z0).abs() < 1e-10, "{x0} {z0} {s:?}");
        }
    }

    #[test]
    fn bed_particle_matches_integrator() {
        let w = wp(0.5);
        let grid: Vec<f64> = (0..=10).map(|i| 0.3 * i as f64).collect();
        for x0 in [0.1, 0.4, -0.35, 0.25] {
            let tr = trajectory_case1(x0, 0.0, &grid, &w).unwrap();
            let num = crate::particle_dynamics::integrate(
                ParticleState::new(x0, 0.0, 0.0),
                3.0,
                &w,
                &IntegratorConfig::with_tolerances(1e-12, 1e-12),
            )
            .unwrap()
            .resample(&grid)
            .unwrap();
            let (dx, dz) = tr.max_difference(&num).unwrap();
            assert!(dx < 1e-9 && dz == 0.0, "x0 = {x0}: {dx}");
        }
    }

    #[test]
    fn escape_truncates_trajectory() {
        let w = wp(0.3);
        let grid: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
        let tr = trajectory_case1(-0.2, 0.9, &grid, &w).unwrap();
        assert!(tr.meta.truncated_at.is_some());
        assert!(tr.len() < grid.len());
    }

    proptest! {
        #[test]
        fn physical_constant_identities(x in -3.0..3.0f64, zr in 0.0..1.0f64, delta in 0.1..1.5f64, we in 0.0..2.0f64) {
            let w = WaveParameters::co_moving(delta, we).unwrap();
            let z = WAVENUMBER * delta * zr;
            let k = first_integral_constants(x, z, &w).unwrap();
            let a2 = k.a_sq;
            let expect = a2 * (1.0 + 2.0 * x.cos().powi(2) * z.sinh().powi(2));
            prop_assert!((k.c1 - expect).abs() < 1e-10 * expect.max(1.0));
            prop_assert!((k.c1 + k.c2).abs() < 1e-10 * k.c1.abs().max(1.0));
        }

        #[test]
        fn scalar_residuals_vanish(f1 in -0.95..0.95f64, f2 in 1.05..4.0f64, t in -5.0..5.0f64) {
            let w = wp(0.7);
            let a2 = w.a_squared();
            let k = CaseIConstants::from_integration_constants(&w, f1 * a2, -f2 * a2, 1.0, -1.0, 0.2, -0.7).unwrap();
            let (y, yd) = y_exact_with_derivative(t, &k).unwrap();
            let (wv, wd) = w_exact_with_derivative(t, &k).unwrap();
            prop_assert!(y_ode_residual(y, yd, a2, k.c1).abs() < 1e-8);
            prop_assert!(w_ode_residual(wv, wd, a2, k.c2).abs() < 1e-8);
        }
    }
}
