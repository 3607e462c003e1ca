//! Parametric particle paths for a current different from the wave speed.
//!
//! With `b = 2 pi (c0 - c) != 0` and `y = tan X`, the moving-frame system
//! reduces to an Abel equation of the second kind whose canonical form
//! `u du/dxi - u = (2a^2/b) exp(2 xi / b) - b` has the parametric solution
//!
//! ```text
//! u(tau)  = tau (C - b ln(tau + s)) / s + b,        s = sqrt(tau^2 - 2a^2)
//! xi(tau) = -b ln| s / (C - b ln(tau + s)) |
//! y(tau)  = ±sqrt(s^2 / (C - b ln(tau + s))^2 - 1)
//! dt      = dtau / (s sqrt(s^2 - (C - b ln(tau + s))^2))
//! ```
//!
//! Along a particle path `tau = A cosh Z`, so `Z` itself is used as the
//! integration variable for `t(tau)`. The path splits into branches on
//! which `Z` is monotone; branches end at turning points of `Z` (`y = 0`),
//! where the chart `y = tan X` breaks down (`C - b ln(tau + s) = 0`), or at
//! the escape height.

use std::f64::consts::PI;
use std::sync::Arc;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particle_dynamics::ode::IntegratorConfig;
use crate::particle_dynamics::{
    integrate, rhs_moving, ComponentSource, MethodTag, MovingFrameState, ParticleState, PathEvaluator, Trajectory,
    TrajectoryMeta,
};
use crate::quadrature::{gl16, gl8};
use crate::roots::{brent, newton_increasing};
use crate::tolerances::{escape_height, CASE_SELECTION};
use crate::wave_model::{WaveParameters, WAVENUMBER};

/// Default number of cells per branch in the cumulative `t(tau)` table.
pub const DEFAULT_CELLS: usize = 96;

/// Lowest `Z` a branch may reach; the bed itself is reached only as
/// `t -> infinity`.
const BED_FLOOR: f64 = 1e-8;

/// Longest panel of the time quadrature behind the vertical coordinate.
const Z_PANEL: f64 = 0.05;

/// Which square root `xi(tau)` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadicandConvention {
    /// `sqrt(tau^2 - 2a^2)` in both `u` and `xi`.
    Reconciled,
    /// `sqrt(tau^2 - a^2)` in `xi`; fails the canonical-form check.
    AsPrinted,
}

/// How a monotone branch of `Z(t)` ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchEnd {
    TurningPoint,
    ChartExit,
    EscapeCap,
    BedFloor,
}

/// One monotone branch in `theta = Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub theta_start: f64,
    pub theta_end: f64,
    /// Sign of `dZ/dt` on the branch.
    pub direction: f64,
    pub start_is_turning: bool,
    pub end: BranchEnd,
}

/// Integration constants and branch structure of one Case II path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseIIConstants {
    pub a_sq: f64,
    pub b: f64,
    /// Constant `C` of the parametric solution.
    pub c: f64,
    /// Additive constant of `ln tanh(Z/2)`.
    pub z_const: f64,
    /// Smallest and largest `tau` visited by the branches.
    pub tau_domain: (f64, f64),
    pub tau0: f64,
    pub u0: f64,
    pub xi0: f64,
    pub y0: f64,
    pub theta0: f64,
    /// Sign of `C - b ln(tau + s)`, which equals the sign of `cos X`.
    pub chart_sign: f64,
    /// `X = x_shift + arctan y`.
    pub x_shift: f64,
    pub branches: Vec<BranchSpec>,
}

impl CaseIIConstants {
    /// `A = sqrt(2 a^2)`.
    pub fn prefactor(&self) -> f64 {
        (2.0 * self.a_sq).sqrt()
    }

    /// Value of the stream function `A sinh Z cos X + b Z`, equal to
    /// `C - b ln A`.
    pub fn stream_value(&self) -> f64 {
        self.c - self.b * self.prefactor().ln()
    }

    fn g(&self, theta: f64) -> f64 {
        let k0 = self.stream_value();
        self.prefactor() * theta.sinh() - self.chart_sign * (k0 - self.b * theta)
    }

    fn g_prime(&self, theta: f64) -> f64 {
        self.prefactor() * theta.cosh() + self.chart_sign * self.b
    }
}

/// `s(tau) = sqrt(tau^2 - 2a^2)` and `D(tau) = C - b ln(tau + s)`.
fn s_and_d(tau: f64, k: &CaseIIConstants) -> Result<(f64, f64)> {
    let a = k.prefactor();
    if !(tau > a) {
        return Err(Error::Domain(format!(
            "tau = {tau} outside the domain tau > sqrt(2 a^2) = {a}"
        )));
    }
    let s = ((tau - a) * (tau + a)).sqrt();
    let d = k.c - k.b * (tau + s).ln();
    if d == 0.0 {
        return Err(Error::Domain(format!("C - b ln(tau + s) vanishes at tau = {tau}")));
    }
    Ok((s, d))
}

/// Residual of `y'' - 2 y y'^2 / (1 + y^2) + b y y' + 2 a^2 y - b^2 y (1 + y^2)`.
pub fn abel_reduction_residual(y: f64, ydot: f64, yddot: f64, k: &CaseIIConstants) -> f64 {
    let q = 1.0 + y * y;
    yddot - 2.0 * y * ydot * ydot / q + k.b * y * ydot + 2.0 * k.a_sq * y - k.b * k.b * y * q
}

/// Residual of `u du/dxi - u - (2 a^2 / b) exp(2 xi / b) + b`.
pub fn canonical_form_residual(u_val: f64, dudxi: f64, xi: f64, k: &CaseIIConstants) -> f64 {
    u_val * dudxi - u_val - 2.0 * k.a_sq / k.b * (2.0 * xi / k.b).exp() + k.b
}

/// `(u(tau), xi(tau))` with the reconciled radicand.
pub fn parametric_solution(tau: f64, k: &CaseIIConstants) -> Result<(f64, f64)> {
    parametric_solution_with(tau, k, RadicandConvention::Reconciled)
}

pub fn parametric_solution_with(tau: f64, k: &CaseIIConstants, convention: RadicandConvention) -> Result<(f64, f64)> {
    let (s, d) = s_and_d(tau, k)?;
    let u = tau * d / s + k.b;
    let root = match convention {
        RadicandConvention::Reconciled => s,
        RadicandConvention::AsPrinted => (tau * tau - k.a_sq).sqrt(),
    };
    let xi = -k.b * (root / d).abs().ln();
    Ok((u, xi))
}

/// `y(tau) = sign sqrt(s^2 / D^2 - 1)`.
pub fn y_of_tau(tau: f64, k: &CaseIIConstants, sign: f64) -> Result<f64> {
    let (s, d) = s_and_d(tau, k)?;
    let rad = (s / d).powi(2) - 1.0;
    if rad < -1e-14 {
        return Err(Error::Domain(format!(
            "negative radicand {rad} in y(tau) at tau = {tau}"
        )));
    }
    Ok(sign.signum() * rad.max(0.0).sqrt())
}

/// Integrand `dt/dtau = 1 / (s sqrt(s^2 - D^2))` of the time relation.
pub fn dt_dtau(tau: f64, k: &CaseIIConstants) -> Result<f64> {
    let (s, d) = s_and_d(tau, k)?;
    let r = (s - d.abs()) * (s + d.abs());
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "time integrand is singular or complex at tau = {tau}"
        )));
    }
    Ok(1.0 / (s * r.sqrt()))
}

fn sign_of(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Fits `(tau0, C)` and the vertical constant to a particle at `(X0, Z0)`
/// at `t = 0`, then maps out the branches of its path.
#[allow(non_snake_case)]
pub fn fit_constants(X0: f64, Z0: f64, wp: &WaveParameters) -> Result<CaseIIConstants> {
    if (wp.c0 - wp.c).abs() <= CASE_SELECTION {
        return Err(Error::WrongCase("the Abel-equation solution needs c0 != c".into()));
    }
    if !(X0.is_finite() && Z0.is_finite()) {
        return Err(Error::Domain("initial state must be finite".into()));
    }
    if !(Z0 > 0.0) {
        return Err(Error::UnsupportedInitialData(format!(
            "Z0 = {Z0}: particles on the bed have no parametric representation"
        )));
    }
    let b = WAVENUMBER * (wp.c0 - wp.c);
    let a_sq = wp.a_squared();
    let a = (2.0 * a_sq).sqrt();

    let turns = (X0 / (2.0 * PI)).round();
    let xr = X0 - 2.0 * PI * turns;
    let cos_x = xr.cos();
    if cos_x.abs() < 1e-12 {
        return Err(Error::UnsupportedInitialData(format!(
            "X0 = {X0} sits on the boundary of the chart y = tan X"
        )));
    }
    let chart_sign = sign_of(cos_x);
    let center = if chart_sign > 0.0 {
        0.0
    } else if xr > 0.0 {
        PI
    } else {
        -PI
    };
    let x_shift = 2.0 * PI * turns + center;

    let co = WaveParameters { c0: wp.c0, ..*wp };
    let (u0, zdot0) = rhs_moving(MovingFrameState { X: X0, Z: Z0, t: 0.0 }, &co);
    let y0 = xr.tan();
    let q0 = (1.0 + y0 * y0).sqrt();
    let xi0 = -0.5 * b * (1.0 + y0 * y0).ln();
    let tau0 = (u0 - b).abs() * q0;
    if !(tau0 > a) {
        return Err(Error::UnsupportedInitialData(format!(
            "no parametric point reproduces the initial data (tau0 = {tau0} <= {a})"
        )));
    }
    let s0 = ((tau0 - a) * (tau0 + a)).sqrt();
    let d0 = chart_sign * s0 / q0;
    let c = d0 + b * (tau0 + s0).ln();
    let z_const = (0.5 * Z0).tanh().ln();

    let mut k = CaseIIConstants {
        a_sq,
        b,
        c,
        z_const,
        tau_domain: (tau0, tau0),
        tau0,
        u0,
        xi0,
        y0,
        theta0: Z0,
        chart_sign,
        x_shift,
        branches: Vec::new(),
    };

    let mut direction = sign_of(zdot0);
    let mut start_is_turning = false;
    if direction == 0.0 {
        direction = sign_of(k.g_prime(Z0));
        start_is_turning = true;
        if direction == 0.0 {
            return Err(Error::UnsupportedInitialData(
                "initial point is a stagnation point of the moving-frame flow".into(),
            ));
        }
    }
    let theta_cap = WAVENUMBER * wp.delta * escape_height(wp.delta);
    k.branches = map_branches(&k, Z0, direction, start_is_turning, theta_cap)?;
    let (lo, hi) = k
        .branches
        .iter()
        .flat_map(|br| [br.theta_start, br.theta_end])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), th| {
            (lo.min(th), hi.max(th))
        });
    k.tau_domain = (a * lo.cosh(), a * hi.cosh());
    Ok(k)
}

fn map_branches(
    k: &CaseIIConstants,
    theta0: f64,
    direction: f64,
    start_is_turning: bool,
    theta_cap: f64,
) -> Result<Vec<BranchSpec>> {
    let a = k.prefactor();
    let chi_b = k.chart_sign * k.b;
    let theta_d = k.stream_value() / k.b;
    let mut branches = Vec::new();
    let (mut start, mut dir, mut turning) = (theta0, direction, start_is_turning);

    for _ in 0..4 {
        let (mut end, mut kind) = if dir > 0.0 {
            (theta_cap.max(start), BranchEnd::EscapeCap)
        } else {
            (BED_FLOOR.min(start), BranchEnd::BedFloor)
        };
        if (dir > 0.0 && theta_d > start && theta_d < end) || (dir < 0.0 && theta_d < start && theta_d > end) {
            end = theta_d;
            kind = BranchEnd::ChartExit;
        }
        let xtol = 1e-15 * start.max(1.0);
        // g is convex, so at most one root lies ahead in either direction.
        if !turning && k.g_prime(start) * dir < 0.0 {
            let ratio = -chi_b / a;
            let theta_min = if ratio > 1.0 { ratio.acosh() } else { 0.0 };
            let bound = if dir > 0.0 {
                theta_min.min(end)
            } else {
                theta_min.max(end)
            };
            if k.g(start) <= 0.0 {
                end = start;
                kind = BranchEnd::TurningPoint;
            } else if k.g(bound) < 0.0 {
                let (lo, hi) = if dir > 0.0 { (start, bound) } else { (bound, start) };
                end = brent(|th| k.g(th), lo, hi, xtol)?;
                kind = BranchEnd::TurningPoint;
            }
        }
        if end != start {
            branches.push(BranchSpec {
                theta_start: start,
                theta_end: end,
                direction: dir,
                start_is_turning: turning,
                end: kind,
            });
        }
        if kind != BranchEnd::TurningPoint {
            break;
        }
        start = end;
        dir = -dir;
        turning = true;
    }
    if branches.is_empty() {
        return Err(Error::UnsupportedInitialData(
            "the initial point admits no branch of the parametric solution".into(),
        ));
    }
    Ok(branches)
}

/// One branch with its cumulative time table.
#[derive(Debug, Clone)]
struct BranchTable {
    spec: BranchSpec,
    delta: f64,
    g_start: f64,
    g_end: f64,
    t_offset: f64,
    cum: Vec<f64>,
}

/// Pointwise data of the path at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgePoint {
    pub branch: usize,
    pub tau: f64,
    pub theta: f64,
    /// `y = tan X`; infinite exactly at a chart exit.
    pub y: f64,
    /// `sin X`.
    pub sin_x: f64,
    /// `X = x_shift + arctan y`.
    pub x_moving: f64,
}

/// Cumulative quadrature of the time relation along every branch and its
/// inverse. Immutable after construction.
#[derive(Debug, Clone)]
pub struct TauBridge {
    constants: CaseIIConstants,
    cells: usize,
    tables: Vec<BranchTable>,
}

impl TauBridge {
    pub fn new(k: &CaseIIConstants) -> Result<Self> {
        Self::with_cells(k, DEFAULT_CELLS)
    }

    pub fn with_cells(k: &CaseIIConstants, cells: usize) -> Result<Self> {
        if cells == 0 || k.branches.is_empty() {
            return Err(Error::Domain("empty branch table".into()));
        }
        let mut bridge = TauBridge {
            constants: k.clone(),
            cells,
            tables: Vec::new(),
        };
        let mut offset = 0.0;
        for spec in &k.branches {
            let g_start = if spec.start_is_turning {
                0.0
            } else {
                k.g(spec.theta_start)
            };
            let g_end = if spec.end == BranchEnd::TurningPoint {
                0.0
            } else {
                k.g(spec.theta_end)
            };
            let mut table = BranchTable {
                spec: *spec,
                delta: spec.theta_end - spec.theta_start,
                g_start,
                g_end,
                t_offset: offset,
                cum: vec![0.0; cells + 1],
            };
            let width = PI / cells as f64;
            for i in 0..cells {
                let lo = width * i as f64;
                let piece = gl16().integrate(|phi| bridge.rate(&table, phi), lo, lo + width);
                table.cum[i + 1] = table.cum[i] + piece;
            }
            if table.cum.iter().any(|v| !v.is_finite()) || table.cum[cells] <= 0.0 {
                return Err(Error::NumericalFailure(format!(
                    "time quadrature failed on branch {spec:?}"
                )));
            }
            offset += table.cum[cells];
            bridge.tables.push(table);
        }
        Ok(bridge)
    }

    pub fn constants(&self) -> &CaseIIConstants {
        &self.constants
    }

    /// Time at which the last branch ends.
    pub fn total_time(&self) -> f64 {
        let last = self.tables.last().expect("non-empty");
        last.t_offset + last.cum[self.cells]
    }

    pub fn final_end(&self) -> BranchEnd {
        self.tables.last().expect("non-empty").spec.end
    }

    pub fn branch_count(&self) -> usize {
        self.tables.len()
    }

    /// `tau` at the cell boundaries of every branch, in path order.
    pub fn tau_grid(&self) -> Vec<f64> {
        let a = self.constants.prefactor();
        self.tables
            .iter()
            .flat_map(|tb| {
                (0..=self.cells).map(move |i| a * self.theta_at(tb, PI * i as f64 / self.cells as f64).cosh())
            })
            .collect()
    }

    /// Times matching [`TauBridge::tau_grid`].
    pub fn t_values(&self) -> Vec<f64> {
        self.tables
            .iter()
            .flat_map(|tb| tb.cum.iter().map(move |c| tb.t_offset + c))
            .collect()
    }

    fn theta_at(&self, tb: &BranchTable, phi: f64) -> f64 {
        if phi <= 0.5 * PI {
            tb.spec.theta_start + tb.delta * (0.5 * phi).sin().powi(2)
        } else {
            tb.spec.theta_end - tb.delta * (0.5 * phi).cos().powi(2)
        }
    }

    /// `(theta, R, |D|)` with `R = s^2 - D^2`, expanded about the nearer
    /// branch end so that `R` keeps its relative accuracy at turning points.
    fn geometry(&self, tb: &BranchTable, phi: f64) -> (f64, f64, f64) {
        let k = &self.constants;
        let a = k.prefactor();
        let chi_b = k.chart_sign * k.b;
        let (anchor, d, g_anchor) = if phi <= 0.5 * PI {
            (tb.spec.theta_start, tb.delta * (0.5 * phi).sin().powi(2), tb.g_start)
        } else {
            (tb.spec.theta_end, -tb.delta * (0.5 * phi).cos().powi(2), tb.g_end)
        };
        let theta = anchor + d;
        let g = g_anchor + 2.0 * a * (anchor + 0.5 * d).cosh() * (0.5 * d).sinh() + chi_b * d;
        let abs_d = if phi > 0.5 * PI && tb.spec.end == BranchEnd::ChartExit {
            -chi_b * d
        } else {
            k.chart_sign * (k.stream_value() - k.b * theta)
        };
        let r = g.max(0.0) * (a * theta.sinh() + abs_d);
        (theta, r, abs_d.max(0.0))
    }

    /// `dt/dphi` on the cosine-mapped branch.
    fn rate(&self, tb: &BranchTable, phi: f64) -> f64 {
        let (_, r, _) = self.geometry(tb, phi);
        let v = 0.5 * tb.delta.abs() * phi.sin() / r.sqrt();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    }

    fn time_in_branch(&self, tb: &BranchTable, phi: f64) -> f64 {
        let width = PI / self.cells as f64;
        let i = ((phi / width).floor() as usize).min(self.cells - 1);
        let lo = width * i as f64;
        tb.cum[i] + gl16().integrate(|p| self.rate(tb, p), lo, phi)
    }

    /// Time at which branch `branch` passes through `tau`.
    pub fn t_of_tau(&self, tau: f64, branch: usize) -> Result<f64> {
        let tb = self
            .tables
            .get(branch)
            .ok_or_else(|| Error::Range(format!("no branch {branch}")))?;
        let a = self.constants.prefactor();
        if !(tau >= a) {
            return Err(Error::Domain(format!("tau = {tau} below sqrt(2 a^2)")));
        }
        let theta = (tau / a).acosh();
        let frac = (theta - tb.spec.theta_start) / tb.delta;
        if !(-1e-12..=1.0 + 1e-12).contains(&frac) {
            return Err(Error::Domain(format!("tau = {tau} is not visited by branch {branch}")));
        }
        let phi = 2.0 * frac.clamp(0.0, 1.0).sqrt().asin();
        Ok(tb.t_offset + self.time_in_branch(tb, phi))
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let total = self.total_time();
        if !(t >= 0.0 && t <= total * (1.0 + 1e-14)) {
            return Err(Error::Range(format!(
                "t = {t} outside the covered interval [0, {total}]"
            )));
        }
        let idx = self.tables.iter().rposition(|tb| tb.t_offset <= t).unwrap_or(0);
        let tb = &self.tables[idx];
        let local = (t - tb.t_offset).clamp(0.0, tb.cum[self.cells]);
        let cell = tb.cum.partition_point(|&c| c <= local).clamp(1, self.cells) - 1;
        let width = PI / self.cells as f64;
        let (lo, hi) = (width * cell as f64, width * (cell + 1) as f64);
        let base = tb.cum[cell];
        let phi = newton_increasing(
            |p| {
                let f = base + gl16().integrate(|q| self.rate(tb, q), lo, p) - local;
                (f, self.rate(tb, p))
            },
            lo,
            hi,
            1e-15,
        )?;
        Ok((idx, phi))
    }

    /// Path data at time `t`.
    pub fn point_at(&self, t: f64) -> Result<BridgePoint> {
        let (idx, phi) = self.locate(t)?;
        let tb = &self.tables[idx];
        let k = &self.constants;
        let (theta, r, abs_d) = self.geometry(tb, phi);
        let zdot = tb.spec.direction * r.sqrt();
        let d = k.chart_sign * abs_d;
        let y = zdot / d;
        let s = (r + abs_d * abs_d).sqrt();
        Ok(BridgePoint {
            branch: idx,
            tau: k.prefactor() * theta.cosh(),
            theta,
            y,
            sin_x: zdot / s,
            x_moving: k.x_shift + y.atan(),
        })
    }
}

/// `tau(t)`, the inverse of the cumulative time relation.
pub fn tau_of_t(t: f64, bridge: &TauBridge) -> Result<f64> {
    bridge.point_at(t).map(|p| p.tau)
}

/// `t(tau)` on branch `branch`, measured from the fitted anchor `tau0`.
pub fn t_of_tau(tau: f64, branch: usize, bridge: &TauBridge) -> Result<f64> {
    bridge.t_of_tau(tau, branch)
}

/// Fourth-order central difference.
fn derivative<F: Fn(f64) -> Result<f64>>(f: F, x: f64, h: f64) -> Result<f64> {
    Ok((f(x - 2.0 * h)? - 8.0 * f(x - h)? + 8.0 * f(x + h)? - f(x + 2.0 * h)?) / (12.0 * h))
}

/// Step for differentiating in `tau` that keeps the stencil inside the
/// domain.
fn tau_step(tau: f64, k: &CaseIIConstants) -> Result<f64> {
    let (s, d) = s_and_d(tau, k)?;
    let to_d_zero = d.abs() * s / k.b.abs();
    // y(tau) has a square-root branch point where s^2 = D^2.
    let r = (s - d.abs()) * (s + d.abs());
    let to_turning = r.abs() / (2.0 * (tau + d * k.b / s)).abs();
    Ok((1e-4 * tau)
        .min(0.05 * (tau - k.prefactor()))
        .min(0.005 * to_d_zero)
        .min(0.005 * to_turning))
}

/// `(du/dtau, dxi/dtau)` of the parametric solution:
/// `u' = -2a^2 D / s^3 - b tau / s^2` and `xi' = -b (r'/r + b / (s D))`,
/// where `r` is the radicand root of the chosen convention.
pub fn parametric_derivatives(tau: f64, k: &CaseIIConstants, convention: RadicandConvention) -> Result<(f64, f64)> {
    let (s, d) = s_and_d(tau, k)?;
    let du = -2.0 * k.a_sq * d / (s * s * s) - k.b * tau / (s * s);
    let log_root = match convention {
        RadicandConvention::Reconciled => tau / (s * s),
        RadicandConvention::AsPrinted => tau / (tau * tau - k.a_sq),
    };
    Ok((du, -k.b * (log_root + k.b / (s * d))))
}

/// Canonical-form residual of the parametric solution at `tau`, with
/// `du/dxi = (du/dtau) / (dxi/dtau)`.
pub fn canonical_residual_at(tau: f64, k: &CaseIIConstants, convention: RadicandConvention) -> Result<f64> {
    let (u, xi) = parametric_solution_with(tau, k, convention)?;
    let (du, dxi) = parametric_derivatives(tau, k, convention)?;
    Ok(canonical_form_residual(u, du / dxi, xi, k))
}

/// Largest canonical-form residual over `taus` for `convention`.
pub fn canonical_form_check(taus: &[f64], k: &CaseIIConstants, convention: RadicandConvention) -> Result<f64> {
    taus.iter().try_fold(0.0f64, |m, &tau| {
        Ok(m.max(canonical_residual_at(tau, k, convention)?.abs()))
    })
}

/// Outcome of testing both radicand conventions against the canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadicandReport {
    pub reconciled_max: f64,
    pub printed_max: f64,
    pub adopted: Option<RadicandConvention>,
}

/// Evaluates both conventions on `taus` and adopts the first one whose
/// residual stays below `tol`.
pub fn select_radicand_convention(taus: &[f64], k: &CaseIIConstants, tol: f64) -> Result<RadicandReport> {
    let reconciled_max = canonical_form_check(taus, k, RadicandConvention::Reconciled)?;
    let printed_max = canonical_form_check(taus, k, RadicandConvention::AsPrinted)?;
    let adopted = if reconciled_max < tol {
        Some(RadicandConvention::Reconciled)
    } else if printed_max < tol {
        Some(RadicandConvention::AsPrinted)
    } else {
        None
    };
    Ok(RadicandReport {
        reconciled_max,
        printed_max,
        adopted,
    })
}

/// `u - y' / (1 + y^2)` at `tau`, with `y' = (dy/dtau) / (dt/dtau)` and
/// `dt/dtau = 1 / (y D s)`.
pub fn substitution_chain_residual(tau: f64, k: &CaseIIConstants, sign: f64) -> Result<f64> {
    let h = tau_step(tau, k)?;
    let (u, _) = parametric_solution(tau, k)?;
    let (s, d) = s_and_d(tau, k)?;
    let y = y_of_tau(tau, k, sign)?;
    let dy = derivative(|t| y_of_tau(t, k, sign), tau, h)?;
    let ydot = dy * y * d * s;
    Ok(u - ydot / (1.0 + y * y))
}

/// Interior `tau` samples along the path, away from the branch ends.
pub fn interior_taus(bridge: &TauBridge) -> Vec<f64> {
    let per = bridge.cells + 1;
    bridge
        .tau_grid()
        .chunks(per)
        .flat_map(|c| c[2..per - 2].to_vec())
        .collect()
}

/// Continuous Case II path: the parametric solution up to the end of its
/// last branch, then the numerical continuation if there is one.
pub struct CaseIISolution {
    bridge: Arc<TauBridge>,
    wp: WaveParameters,
    continuation: Option<Trajectory>,
}

impl PathEvaluator for CaseIISolution {
    fn position(&self, t: f64) -> Option<(f64, f64)> {
        let total = self.bridge.total_time();
        if t <= total {
            let p = self.bridge.point_at(t).ok()?;
            Some((
                self.wp.c * t + p.x_moving / WAVENUMBER,
                p.theta / (WAVENUMBER * self.wp.delta),
            ))
        } else {
            self.continuation.as_ref()?.position_at(t).ok()
        }
    }
}

/// `ln tanh(Z/2)` at each of `times` from `z_const` plus the cumulative
/// integral of `A sin X` over `[0, t]`.
fn vertical_exponents(bridge: &TauBridge, times: &[f64]) -> Result<Vec<f64>> {
    let k = bridge.constants();
    let a = k.prefactor();
    let mut out = Vec::with_capacity(times.len());
    let mut acc = k.z_const;
    let mut prev = 0.0;
    for &t in times {
        let span = t - prev;
        if span > 0.0 {
            let panels = (span / Z_PANEL).ceil().max(1.0) as usize;
            let h = span / panels as f64;
            for j in 0..panels {
                let lo = prev + h * j as f64;
                let mut err = None;
                acc += gl8().integrate(
                    |s| match bridge.point_at(s) {
                        Ok(p) => a * p.sin_x,
                        Err(e) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    },
                    lo,
                    lo + h,
                );
                if let Some(e) = err {
                    return Err(e);
                }
            }
        }
        out.push(acc);
        prev = t;
    }
    Ok(out)
}

/// `X(t)` on the bed, where `X' = A cos X + b`.
///
/// With `u = tan(X/2)` the equation is the constant-coefficient Riccati
/// equation `u' = alpha + beta u^2`, `alpha = (b + A)/2`, `beta = (b - A)/2`,
/// which is linearized by `u = N/M`, `N' = alpha M`, `M' = -beta N`.
#[allow(non_snake_case)]
pub fn bed_path(t: f64, X0: f64, prefactor: f64, b: f64) -> f64 {
    let (alpha, beta) = (0.5 * (b + prefactor), 0.5 * (b - prefactor));
    let ab = alpha * beta;
    let half = 0.5 * X0;
    let (n0, m0) = half.sin_cos();
    let flow = |t: f64| {
        let (c, s) = if ab > 0.0 {
            let w = ab.sqrt();
            ((w * t).cos(), (w * t).sin() / w)
        } else if ab < 0.0 {
            let w = (-ab).sqrt();
            ((w * t).cosh(), (w * t).sinh() / w)
        } else {
            (1.0, t)
        };
        (n0 * c + alpha * m0 * s, m0 * c - beta * n0 * s)
    };
    let wrap = |phi: f64, lo: f64| lo + (phi - lo).rem_euclid(2.0 * PI);
    if ab > 0.0 {
        // X/2 turns monotonically, a full turn every 2 pi / w.
        let period = 2.0 * PI / ab.sqrt();
        let turns = (t / period).floor();
        let (n, m) = flow(t - turns * period);
        let dphi = n.atan2(m) - half;
        let step = if b > 0.0 { wrap(dphi, 0.0) } else { -wrap(-dphi, 0.0) };
        2.0 * (half + b.signum() * 2.0 * PI * turns + step)
    } else {
        // X/2 moves less than pi towards a fixed point.
        let (n, m) = flow(t);
        2.0 * (half + wrap(n.atan2(m) - half, -PI))
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

fn continuation_config() -> IntegratorConfig {
    IntegratorConfig::with_tolerances(1e-12, 1e-12)
}

/// Particle path for `c0 != c` starting at `(x0, z0)` at `t = 0`, sampled
/// at `t_grid`.
///
/// `x = c t + (X)/(2 pi)` with `X = arctan y(tau(t))` and
/// `z = artanh(exp(int_0^t A y / sqrt(1 + y^2) ds + const)) / (pi delta)`.
/// Past a chart exit the path is continued numerically; past the escape
/// height it is truncated. Initial data without a parametric
/// representation fall back to the integrator entirely.
pub fn trajectory_case2(x0: f64, z0: f64, t_grid: &[f64], wp: &WaveParameters) -> Result<Trajectory> {
    if (wp.c0 - wp.c).abs() <= CASE_SELECTION {
        return Err(Error::WrongCase("the Abel-equation solution needs c0 != c".into()));
    }
    if !x0.is_finite() || !(0.0..=1.0).contains(&z0) {
        return Err(Error::Domain(format!(
            "need finite x0 and 0 <= z0 <= 1, got x0 = {x0}, z0 = {z0}"
        )));
    }
    let t_end = validate_grid(t_grid)?;
    let mut meta = TrajectoryMeta {
        params: *wp,
        method: MethodTag::ExactCaseII,
        x_source: ComponentSource::ClosedForm,
        z_source: ComponentSource::ClosedForm,
        exact_until: None,
        truncated_at: None,
        warnings: Vec::new(),
    };

    if z0 == 0.0 {
        meta.z_source = ComponentSource::Degenerate;
        meta.x_source = ComponentSource::Degenerate;
        let (a, b) = (wp.frame_prefactor(), wp.phase_drift());
        let x_moving = WAVENUMBER * x0;
        let samples = t_grid
            .iter()
            .map(|&t| ParticleState::new(wp.c * t + bed_path(t, x_moving, a, b) / WAVENUMBER, 0.0, t))
            .collect();
        let params = *wp;
        let eval = move |t: f64| Some((params.c * t + bed_path(t, x_moving, a, b) / WAVENUMBER, 0.0));
        return Ok(Trajectory::new(samples, meta)?.with_evaluator(Arc::new(eval)));
    }
    let k = match fit_constants(WAVENUMBER * x0, WAVENUMBER * wp.delta * z0, wp) {
        Ok(k) => k,
        Err(Error::UnsupportedInitialData(msg)) => {
            let note = format!("{msg}; integrated numerically");
            warn!("{note}");
            return numeric_fallback(x0, z0, t_grid, t_end, wp, meta, note);
        }
        Err(e) => return Err(e),
    };
    let bridge = Arc::new(TauBridge::new(&k)?);
    let t_exact = bridge.total_time();

    let exact_times: Vec<f64> = t_grid.iter().copied().take_while(|&t| t <= t_exact).collect();
    let exponents = vertical_exponents(&bridge, &exact_times)?;
    let mut samples = Vec::with_capacity(t_grid.len());
    for (&t, &e) in exact_times.iter().zip(&exponents) {
        if !(e < 0.0) {
            let msg = format!("the exponent of the vertical formula reached {e} >= 0 at t = {t}; truncated");
            warn!("{msg}");
            meta.warnings.push(msg);
            meta.truncated_at = Some(t);
            break;
        }
        let p = bridge.point_at(t)?;
        samples.push(ParticleState {
            x: wp.c * t + p.x_moving / WAVENUMBER,
            z: e.exp().atanh() / (PI * wp.delta),
            t,
        });
    }

    let mut continuation = None;
    if meta.truncated_at.is_none() && exact_times.len() < t_grid.len() {
        match bridge.final_end() {
            BranchEnd::EscapeCap | BranchEnd::TurningPoint => {
                let msg = format!(
                    "particle reaches the escape height z = {} at t = {t_exact}; truncated",
                    escape_height(wp.delta)
                );
                warn!("{msg}");
                meta.warnings.push(msg);
                meta.truncated_at = Some(t_exact);
            }
            end @ (BranchEnd::ChartExit | BranchEnd::BedFloor) => {
                let p = bridge.point_at(t_exact)?;
                let start = ParticleState {
                    x: wp.c * t_exact + p.x_moving / WAVENUMBER,
                    z: p.theta / (WAVENUMBER * wp.delta),
                    t: t_exact,
                };
                let msg = format!(
                    "{} at t = {t_exact}; continued numerically",
                    if end == BranchEnd::ChartExit {
                        "path leaves the chart |X| < pi/2 of y = tan X"
                    } else {
                        "path approaches the bed"
                    }
                );
                info!("{msg}");
                meta.warnings.push(msg);
                meta.exact_until = Some(t_exact);
                let num = integrate(
                    start,
                    t_end.max(t_exact * (1.0 + 1e-12) + 1e-12),
                    wp,
                    &continuation_config(),
                )?;
                let covered = num.meta.truncated_at.unwrap_or(f64::INFINITY);
                meta.warnings.extend(num.meta.warnings.iter().cloned());
                for &t in &t_grid[exact_times.len()..] {
                    if t > covered {
                        meta.truncated_at = Some(covered);
                        break;
                    }
                    let (x, z) = num.position_at(t)?;
                    samples.push(ParticleState { x, z, t });
                }
                continuation = Some(num);
            }
        }
    }

    if samples.iter().any(|s| !(0.0..=1.0).contains(&s.z)) {
        meta.warnings
            .push("particle leaves the strip 0 <= z <= 1; the linear field is continued analytically".into());
    }
    let solution = CaseIISolution {
        bridge,
        wp: *wp,
        continuation,
    };
    Ok(Trajectory::new(samples, meta)?.with_evaluator(Arc::new(solution)))
}

fn numeric_fallback(
    x0: f64,
    z0: f64,
    t_grid: &[f64],
    t_end: f64,
    wp: &WaveParameters,
    mut meta: TrajectoryMeta,
    note: String,
) -> Result<Trajectory> {
    meta.x_source = ComponentSource::NumericFallback;
    meta.z_source = ComponentSource::NumericFallback;
    meta.exact_until = Some(0.0);
    meta.warnings.push(note);
    let samples = if t_end > 0.0 {
        let num = integrate(ParticleState::new(x0, z0, 0.0), t_end, wp, &continuation_config())?;
        meta.warnings.extend(num.meta.warnings.iter().cloned());
        meta.truncated_at = num.meta.truncated_at;
        let covered = num.meta.truncated_at.unwrap_or(f64::INFINITY);
        let kept: Vec<f64> = t_grid.iter().copied().take_while(|&t| t <= covered).collect();
        num.resample(&kept)?.samples
    } else {
        vec![ParticleState::new(x0, z0, 0.0)]
    };
    Trajectory::new(samples, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle_dynamics::to_moving;

    fn params(delta: f64, dc: f64) -> WaveParameters {
        let c = crate::wave_model::dispersion_speed(delta, 0.0).unwrap();
        WaveParameters::new(delta, 0.0, c + dc).unwrap()
    }

    fn fitted(delta: f64, x0: f64, z0: f64, dc: f64) -> (WaveParameters, CaseIIConstants) {
        let wp = params(delta, dc);
        let k = fit_constants(WAVENUMBER * x0, WAVENUMBER * delta * z0, &wp).unwrap();
        (wp, k)
    }

    #[test]
    fn abel_equilibrium() {
        let (_, k) = fitted(0.5, -0.15, 0.5, 0.05);
        assert_eq!(abel_reduction_residual(0.0, 0.0, 0.0, &k), 0.0);
    }

    #[test]
    fn fit_reproduces_initial_data() {
        for (d, x0, z0, dc) in [(0.5, -0.15, 0.5, 0.05), (1.0, 0.1, 0.4, -0.1), (0.3, 0.4, 0.5, 0.2)] {
            let (_, k) = fitted(d, x0, z0, dc);
            let (u, xi) = parametric_solution(k.tau0, &k).unwrap();
            assert!((u - k.u0).abs() < 1e-10, "{u} {}", k.u0);
            assert!((xi - k.xi0).abs() < 1e-10);
            let y = y_of_tau(k.tau0, &k, k.y0).unwrap();
            assert!((y - k.y0).abs() < 1e-9 * (1.0 + k.y0.abs()));
        }
    }

    #[test]
    fn xi_consistency_with_y() {
        let (_, k) = fitted(0.8, -0.2, 0.3, 0.2);
        let bridge = TauBridge::new(&k).unwrap();
        for tau in interior_taus(&bridge) {
            let y = y_of_tau(tau, &k, 1.0).unwrap();
            let (_, xi) = parametric_solution(tau, &k).unwrap();
            assert!((xi + 0.5 * k.b * (1.0 + y * y).ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn bridge_inverse_and_monotonicity() {
        let (_, k) = fitted(0.5, -0.15, 0.5, 0.05);
        let bridge = TauBridge::new(&k).unwrap();
        assert!((tau_of_t(0.0, &bridge).unwrap() - k.tau0).abs() < 1e-9 * k.tau0);
        let total = bridge.total_time().min(3.0);
        let mut last: Option<(usize, f64)> = None;
        for i in 1..50 {
            let t = total * i as f64 / 50.0;
            let p = bridge.point_at(t).unwrap();
            let back = bridge.t_of_tau(p.tau, p.branch).unwrap();
            assert!((back - t).abs() < 1e-10, "{t} {back}");
            if let Some((b, th)) = last {
                if b == p.branch {
                    let dir = k.branches[b].direction;
                    assert!((p.theta - th) * dir > 0.0);
                }
            }
            last = Some((p.branch, p.theta));
        }
        assert!(tau_of_t(bridge.total_time() + 1.0, &bridge).is_err());
    }

    #[test]
    fn quadrature_self_convergence() {
        let (_, k) = fitted(1.0, -0.1, 0.4, 0.1);
        let coarse = TauBridge::with_cells(&k, 96).unwrap();
        let fine = TauBridge::with_cells(&k, 192).unwrap();
        assert!((coarse.total_time() - fine.total_time()).abs() < 1e-10);
    }

    #[test]
    fn moving_frame_state_matches_path_data() {
        let (wp, k) = fitted(0.5, -0.15, 0.5, -0.05);
        let bridge = TauBridge::new(&k).unwrap();
        let p = bridge.point_at(0.0).unwrap();
        let m = to_moving(ParticleState::new(-0.15, 0.5, 0.0), &wp);
        assert!((p.x_moving - m.X).abs() < 1e-10 && (p.theta - m.Z).abs() < 1e-12);
    }

    #[test]
    fn radicand_reconciliation() {
        let (_, k) = fitted(0.5, -0.15, 0.5, 0.05);
        let bridge = TauBridge::new(&k).unwrap();
        let report = select_radicand_convention(&interior_taus(&bridge), &k, 1e-9).unwrap();
        assert_eq!(report.adopted, Some(RadicandConvention::Reconciled));
        assert!(report.printed_max > 1e-6);
    }

    #[test]
    fn other_chart_is_supported() {
        let (wp, k) = fitted(0.5, 0.4, 0.5, 0.05);
        assert!(k.chart_sign < 0.0);
        let grid: Vec<f64> = (0..=10).map(|i| 0.05 * i as f64).collect();
        let tr = trajectory_case2(0.4, 0.5, &grid, &wp).unwrap();
        assert!((tr.samples[0].x - 0.4).abs() < 1e-10 && (tr.samples[0].z - 0.5).abs() < 1e-10);
    }

    #[test]
    fn wrong_case_and_bed() {
        let wp = WaveParameters::co_moving(0.5, 0.0).unwrap();
        assert!(matches!(fit_constants(0.1, 0.2, &wp), Err(Error::WrongCase(_))));
        let wp = params(0.5, 0.1);
        assert!(matches!(
            fit_constants(0.1, 0.0, &wp),
            Err(Error::UnsupportedInitialData(_))
        ));
        let tr = trajectory_case2(0.25, 0.6, &[0.0, 0.5, 1.0], &wp).unwrap();
        assert_eq!(tr.meta.z_source, ComponentSource::NumericFallback);
        assert_eq!(tr.meta.exact_until, Some(0.0));
    }

    #[test]
    fn bed_particles_match_integrator() {
        let grid: Vec<f64> = (0..=60).map(|i| 0.05 * i as f64).collect();
        let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-13);
        // |b| > A, |b| < A and both signs.
        for (d, dc) in [(0.5, 0.05), (0.5, -0.3), (1.0, 2.5), (1.0, -2.5), (0.3, 0.9)] {
            let wp = params(d, dc);
            for x0 in [-0.6, -0.2, 0.0, 0.3, 0.5, 1.7] {
                let tr = trajectory_case2(x0, 0.0, &grid, &wp).unwrap();
                assert_eq!(tr.meta.x_source, ComponentSource::Degenerate);
                assert!(tr.samples.iter().all(|s| s.z == 0.0));
                let num = integrate(ParticleState::new(x0, 0.0, 0.0), 3.0, &wp, &cfg)
                    .unwrap()
                    .resample(&grid)
                    .unwrap();
                let (dx, _) = tr.max_difference(&num).unwrap();
                assert!(dx < 1e-9, "{d} {dc} {x0}: {dx}");
            }
        }
    }

    const SETS: [(f64, f64, f64, f64); 6] = [
        (0.5, -0.15, 0.5, 0.05),
        (0.5, -0.15, 0.5, -0.05),
        (1.0, -0.1, 0.4, 0.1),
        (1.0, 0.1, 0.4, -0.1),
        (0.8, -0.2, 0.3, 0.2),
        (0.3, -0.1, 0.5, -0.3),
    ];

    #[test]
    fn agrees_with_integrator() {
        let grid: Vec<f64> = (0..=40).map(|i| 0.025 * i as f64).collect();
        let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-13);
        for (d, x0, z0, dc) in SETS {
            let wp = params(d, dc);
            let exact = trajectory_case2(x0, z0, &grid, &wp).unwrap();
            assert_eq!(exact.len(), grid.len());
            let num = integrate(ParticleState::new(x0, z0, 0.0), 1.0, &wp, &cfg)
                .unwrap()
                .resample(&grid)
                .unwrap();
            let (dx, dz) = exact.max_difference(&num).unwrap();
            assert!(dx < 1e-8 && dz < 1e-8, "{d} {x0} {z0} {dc}: {dx} {dz}");
            let mid = exact.position_at(0.5123).unwrap();
            let nmid = num.position_at(0.5123).unwrap();
            assert!((mid.0 - nmid.0).abs() < 1e-8 && (mid.1 - nmid.1).abs() < 1e-8);
        }
    }

    #[test]
    fn vertical_formula_matches_theta() {
        for (d, x0, z0, dc) in SETS {
            let (wp, k) = fitted(d, x0, z0, dc);
            let bridge = TauBridge::new(&k).unwrap();
            let times: Vec<f64> = (0..=10).map(|i| 0.1 * i as f64).collect();
            let ex = vertical_exponents(&bridge, &times).unwrap();
            for (&t, e) in times.iter().zip(ex) {
                let th = bridge.point_at(t).unwrap().theta;
                let z = e.exp().atanh() / (PI * wp.delta);
                assert!((z - th / (WAVENUMBER * wp.delta)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn substitution_chain_and_canonical_form() {
        for (d, x0, z0, dc) in SETS {
            let (_, k) = fitted(d, x0, z0, dc);
            let bridge = TauBridge::new(&k).unwrap();
            let taus = interior_taus(&bridge);
            for &tau in taus.iter().step_by(7) {
                for sign in [1.0, -1.0] {
                    let r = substitution_chain_residual(tau, &k, sign).unwrap();
                    let y = y_of_tau(tau, &k, sign).unwrap();
                    assert!(r.abs() < 1e-7, "{tau}: {r} y={y} u={:?}", parametric_solution(tau, &k));
                }
            }
            let rec = canonical_form_check(&taus, &k, RadicandConvention::Reconciled).unwrap();
            assert!(rec < 1e-9, "{rec}");
        }
    }

    #[test]
    fn abel_residual_along_path() {
        for (d, x0, z0, dc) in SETS {
            let (_, k) = fitted(d, x0, z0, dc);
            let bridge = TauBridge::new(&k).unwrap();
            let y = |t: f64| bridge.point_at(t).unwrap().y;
            let h = 1e-3;
            for i in 1..10 {
                let t = 0.1 * i as f64;
                let yd = (y(t - 2.0 * h) - 8.0 * y(t - h) + 8.0 * y(t + h) - y(t + 2.0 * h)) / (12.0 * h);
                let ydd = (-y(t - 2.0 * h) + 16.0 * y(t - h) - 30.0 * y(t) + 16.0 * y(t + h) - y(t + 2.0 * h))
                    / (12.0 * h * h);
                let r = abel_reduction_residual(y(t), yd, ydd, &k);
                assert!(r.abs() < 1e-5 * (1.0 + ydd.abs()), "{t}: {r}");
            }
        }
    }

    #[test]
    fn chart_exit_is_continued() {
        // Co-moving ratio chosen so the particle crosses cos X = 0 early.
        let wp = params(0.5, 0.3);
        let grid: Vec<f64> = (0..=30).map(|i| 0.1 * i as f64).collect();
        let tr = trajectory_case2(-0.2, 0.6, &grid, &wp).unwrap();
        let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-13);
        let num = integrate(ParticleState::new(-0.2, 0.6, 0.0), 3.0, &wp, &cfg).unwrap();
        let num = num
            .resample(&tr.samples.iter().map(|s| s.t).collect::<Vec<_>>())
            .unwrap();
        let (dx, dz) = tr.max_difference(&num).unwrap();
        assert!(dx < 1e-7 && dz < 1e-7, "{dx} {dz} {:?}", tr.meta);
        assert!(tr.meta.exact_until.is_some_and(|t| t > 0.0 && t < 3.0), "{:?}", tr.meta);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let (_, k) = fitted(1.0, -0.1, 0.4, 0.1);
        let bridge = TauBridge::new(&k).unwrap();
        for conv in [RadicandConvention::Reconciled, RadicandConvention::AsPrinted] {
            for tau in interior_taus(&bridge).into_iter().step_by(11) {
                let h = tau_step(tau, &k).unwrap();
                let (du, dxi) = parametric_derivatives(tau, &k, conv).unwrap();
                let fu = derivative(|t| parametric_solution_with(t, &k, conv).map(|p| p.0), tau, h).unwrap();
                let fx = derivative(|t| parametric_solution_with(t, &k, conv).map(|p| p.1), tau, h).unwrap();
                assert!((du - fu).abs() < 1e-7 * (1.0 + du.abs()), "{tau}: {du} {fu}");
                assert!((dxi - fx).abs() < 1e-7 * (1.0 + dxi.abs()), "{tau}: {dxi} {fx}");
            }
        }
    }
}
