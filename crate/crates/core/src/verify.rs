//! Self-verification suite: every invariant of the library as a named
//! check with its measured residual and tolerance.

use std::f64::consts::PI;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::config::{C0Mode, Method, OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::exact_case_equal::{
    first_integral_constants, first_integrals, trajectory_case1, w_exact_with_derivative, w_ode_residual,
    x_closed_form, y_exact_with_derivative, y_ode_residual, z_closed_form, CaseIConstants,
};
use crate::exact_case_general::{
    abel_reduction_residual, canonical_form_check, fit_constants, interior_taus, parametric_solution,
    select_radicand_convention, substitution_chain_residual, trajectory_case2, RadicandConvention, TauBridge,
};
use crate::io;
use crate::particle_dynamics::ode::{solve, IntegratorConfig};
use crate::particle_dynamics::{integrate, mean_current_check, rhs_lab, rhs_moving, to_lab, to_moving, ParticleState};
use crate::run::{run_trajectory, write_run_to};
use crate::special_functions::{complete_elliptic_k, incomplete_elliptic_f, jacobi_elliptic, EllipticModulusSquared};
use crate::tolerances::*;
use crate::wave_model::{dispersion_speed, linear_residuals, WaveParameters, WAVENUMBER};

/// Reference value of `K(1/2)`.
const K_HALF: f64 = 1.854_074_677_301_372;

const SEED: u64 = 0x5eed_2024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub tool: String,
    pub version: String,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Options of [`run_verify`].
#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    /// Adds `amount` to the measured value of the named check; used to
    /// confirm that the harness flags a failing check.
    pub perturbation: Option<(String, f64)>,
    /// Run only checks whose name starts with this prefix.
    pub filter: Option<String>,
}

type CheckFn = fn() -> Result<f64>;

/// Every check with its tolerance. A check passes when the measured value
/// is finite and at most the tolerance.
pub fn catalogue() -> Vec<(&'static str, f64, CheckFn)> {
    vec![
        ("special.jacobi_pythagorean", JACOBI_IDENTITY, jacobi_pythagorean),
        ("special.k_at_zero", 1e-13, k_at_zero),
        ("special.k_reference", SPECIAL_FUNCTION_REL, k_reference),
        ("special.jacobi_inverse", JACOBI_INVERSE, jacobi_inverse),
        ("special.jacobi_periodicity", JACOBI_PERIODICITY, jacobi_periodicity),
        ("special.jacobi_derivative", JACOBI_DERIVATIVE, jacobi_derivative),
        ("field.dispersion_reference", 1e-15, dispersion_reference),
        ("field.linear_residuals", FIELD_RESIDUAL, field_residuals),
        ("field.mean_current", MEAN_CURRENT, mean_current),
        ("frame.chain_rule", CHAIN_RULE, chain_rule),
        ("frame.round_trip", FRAME_ROUND_TRIP, frame_round_trip),
        ("case1.constant_identities", CONSTANT_IDENTITY, case1_identities),
        (
            "case1.first_integral_drift",
            FIRST_INTEGRAL_DRIFT,
            case1_first_integral_drift,
        ),
        ("case1.scalar_residuals", SCALAR_ODE_RESIDUAL, case1_scalar_residuals),
        ("case1.second_order_residuals", CASE_I_SECOND_ORDER, case1_second_order),
        ("case1.closed_form_oracle", CASE_I_ORACLE, case1_closed_form_oracle),
        ("case1.horizontal_drift", DRIFT, case1_drift),
        ("case1.physical_oracle", CASE_I_ORACLE, case1_physical_oracle),
        ("case2.initial_fit", INITIAL_FIT, case2_initial_fit),
        ("case2.canonical_form", CANONICAL_FORM, case2_canonical_form),
        ("case2.printed_radicand_rejected", 0.0, case2_printed_radicand),
        ("case2.substitution_chain", SUBSTITUTION_CHAIN, case2_substitution_chain),
        ("case2.abel_residual", ABEL_RESIDUAL, case2_abel_residual),
        ("case2.tau_inversion", TAU_INVERSION, case2_tau_inversion),
        ("case2.oracle", CASE_II_ORACLE, case2_oracle),
        ("io.csv_round_trip", 0.0, csv_round_trip),
        ("io.determinism", 0.0, determinism),
    ]
}

/// Runs the suite. The report is complete even when checks fail.
pub fn run_verify(options: &VerifyOptions) -> VerificationReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    for (name, tolerance, f) in catalogue() {
        if let Some(prefix) = &options.filter {
            if !name.starts_with(prefix.as_str()) {
                continue;
            }
        }
        let t0 = Instant::now();
        let (mut measured, error) = match f() {
            Ok(v) => (v, None),
            Err(e) => (f64::INFINITY, Some(e.to_string())),
        };
        if let Some((target, amount)) = &options.perturbation {
            if target == name {
                measured += amount;
            }
        }
        let passed = measured.is_finite() && measured <= tolerance;
        log::info!(
            "{name}: {measured:e} (tol {tolerance:e}) {}",
            if passed { "ok" } else { "FAILED" }
        );
        checks.push(Check {
            name: name.to_string(),
            measured,
            tolerance,
            passed,
            seconds: t0.elapsed().as_secs_f64(),
            error,
        });
    }
    VerificationReport {
        tool: io::TOOL_NAME.into(),
        version: io::TOOL_VERSION.into(),
        passed: checks.iter().all(|c| c.passed),
        seconds: start.elapsed().as_secs_f64(),
        checks,
    }
}

fn modulus(m: f64) -> Result<EllipticModulusSquared> {
    EllipticModulusSquared::new(m)
}

fn m_grid() -> impl Iterator<Item = f64> {
    (0..=9).map(|i| 0.1 * i as f64).chain([0.99])
}

fn jacobi_pythagorean() -> Result<f64> {
    let mut worst = 0.0f64;
    for m in m_grid() {
        let mm = modulus(m)?;
        for i in 0..10_000 {
            let u = -20.0 + 40.0 * i as f64 / 9_999.0;
            let j = jacobi_elliptic(u, mm);
            worst = worst
                .max((j.sn * j.sn + j.cn * j.cn - 1.0).abs())
                .max((j.dn * j.dn + m * j.sn * j.sn - 1.0).abs());
        }
    }
    Ok(worst)
}

fn k_at_zero() -> Result<f64> {
    Ok((complete_elliptic_k(0.0)? - 0.5 * PI).abs())
}

fn k_reference() -> Result<f64> {
    Ok((complete_elliptic_k(0.5)? - K_HALF).abs() / K_HALF)
}

fn jacobi_inverse() -> Result<f64> {
    let mut worst = 0.0f64;
    for m in m_grid() {
        let mm = modulus(m)?;
        for i in 0..=200 {
            let phi = -1.5 + 3.0 * i as f64 / 200.0;
            let u = incomplete_elliptic_f(phi, m)?;
            worst = worst.max((jacobi_elliptic(u, mm).sn - phi.sin()).abs());
        }
    }
    Ok(worst)
}

fn jacobi_periodicity() -> Result<f64> {
    let mut worst = 0.0f64;
    for m in m_grid() {
        let mm = modulus(m)?;
        let k4 = 4.0 * complete_elliptic_k(m)?;
        for i in 0..=100 {
            let u = -5.0 + 0.1 * i as f64;
            worst = worst.max((jacobi_elliptic(u + k4, mm).sn - jacobi_elliptic(u, mm).sn).abs());
        }
    }
    Ok(worst)
}

fn jacobi_derivative() -> Result<f64> {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for m in m_grid() {
        let mm = modulus(m)?;
        for i in 0..=100 {
            let u = -5.0 + 0.1 * i as f64;
            let d = (jacobi_elliptic(u + h, mm).sn - jacobi_elliptic(u - h, mm).sn) / (2.0 * h);
            let j = jacobi_elliptic(u, mm);
            worst = worst.max((d - j.cn * j.dn).abs());
        }
    }
    Ok(worst)
}

fn dispersion_reference() -> Result<f64> {
    let c = dispersion_speed(0.5, 0.0)?;
    Ok((c * c - PI.tanh() / PI).abs())
}

fn field_grid() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for delta in [0.1, 0.5, 1.0] {
        for weber in [0.0, 0.5, 2.0] {
            out.push((delta, weber));
        }
    }
    out
}

fn field_residuals() -> Result<f64> {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for (delta, weber) in field_grid() {
        let wp = WaveParameters::new(delta, weber, 0.3)?;
        for _ in 0..1000 {
            let (x, z, t) = (
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..2.0),
            );
            worst = worst.max(linear_residuals(x, z, t, &wp, FIELD_FD_STEP).max_abs());
        }
    }
    Ok(worst)
}

fn mean_current() -> Result<f64> {
    let mut worst = 0.0f64;
    for c0 in [-0.5, 0.0, 0.7] {
        for (delta, weber) in field_grid() {
            let wp = WaveParameters::new(delta, weber, c0)?;
            for z in [0.0, 0.3, 1.0] {
                worst = worst.max((mean_current_check(z, 0.37, &wp)? - c0).abs());
            }
        }
    }
    Ok(worst)
}

fn chain_rule() -> Result<f64> {
    let mut rng = StdRng::seed_from_u64(SEED + 1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let wp = WaveParameters::new(
            rng.random_range(0.1..1.5),
            rng.random_range(0.0..2.0),
            rng.random_range(-1.0..1.0),
        )?;
        let s = ParticleState::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..5.0),
        );
        let (u, v) = rhs_lab(s, &wp);
        let (xd, zd) = rhs_moving(to_moving(s, &wp), &wp);
        let scale = 1.0 + u.abs() + v.abs();
        worst = worst
            .max((xd - WAVENUMBER * (u - wp.c)).abs() / (WAVENUMBER * scale))
            .max((zd - WAVENUMBER * wp.delta * v).abs() / (WAVENUMBER * scale));
    }
    Ok(worst)
}

fn frame_round_trip() -> Result<f64> {
    let mut rng = StdRng::seed_from_u64(SEED + 2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let wp = WaveParameters::new(rng.random_range(0.1..1.5), 0.0, 0.0)?;
        let s = ParticleState::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..5.0),
        );
        let back = to_lab(to_moving(s, &wp), &wp);
        worst = worst.max((back.x - s.x).abs()).max((back.z - s.z).abs());
    }
    Ok(worst)
}

fn case1_identities() -> Result<f64> {
    let mut rng = StdRng::seed_from_u64(SEED + 3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let wp = WaveParameters::co_moving(rng.random_range(0.1..1.5), rng.random_range(0.0..2.0))?;
        let x0 = rng.random_range(-PI..PI);
        let z0 = rng.random_range(0.0..WAVENUMBER * wp.delta);
        let k = first_integral_constants(x0, z0, &wp)?;
        let expected = k.a_sq * (1.0 + 2.0 * x0.cos().powi(2) * z0.sinh().powi(2));
        let scale = k.c1.abs().max(1.0);
        worst = worst
            .max((k.c1 - expected).abs() / scale)
            .max((k.c1 + k.c2).abs() / scale);
    }
    Ok(worst)
}

/// Starting points used for the Case I numerical checks.
fn case1_starts() -> Vec<(f64, f64, f64)> {
    let mut v = Vec::new();
    for delta in [1.0, 1.5] {
        for (x0, z0) in [(-0.2, 0.3), (-0.24, 0.5), (-0.1, 0.2), (0.1, 0.2)] {
            v.push((delta, x0, z0));
        }
    }
    v
}

#[allow(non_snake_case)]
fn case1_first_integral_drift() -> Result<f64> {
    let cfg = IntegratorConfig::with_tolerances(1e-10, 1e-12);
    let mut worst = 0.0f64;
    for (delta, x0, z0) in case1_starts() {
        let wp = WaveParameters::co_moving(delta, 0.0)?;
        let a_sq = wp.a_squared();
        let tr = integrate(ParticleState::new(x0, z0, 0.0), 10.0, &wp, &cfg)?;
        let mut first = None;
        for s in &tr.samples {
            let m = to_moving(*s, &wp);
            let (Xd, Zd) = rhs_moving(m, &wp);
            let (c1, c2) = first_integrals(m.X, m.Z, Xd, Zd, a_sq);
            let (f1, f2) = *first.get_or_insert((c1, c2));
            worst = worst.max((c1 - f1).abs()).max((c2 - f2).abs());
        }
    }
    Ok(worst)
}

/// Free constants in the closed-form regimes: `(delta, c1/a^2, c2/a^2)`.
/// The offsets centre the window `[0, 5]` between blow-ups of `Z`.
pub fn case1_free_constant_sets() -> Result<Vec<(WaveParameters, CaseIConstants)>> {
    let mut out = Vec::new();
    for (delta, f1, f2, sx) in [
        (0.8, -0.5, -2.0, 1.0),
        (0.8, 0.3, -3.0, -1.0),
        (1.0, 0.0, -1.5, 1.0),
        (1.0, 0.6, -2.0, -1.0),
        (1.0, 0.9, -4.0, 1.0),
        (0.8, -0.9, -1.5, 1.0),
    ] {
        let wp = WaveParameters::co_moving(delta, 0.0)?;
        let a_sq = wp.a_squared();
        let probe = CaseIConstants::from_integration_constants(&wp, f1 * a_sq, f2 * a_sq, sx, 1.0, 0.0, 0.0)?;
        let tz = probe
            .z_period()
            .ok_or_else(|| Error::NumericalFailure("no z period".into()))?;
        let k = CaseIConstants::from_integration_constants(&wp, f1 * a_sq, f2 * a_sq, sx, 1.0, 0.7, 2.5 - 0.5 * tz)?;
        out.push((wp, k));
    }
    Ok(out)
}

fn case1_scalar_residuals() -> Result<f64> {
    let mut worst = 0.0f64;
    for (_, k) in case1_free_constant_sets()? {
        for i in 0..=500 {
            let t = 0.01 * i as f64;
            let (y, yd) = y_exact_with_derivative(t, &k)?;
            let (w, wd) = w_exact_with_derivative(t, &k)?;
            worst = worst
                .max(y_ode_residual(y, yd, k.a_sq, k.c1).abs())
                .max(w_ode_residual(w, wd, k.a_sq, k.c2).abs());
        }
    }
    Ok(worst)
}

#[allow(non_snake_case)]
fn case1_second_order() -> Result<f64> {
    let h = 1e-4;
    let d2 = |f: &dyn Fn(f64) -> Result<f64>, t: f64| -> Result<f64> {
        Ok((-f(t - 2.0 * h)? + 16.0 * f(t - h)? - 30.0 * f(t)? + 16.0 * f(t + h)? - f(t + 2.0 * h)?) / (12.0 * h * h))
    };
    let mut worst = 0.0f64;
    for (_, k) in case1_free_constant_sets()? {
        for i in 1..50 {
            let t = 0.1 * i as f64;
            let X = x_closed_form(t, &k)?;
            let Z = z_closed_form(t, &k)?;
            let xr = d2(&|s| x_closed_form(s, &k), t)? + k.a_sq * (2.0 * X).sin();
            let zr = d2(&|s| z_closed_form(s, &k), t)? - k.a_sq * (2.0 * Z).sinh();
            worst = worst.max(xr.abs()).max(zr.abs());
        }
    }
    Ok(worst)
}

/// Moving-frame `(X, X', Z, Z')` of a closed-form path at `t`.
#[allow(non_snake_case)]
fn case1_moving_motion(t: f64, k: &CaseIConstants) -> Result<[f64; 4]> {
    let (y, yd) = y_exact_with_derivative(t, k)?;
    let (w, wd) = w_exact_with_derivative(t, k)?;
    Ok([
        x_closed_form(t, k)?,
        yd / (1.0 + y * y),
        z_closed_form(t, k)?,
        wd / (1.0 - w * w),
    ])
}

#[allow(non_snake_case)]
fn case1_closed_form_oracle() -> Result<f64> {
    let cfg = IntegratorConfig::with_tolerances(1e-13, 1e-14);
    let mut worst = 0.0f64;
    for (_, k) in case1_free_constant_sets()? {
        let a_sq = k.a_sq;
        let rhs = move |_: f64, s: &[f64; 4]| [s[1], -a_sq * (2.0 * s[0]).sin(), s[3], a_sq * (2.0 * s[2]).sinh()];
        let sol = solve(&rhs, 0.0, case1_moving_motion(0.0, &k)?, 5.0, &cfg, |_, _| false)?;
        let dense = sol
            .dense
            .ok_or_else(|| Error::NumericalFailure("no dense output".into()))?;
        for i in 0..=100 {
            let t = 0.05 * i as f64;
            let num = dense
                .eval(t)
                .ok_or_else(|| Error::NumericalFailure(format!("dense output misses t = {t}")))?;
            worst = worst
                .max((x_closed_form(t, &k)? - num[0]).abs())
                .max((z_closed_form(t, &k)? - num[2]).abs());
        }
    }
    Ok(worst)
}

fn case1_drift() -> Result<f64> {
    let mut worst = 0.0f64;
    for (wp, k) in case1_free_constant_sets()? {
        let period = k
            .x_period()
            .ok_or_else(|| Error::NumericalFailure("no x period".into()))?;
        for t in [0.0, 0.37, 1.9] {
            let x = |s: f64| -> Result<f64> { Ok(wp.c * s + x_closed_form(s, &k)? / WAVENUMBER) };
            worst = worst.max((x(t + period)? - x(t)? - wp.c * period).abs());
        }
    }
    Ok(worst)
}

fn grid(dt: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| dt * i as f64).collect()
}

fn case1_physical_oracle() -> Result<f64> {
    let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-13);
    let times = grid(0.05, 100);
    let mut worst = 0.0f64;
    for (delta, x0, z0) in case1_starts() {
        let wp = WaveParameters::co_moving(delta, 0.0)?;
        let exact = trajectory_case1(x0, z0, &times, &wp)?;
        let kept: Vec<f64> = exact.samples.iter().map(|s| s.t).collect();
        let num = integrate(ParticleState::new(x0, z0, 0.0), 5.0, &wp, &cfg)?.resample(&kept)?;
        let (dx, dz) = exact.max_difference(&num)?;
        worst = worst.max(dx).max(dz);
    }
    Ok(worst)
}

/// `(delta, x0, z0, c0 - c)` used for the Case II checks.
pub const CASE_II_SETS: [(f64, f64, f64, f64); 6] = [
    (0.5, -0.15, 0.5, 0.05),
    (0.5, -0.15, 0.5, -0.05),
    (1.0, -0.1, 0.4, 0.1),
    (1.0, 0.1, 0.4, -0.1),
    (0.8, -0.2, 0.3, 0.2),
    (0.3, -0.1, 0.5, -0.3),
];

fn case2_params(delta: f64, dc: f64) -> Result<WaveParameters> {
    WaveParameters::new(delta, 0.0, dispersion_speed(delta, 0.0)? + dc)
}

fn case2_fits() -> Result<Vec<(WaveParameters, crate::exact_case_general::CaseIIConstants, TauBridge)>> {
    CASE_II_SETS
        .iter()
        .map(|&(d, x0, z0, dc)| {
            let wp = case2_params(d, dc)?;
            let k = fit_constants(WAVENUMBER * x0, WAVENUMBER * d * z0, &wp)?;
            let bridge = TauBridge::new(&k)?;
            Ok((wp, k, bridge))
        })
        .collect()
}

fn case2_initial_fit() -> Result<f64> {
    let mut worst = 0.0f64;
    for (_, k, bridge) in case2_fits()? {
        let (u, xi) = parametric_solution(k.tau0, &k)?;
        let p = bridge.point_at(0.0)?;
        worst = worst
            .max((u - k.u0).abs())
            .max((xi - k.xi0).abs())
            .max((p.theta - k.theta0).abs())
            .max((p.y - k.y0).abs() / (1.0 + k.y0.abs()));
    }
    Ok(worst)
}

fn case2_canonical_form() -> Result<f64> {
    let mut worst = 0.0f64;
    for (_, k, bridge) in case2_fits()? {
        let report = select_radicand_convention(&interior_taus(&bridge), &k, CANONICAL_FORM)?;
        if report.adopted != Some(RadicandConvention::Reconciled) {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(report.reconciled_max);
    }
    Ok(worst)
}

/// Counts parameter sets on which the `sqrt(tau^2 - a^2)` radicand would also satisfy
/// the canonical form; the reconciliation is only meaningful if it is 0.
fn case2_printed_radicand() -> Result<f64> {
    let mut accepted = 0.0;
    for (_, k, bridge) in case2_fits()? {
        if canonical_form_check(&interior_taus(&bridge), &k, RadicandConvention::AsPrinted)? < CANONICAL_FORM {
            accepted += 1.0;
        }
    }
    Ok(accepted)
}

fn case2_substitution_chain() -> Result<f64> {
    let mut worst = 0.0f64;
    for (_, k, bridge) in case2_fits()? {
        for tau in interior_taus(&bridge).into_iter().step_by(3) {
            for sign in [1.0, -1.0] {
                let (u, _) = parametric_solution(tau, &k)?;
                let r = substitution_chain_residual(tau, &k, sign)?;
                worst = worst.max(r.abs() / (1.0 + u.abs()));
            }
        }
    }
    Ok(worst)
}

fn case2_abel_residual() -> Result<f64> {
    let h = 1e-3;
    let mut worst = 0.0f64;
    for (_, k, bridge) in case2_fits()? {
        let y = |t: f64| bridge.point_at(t).map(|p| p.y);
        for i in 1..20 {
            let t = 0.05 * i as f64;
            let (ym2, ym1, y0, yp1, yp2) = (y(t - 2.0 * h)?, y(t - h)?, y(t)?, y(t + h)?, y(t + 2.0 * h)?);
            let yd = (ym2 - 8.0 * ym1 + 8.0 * yp1 - yp2) / (12.0 * h);
            let ydd = (-ym2 + 16.0 * ym1 - 30.0 * y0 + 16.0 * yp1 - yp2) / (12.0 * h * h);
            let r = abel_reduction_residual(y0, yd, ydd, &k);
            worst = worst.max(r.abs() / (1.0 + ydd.abs()));
        }
    }
    Ok(worst)
}

fn case2_tau_inversion() -> Result<f64> {
    let mut worst = 0.0f64;
    for (_, _, bridge) in case2_fits()? {
        let total = bridge.total_time().min(5.0);
        for i in 0..=200 {
            let t = total * i as f64 / 200.0;
            let p = bridge.point_at(t)?;
            worst = worst.max((bridge.t_of_tau(p.tau, p.branch)? - t).abs());
        }
    }
    Ok(worst)
}

fn case2_oracle() -> Result<f64> {
    let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-13);
    let times = grid(0.02, 50);
    let mut worst = 0.0f64;
    for &(d, x0, z0, dc) in &CASE_II_SETS {
        let wp = case2_params(d, dc)?;
        let exact = trajectory_case2(x0, z0, &times, &wp)?;
        if exact.len() != times.len() {
            return Err(Error::NumericalFailure(format!(
                "case II run for {d}, {x0}, {z0} was truncated"
            )));
        }
        let num = integrate(ParticleState::new(x0, z0, 0.0), 1.0, &wp, &cfg)?.resample(&times)?;
        let (dx, dz) = exact.max_difference(&num)?;
        worst = worst.max(dx).max(dz);
    }
    Ok(worst)
}

/// Number of values that do not survive a CSV write and read bit for bit.
fn csv_round_trip() -> Result<f64> {
    let mut rng = StdRng::seed_from_u64(SEED + 4);
    let rows: Vec<io::TrajectoryRow> = (0..2000)
        .map(|i| {
            let mut v = [0.0; 8];
            for slot in v.iter_mut() {
                *slot = f64::from_bits(rng.random::<u64>());
                if !slot.is_finite() {
                    *slot = rng.random_range(-1e3..1e3);
                }
            }
            v[0] = i as f64;
            io::TrajectoryRow {
                t: v[0],
                x: v[1],
                z: v[2],
                X: v[3],
                Z: v[4],
                u: v[5],
                v: v[6],
                p: v[7],
            }
        })
        .collect();
    let mut buf = Vec::new();
    io::write_csv(&rows, &mut buf)?;
    let back = io::read_csv(buf.as_slice())?;
    if back.len() != rows.len() {
        return Ok(f64::INFINITY);
    }
    let bad = rows
        .iter()
        .zip(&back)
        .flat_map(|(a, b)| a.values().into_iter().zip(b.values()))
        .filter(|(p, q)| p.to_bits() != q.to_bits())
        .count();
    Ok(bad as f64)
}

/// Number of configurations whose two runs differ in a single byte.
fn determinism() -> Result<f64> {
    let mut differing = 0.0;
    for (c0, method, format) in [
        (C0Mode::Equal, Method::Numeric, OutputFormat::Csv),
        (C0Mode::Equal, Method::Exact, OutputFormat::Json),
        (C0Mode::Value(0.3), Method::Exact, OutputFormat::Csv),
    ] {
        let cfg = RunConfig {
            delta: 1.0,
            c0,
            x0: -0.1,
            z0: 0.4,
            t_end: 2.0,
            dt_out: 0.05,
            method,
            format,
            allow_fallback: true,
            ..Default::default()
        };
        let render = || -> Result<Vec<u8>> {
            let mut buf = Vec::new();
            write_run_to(&run_trajectory(&cfg)?, format, &mut buf)?;
            Ok(buf)
        };
        if render()? != render()? {
            differing += 1.0;
        }
    }
    Ok(differing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbation_is_flagged() {
        let opts = VerifyOptions {
            perturbation: Some(("special.k_at_zero".into(), 1.0)),
            filter: Some("special.k_".into()),
        };
        let report = run_verify(&opts);
        assert_eq!(report.checks.len(), 2);
        assert!(!report.passed);
        let failed: Vec<_> = report.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["special.k_at_zero"]);
        let back = VerificationReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn names_are_unique() {
        let mut names: Vec<_> = catalogue().into_iter().map(|c| c.0).collect();
        names.sort_unstable();
        let n = names.len();
        names.dedup();
        assert_eq!(names.len(), n);
    }
}
