//! Dormand-Prince 5(4) with the standard fourth-order continuous extension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::{DEFAULT_ABS_TOL, DEFAULT_MAX_STEP, DEFAULT_REL_TOL};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const MAX_STEPS: usize = 5_000_000;

/// Right-hand side of an autonomous or non-autonomous system of size `N`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

impl<F, const N: usize> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        self(t, y)
    }
}

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub dense_output: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            max_step: DEFAULT_MAX_STEP,
            dense_output: true,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Segment<const N: usize> {
    t: f64,
    h: f64,
    rcont: [[f64; N]; 5],
}

/// Piecewise quartic interpolant over the accepted steps.
#[derive(Debug, Clone)]
pub struct DenseOutput<const N: usize> {
    segments: Vec<Segment<N>>,
}

impl<const N: usize> DenseOutput<N> {
    pub fn span(&self) -> Option<(f64, f64)> {
        let first = self.segments.first()?;
        let last = self.segments.last()?;
        Some((first.t, last.t + last.h))
    }

    /// State at `t`, or `None` outside the integrated span.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        let (lo, hi) = self.span()?;
        let slack = 1e-12 * (1.0 + hi.abs());
        if t < lo - slack || t > hi + slack {
            return None;
        }
        let idx = self
            .segments
            .partition_point(|s| s.t + s.h < t)
            .min(self.segments.len() - 1);
        let s = &self.segments[idx];
        let theta = (t - s.t) / s.h;
        let theta1 = 1.0 - theta;
        let r = &s.rcont;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = r[0][i] + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])));
        }
        Some(y)
    }
}

/// Accepted steps of one integration run.
#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub dense: Option<DenseOutput<N>>,
    /// Time at which the stop predicate fired, if it did.
    pub stopped_at: Option<f64>,
    pub rejected_steps: usize,
}

fn error_norm<const N: usize>(y: &[f64; N], ynew: &[f64; N], err: &[f64; N], cfg: &IntegratorConfig) -> f64 {
    let sum: f64 = (0..N)
        .map(|i| {
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(ynew[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `sys` from `(t0, y0)` to `t_end`. Integration stops early
/// (without error) at the first accepted step where `stop` returns true.
pub fn solve<const N: usize, S, P>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    cfg: &IntegratorConfig,
    mut stop: P,
) -> Result<OdeSolution<N>>
where
    S: OdeSystem<N> + ?Sized,
    P: FnMut(f64, &[f64; N]) -> bool,
{
    cfg.validate()?;
    if !(t_end > t0) {
        return Err(Error::Domain(format!(
            "t_end = {t_end} must exceed the initial time {t0}"
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial state must be finite".into()));
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = sys.rhs(t, &y);
    let mut times = vec![t0];
    let mut states = vec![y0];
    let mut segments = Vec::new();
    let mut rejected = 0;
    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;

    let span = t_end - t0;
    let mut h = initial_step(sys, t, &y, &k1, cfg).min(cfg.max_step).min(span);

    for _ in 0..MAX_STEPS {
        if t_end - t <= 1e-14 * t_end.abs().max(1.0) {
            break;
        }
        if t + 1.01 * h >= t_end {
            h = t_end - t;
        }
        let h_floor = 16.0 * f64::EPSILON * t.abs().max(span);
        if h < h_floor {
            return Err(Error::NumericalFailure(format!(
                "step size underflow (h = {h:e}) at t = {t}, state = {y:?}"
            )));
        }

        let k2 = sys.rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = sys.rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = sys.rhs(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = sys.rhs(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = sys.rhs(
            t + h,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let ynew = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = sys.rhs(t + h, &ynew);

        let mut err = [0.0; N];
        for i in 0..N {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = error_norm(&y, &ynew, &err, cfg);
        let finite = ynew.iter().chain(k7.iter()).all(|v| v.is_finite());

        if finite && en <= 1.0 {
            if cfg.dense_output {
                let mut rcont = [[0.0; N]; 5];
                for i in 0..N {
                    let dy = ynew[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    rcont[0][i] = y[i];
                    rcont[1][i] = dy;
                    rcont[2][i] = bspl;
                    rcont[3][i] = dy - h * k7[i] - bspl;
                    rcont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                segments.push(Segment { t, h, rcont });
            }
            t += h;
            y = ynew;
            k1 = k7;
            times.push(t);
            states.push(y);

            let en = en.max(1e-10);
            let fac = (en.powf(0.2 - 0.75 * BETA) / err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut hnew = h / fac;
            if last_rejected {
                hnew = hnew.min(h);
            }
            err_old = en;
            last_rejected = false;
            h = hnew.min(cfg.max_step);

            if stop(t, &y) {
                return Ok(OdeSolution {
                    times,
                    states,
                    dense: cfg.dense_output.then_some(DenseOutput { segments }),
                    stopped_at: Some(t),
                    rejected_steps: rejected,
                });
            }
        } else {
            rejected += 1;
            last_rejected = true;
            h *= if finite {
                (SAFETY * en.powf(-0.2)).clamp(FAC_MIN, 1.0)
            } else {
                0.25
            };
        }
    }

    if t_end - t > 1e-14 * t_end.abs().max(1.0) {
        return Err(Error::NumericalFailure(format!(
            "step budget exhausted at t = {t} before reaching {t_end}"
        )));
    }
    Ok(OdeSolution {
        times,
        states,
        dense: cfg.dense_output.then_some(DenseOutput { segments }),
        stopped_at: None,
        rejected_steps: rejected,
    })
}

fn initial_step<const N: usize, S: OdeSystem<N> + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    cfg: &IntegratorConfig,
) -> f64 {
    let sc: Vec<f64> = y.iter().map(|v| cfg.abs_tol + cfg.rel_tol * v.abs()).collect();
    let norm = |v: &[f64; N]| -> f64 { ((0..N).map(|i| (v[i] / sc[i]).powi(2)).sum::<f64>() / N as f64).sqrt() };
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y, h0, &[(1.0, f0)]);
    let f1 = sys.rhs(t + h0, &y1);
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sys = |_t: f64, y: &[f64; 1]| [-y[0]];
        let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-14);
        let sol = solve(&sys, 0.0, [1.0], 5.0, &cfg, |_, _| false).unwrap();
        let last = sol.states.last().unwrap()[0];
        assert!((last - (-5f64).exp()).abs() < 1e-12);
        assert_eq!(*sol.times.last().unwrap(), 5.0);
    }

    #[test]
    fn dense_output_tracks_harmonic_oscillator() {
        let sys = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let cfg = IntegratorConfig {
            max_step: 0.5,
            ..IntegratorConfig::with_tolerances(1e-11, 1e-12)
        };
        let sol = solve(&sys, 0.0, [0.0, 1.0], 10.0, &cfg, |_, _| false).unwrap();
        let dense = sol.dense.unwrap();
        for k in 0..100 {
            let t = 0.0999 * k as f64;
            let y = dense.eval(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-9, "t = {t}");
        }
        assert!(dense.eval(10.5).is_none());
    }

    #[test]
    fn stop_predicate_ends_early() {
        let sys = |_t: f64, _y: &[f64; 1]| [1.0];
        let sol = solve(&sys, 0.0, [0.0], 10.0, &IntegratorConfig::default(), |_, y| y[0] > 2.0).unwrap();
        assert!(sol.stopped_at.unwrap() < 10.0);
    }

    #[test]
    fn blow_up_reports_failure() {
        let sys = |_t: f64, y: &[f64; 1]| [y[0] * y[0]];
        let r = solve(&sys, 0.0, [1.0], 2.0, &IntegratorConfig::default(), |_, _| false);
        assert!(matches!(r, Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn rejects_bad_configuration() {
        let sys = |_t: f64, y: &[f64; 1]| [y[0]];
        let cfg = IntegratorConfig {
            rel_tol: 0.0,
            ..IntegratorConfig::default()
        };
        assert!(solve(&sys, 0.0, [1.0], 1.0, &cfg, |_, _| false).is_err());
        assert!(solve(&sys, 1.0, [1.0], 1.0, &IntegratorConfig::default(), |_, _| false).is_err());
    }
}
