//! Particle-path ODEs in the lab and moving frames, and the adaptive
//! integrator used as the reference solution for the closed forms.

pub mod ode;

use std::fmt;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::periodic_trapezoid;
use crate::tolerances::escape_height;
use crate::wave_model::{field_values, WaveParameters, WAVENUMBER};

pub use ode::{DenseOutput, IntegratorConfig, OdeSolution, OdeSystem};

/// Particle position in the lab frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParticleState {
    pub x: f64,
    pub z: f64,
    pub t: f64,
}

impl ParticleState {
    pub fn new(x: f64, z: f64, t: f64) -> Self {
        Self { x, z, t }
    }
}

/// Position in the frame travelling with the wave, `X = 2 pi (x - c t)`,
/// `Z = 2 pi delta z`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct MovingFrameState {
    pub X: f64,
    pub Z: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    Lab,
    Moving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameDirection {
    LabToMoving,
    MovingToLab,
}

/// How a trajectory was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    #[serde(rename = "exact-case-I")]
    ExactCaseI,
    #[serde(rename = "exact-case-II")]
    ExactCaseII,
    Numeric,
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodTag::ExactCaseI => "exact-case-I",
            MethodTag::ExactCaseII => "exact-case-II",
            MethodTag::Numeric => "numeric",
        })
    }
}

/// Origin of one coordinate of an exact trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentSource {
    ClosedForm,
    /// Bed particle: the coordinate has an elementary closed form.
    Degenerate,
    NumericFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub params: WaveParameters,
    pub method: MethodTag,
    pub x_source: ComponentSource,
    pub z_source: ComponentSource,
    /// Last time covered by the closed form, when numeric continuation
    /// took over afterwards.
    pub exact_until: Option<f64>,
    /// Time at which the trajectory was cut short, if it was.
    pub truncated_at: Option<f64>,
    pub warnings: Vec<String>,
}

impl TrajectoryMeta {
    pub fn numeric(params: WaveParameters) -> Self {
        Self {
            params,
            method: MethodTag::Numeric,
            x_source: ComponentSource::NumericFallback,
            z_source: ComponentSource::NumericFallback,
            exact_until: None,
            truncated_at: None,
            warnings: Vec::new(),
        }
    }
}

/// Continuous evaluation of a trajectory between its samples.
pub trait PathEvaluator: Send + Sync {
    /// Lab-frame `(x, z)` at `t`, or `None` outside the covered span.
    fn position(&self, t: f64) -> Option<(f64, f64)>;
}

impl PathEvaluator for DenseOutput<2> {
    fn position(&self, t: f64) -> Option<(f64, f64)> {
        self.eval(t).map(|y| (y[0], y[1]))
    }
}

impl<F> PathEvaluator for F
where
    F: Fn(f64) -> Option<(f64, f64)> + Send + Sync,
{
    fn position(&self, t: f64) -> Option<(f64, f64)> {
        self(t)
    }
}

/// Time-ordered particle samples plus provenance.
#[derive(Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<ParticleState>,
    pub frame: Frame,
    pub meta: TrajectoryMeta,
    #[serde(skip)]
    evaluator: Option<Arc<dyn PathEvaluator>>,
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trajectory")
            .field("samples", &self.samples)
            .field("frame", &self.frame)
            .field("meta", &self.meta)
            .field("continuous", &self.evaluator.is_some())
            .finish()
    }
}

impl PartialEq for Trajectory {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples && self.frame == other.frame && self.meta == other.meta
    }
}

impl Trajectory {
    /// Builds a lab-frame trajectory; timestamps must increase strictly.
    pub fn new(samples: Vec<ParticleState>, meta: TrajectoryMeta) -> Result<Self> {
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::Domain("trajectory timestamps must increase strictly".into()));
        }
        if samples
            .iter()
            .any(|s| !(s.x.is_finite() && s.z.is_finite() && s.t.is_finite()))
        {
            return Err(Error::NumericalFailure("trajectory contains non-finite samples".into()));
        }
        Ok(Self {
            samples,
            frame: Frame::Lab,
            meta,
            evaluator: None,
        })
    }

    pub fn with_evaluator(mut self, evaluator: Arc<dyn PathEvaluator>) -> Self {
        self.evaluator = Some(evaluator);
        self
    }

    pub fn has_evaluator(&self) -> bool {
        self.evaluator.is_some()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }

    /// Lab-frame position at `t`: continuous evaluation when available,
    /// otherwise an exact sample hit.
    pub fn position_at(&self, t: f64) -> Result<(f64, f64)> {
        let lab = self.to_frame(Frame::Lab);
        if let Some(ev) = &lab.evaluator {
            if let Some(p) = ev.position(t) {
                return Ok(p);
            }
        }
        let scale = 1e-12 * t.abs().max(1.0);
        lab.samples
            .iter()
            .find(|s| (s.t - t).abs() <= scale)
            .map(|s| (s.x, s.z))
            .ok_or_else(|| Error::Range(format!("t = {t} is not covered by the trajectory")))
    }

    /// Re-evaluates the trajectory at `times` (lab frame).
    pub fn resample(&self, times: &[f64]) -> Result<Trajectory> {
        let samples = times
            .iter()
            .map(|&t| self.position_at(t).map(|(x, z)| ParticleState { x, z, t }))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Trajectory::new(samples, self.meta.clone())?;
        out.evaluator = self.evaluator.clone();
        Ok(out)
    }

    /// Same path with samples expressed in `frame`. Samples keep the
    /// `ParticleState` layout with `x, z` holding `X, Z` in the moving frame.
    pub fn to_frame(&self, frame: Frame) -> Trajectory {
        if frame == self.frame {
            return self.clone();
        }
        let wp = &self.meta.params;
        let samples = self
            .samples
            .iter()
            .map(|s| match frame {
                Frame::Moving => {
                    let m = to_moving(*s, wp);
                    ParticleState::new(m.X, m.Z, m.t)
                }
                Frame::Lab => to_lab(MovingFrameState { X: s.x, Z: s.z, t: s.t }, wp),
            })
            .collect();
        Trajectory {
            samples,
            frame,
            meta: self.meta.clone(),
            evaluator: self.evaluator.clone(),
        }
    }

    /// Largest pointwise distance between two trajectories sampled at the
    /// same times, separately for `x` and `z`.
    pub fn max_difference(&self, other: &Trajectory) -> Result<(f64, f64)> {
        let a = self.to_frame(Frame::Lab);
        let b = other.to_frame(Frame::Lab);
        if a.samples.len() != b.samples.len() {
            return Err(Error::Range(format!(
                "sample counts differ ({} vs {})",
                a.samples.len(),
                b.samples.len()
            )));
        }
        let mut dx: f64 = 0.0;
        let mut dz: f64 = 0.0;
        for (p, q) in a.samples.iter().zip(&b.samples) {
            if (p.t - q.t).abs() > 1e-12 * p.t.abs().max(1.0) {
                return Err(Error::Range(format!("sample times differ: {} vs {}", p.t, q.t)));
            }
            dx = dx.max((p.x - q.x).abs());
            dz = dz.max((p.z - q.z).abs());
        }
        Ok((dx, dz))
    }
}

/// Lab-frame velocity `(dx/dt, dz/dt) = (u, v)` of the linear field.
pub fn rhs_lab(state: ParticleState, wp: &WaveParameters) -> (f64, f64) {
    let f = field_values(state.x, state.z, state.t, wp);
    (f.u, f.v)
}

/// Moving-frame velocity `(A cosh Z cos X + b, A sinh Z sin X)`.
pub fn rhs_moving(state: MovingFrameState, wp: &WaveParameters) -> (f64, f64) {
    let a = wp.frame_prefactor();
    let b = WAVENUMBER * (wp.c0 - wp.c);
    let (s, c) = state.X.sin_cos();
    (a * state.Z.cosh() * c + b, a * state.Z.sinh() * s)
}

pub fn to_moving(state: ParticleState, wp: &WaveParameters) -> MovingFrameState {
    MovingFrameState {
        X: WAVENUMBER * (state.x - wp.c * state.t),
        Z: WAVENUMBER * wp.delta * state.z,
        t: state.t,
    }
}

pub fn to_lab(state: MovingFrameState, wp: &WaveParameters) -> ParticleState {
    ParticleState {
        x: state.X / WAVENUMBER + wp.c * state.t,
        z: state.Z / (WAVENUMBER * wp.delta),
        t: state.t,
    }
}

/// Either frame's state, for [`transform_frame`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnyState {
    Lab(ParticleState),
    Moving(MovingFrameState),
}

/// Converts between frames. A state already in the target frame is
/// returned unchanged.
pub fn transform_frame(state: AnyState, wp: &WaveParameters, direction: FrameDirection) -> AnyState {
    match (state, direction) {
        (AnyState::Lab(s), FrameDirection::LabToMoving) => AnyState::Moving(to_moving(s, wp)),
        (AnyState::Moving(s), FrameDirection::MovingToLab) => AnyState::Lab(to_lab(s, wp)),
        (s, _) => s,
    }
}

/// Lab-frame particle ODE. `wave_factor` scales the wave-induced part of
/// the velocity; 1 is the physical system, 0 leaves only the current.
#[derive(Debug, Clone, Copy)]
pub struct ParticleSystem {
    pub wp: WaveParameters,
    pub wave_factor: f64,
}

impl ParticleSystem {
    pub fn new(wp: WaveParameters) -> Self {
        Self { wp, wave_factor: 1.0 }
    }

    pub fn with_wave_factor(wp: WaveParameters, wave_factor: f64) -> Self {
        Self { wp, wave_factor }
    }
}

impl OdeSystem<2> for ParticleSystem {
    fn rhs(&self, t: f64, y: &[f64; 2]) -> [f64; 2] {
        let (u, v) = rhs_lab(ParticleState::new(y[0], y[1], t), &self.wp);
        [self.wave_factor * (u - self.wp.c0) + self.wp.c0, self.wave_factor * v]
    }
}

/// Integrates the lab-frame particle ODE from `initial` to `t_end`.
///
/// Leaving the strip `0 <= z <= 1` only produces a warning. Once `|z|`
/// exceeds the escape height the velocity grows like `exp(2 pi delta z)`
/// and the run is truncated, recorded in `meta.truncated_at`.
pub fn integrate(
    initial: ParticleState,
    t_end: f64,
    wp: &WaveParameters,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_system(&ParticleSystem::new(*wp), initial, t_end, cfg)
}

pub fn integrate_system(
    sys: &ParticleSystem,
    initial: ParticleState,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if !(initial.x.is_finite() && initial.z.is_finite() && initial.t.is_finite()) {
        return Err(Error::Domain("initial state must be finite".into()));
    }
    let cap = escape_height(sys.wp.delta);
    let sol = ode::solve(sys, initial.t, [initial.x, initial.z], t_end, cfg, |_, y| {
        y[1].abs() > cap
    })?;

    let mut meta = TrajectoryMeta::numeric(sys.wp);
    if let Some(t) = sol.stopped_at {
        let msg = format!("particle passed |z| = {cap} at t = {t}; trajectory truncated");
        warn!("{msg}");
        meta.truncated_at = Some(t);
        meta.warnings.push(msg);
    }
    if let Some(idx) = sol.states.iter().position(|y| !(0.0..=1.0).contains(&y[1])) {
        let msg = format!(
            "particle left the strip 0 <= z <= 1 at t ~ {}; the linear field is continued analytically",
            sol.times[idx]
        );
        warn!("{msg}");
        meta.warnings.push(msg);
    }

    let samples = sol
        .times
        .iter()
        .zip(&sol.states)
        .map(|(&t, y)| ParticleState::new(y[0], y[1], t))
        .collect();
    let traj = Trajectory::new(samples, meta)?;
    Ok(match sol.dense {
        Some(d) => traj.with_evaluator(Arc::new(d)),
        None => traj,
    })
}

/// Average of `u` over one wavelength at height `z` and time `t`.
pub fn mean_current_check(z: f64, t: f64, wp: &WaveParameters) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("z must lie in [0, 1], got {z}")));
    }
    // The trapezoid rule is exact for trigonometric polynomials of degree < 64.
    Ok(periodic_trapezoid(|x| field_values(x, z, t, wp).u, 0.0, 1.0, 64))
}

/// Net displacement `(x(t0 + period) - x(t0), z(t0 + period) - z(t0))`.
pub fn drift_diagnostic(traj: &Trajectory, period: f64) -> Result<(f64, f64)> {
    let (t0, t1) = traj.span().ok_or_else(|| Error::Range("empty trajectory".into()))?;
    if !(period > 0.0) || t0 + period > t1 + 1e-12 * t1.abs().max(1.0) {
        return Err(Error::Range(format!(
            "period {period} exceeds the trajectory span [{t0}, {t1}]"
        )));
    }
    let (xa, za) = traj.position_at(t0)?;
    let (xb, zb) = traj.position_at(t0 + period)?;
    Ok((xb - xa, zb - za))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wp() -> WaveParameters {
        WaveParameters::new(0.4, 0.3, 0.0).unwrap()
    }

    #[test]
    fn bed_particle_has_no_vertical_velocity() {
        let (_, v) = rhs_lab(ParticleState::new(0.3, 0.0, 0.7), &wp());
        assert_eq!(v, 0.0);
        let (_, vz) = rhs_moving(MovingFrameState { X: 1.0, Z: 0.0, t: 0.0 }, &wp());
        assert_eq!(vz, 0.0);
    }

    #[test]
    fn co_moving_node_moves_at_wave_speed() {
        let wp = WaveParameters::co_moving(0.5, 0.0).unwrap();
        // cos(2 pi (x - c t)) = 0 at x - c t = 1/4
        let (u, _) = rhs_lab(ParticleState::new(0.25, 0.5, 0.0), &wp);
        assert!((u - wp.c).abs() < 1e-15);
        let (xd, _) = rhs_moving(
            MovingFrameState {
                X: std::f64::consts::FRAC_PI_2,
                Z: 0.4,
                t: 0.0,
            },
            &wp,
        );
        assert!(xd.abs() < 1e-15);
    }

    #[test]
    fn frame_examples() {
        let wp = wp();
        let m = to_moving(ParticleState::new(wp.c * 2.0, 0.0, 2.0), &wp);
        assert!(m.X.abs() < 1e-15 && m.Z == 0.0);
        let m = to_moving(ParticleState::new(0.0, 1.0, 0.0), &wp);
        assert!((m.Z - WAVENUMBER * wp.delta).abs() < 1e-15);
        let s = AnyState::Lab(ParticleState::new(0.1, 0.2, 0.3));
        assert_eq!(transform_frame(s, &wp, FrameDirection::MovingToLab), s);
    }

    #[test]
    fn zero_wave_factor_gives_straight_line() {
        let wp = wp();
        let sys = ParticleSystem::with_wave_factor(wp, 0.0);
        let traj = integrate_system(
            &sys,
            ParticleState::new(0.1, 0.5, 0.0),
            3.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        for s in &traj.samples {
            assert!((s.x - (0.1 + wp.c0 * s.t)).abs() < 1e-13);
            assert_eq!(s.z, 0.5);
        }
        let (dx, dz) = drift_diagnostic(&traj, 2.0).unwrap();
        assert!((dx - 2.0 * wp.c0).abs() < 1e-13 && dz == 0.0);
    }

    #[test]
    fn halving_tolerance_changes_endpoint_little() {
        let wp = wp();
        let run = |tol: f64| {
            let cfg = IntegratorConfig::with_tolerances(tol, tol);
            let tr = integrate(ParticleState::new(0.0, 0.6, 0.0), 2.0, &wp, &cfg).unwrap();
            *tr.samples.last().unwrap()
        };
        let a = run(1e-8);
        let b = run(5e-9);
        assert!((a.x - b.x).abs() < 1e-7 && (a.z - b.z).abs() < 1e-7, "{a:?} {b:?}");
    }

    #[test]
    fn mean_current_examples() {
        for c0 in [-0.3, 0.0, 0.7] {
            let wp = WaveParameters::new(0.5, 1.0, c0).unwrap();
            let m = mean_current_check(0.4, 1.3, &wp).unwrap();
            assert!((m - c0).abs() < 1e-10);
        }
        assert!(mean_current_check(1.2, 0.0, &wp()).is_err());
    }

    #[test]
    fn generic_trajectory_drifts() {
        let wp = wp();
        let tr = integrate(
            ParticleState::new(0.0, 0.5, 0.0),
            3.0,
            &wp,
            &IntegratorConfig::default(),
        )
        .unwrap();
        let (dx, _) = drift_diagnostic(&tr, 2.5).unwrap();
        assert!(dx.abs() > 1e-3);
        assert!(matches!(drift_diagnostic(&tr, 5.0), Err(Error::Range(_))));
    }

    #[test]
    fn escaping_particle_is_truncated_with_warning() {
        // Co-moving current at a crest column: Z grows without bound.
        let wp = WaveParameters::co_moving(0.3, 0.0).unwrap();
        let tr = integrate(
            ParticleState::new(-0.2, 0.9, 0.0),
            50.0,
            &wp,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(tr.meta.truncated_at.is_some());
        assert!(!tr.meta.warnings.is_empty());
    }

    #[test]
    fn resample_and_frames() {
        let wp = wp();
        let tr = integrate(
            ParticleState::new(0.0, 0.5, 0.0),
            1.0,
            &wp,
            &IntegratorConfig::default(),
        )
        .unwrap();
        let rs = tr.resample(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(rs.len(), 3);
        let back = rs.to_frame(Frame::Moving).to_frame(Frame::Lab);
        for (p, q) in rs.samples.iter().zip(&back.samples) {
            assert!((p.x - q.x).abs() < 1e-14 && (p.z - q.z).abs() < 1e-14);
        }
        assert!(Trajectory::new(
            vec![ParticleState::new(0.0, 0.0, 1.0), ParticleState::new(0.0, 0.0, 1.0)],
            TrajectoryMeta::numeric(wp)
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn chain_rule_consistency(x in -3.0..3.0f64, z in 0.0..1.0f64, t in 0.0..5.0f64,
                                  delta in 0.05..2.0f64, we in 0.0..3.0f64, c0 in -1.0..1.0f64) {
            let wp = WaveParameters::new(delta, we, c0).unwrap();
            let lab = ParticleState::new(x, z, t);
            let (xd, zd) = rhs_lab(lab, &wp);
            let (xm, zm) = rhs_moving(to_moving(lab, &wp), &wp);
            let scale = 1.0 + xm.abs() + zm.abs();
            prop_assert!((WAVENUMBER * (xd - wp.c) - xm).abs() < 1e-12 * scale);
            prop_assert!((WAVENUMBER * delta * zd - zm).abs() < 1e-12 * scale);
        }

        #[test]
        fn frame_round_trip(x in -10.0..10.0f64, z in -1.0..2.0f64, t in -5.0..5.0f64, delta in 0.05..2.0f64) {
            let wp = WaveParameters::new(delta, 0.0, 0.1).unwrap();
            let s = ParticleState::new(x, z, t);
            let r = to_lab(to_moving(s, &wp), &wp);
            prop_assert!((r.x - x).abs() <= 1e-14 * (1.0 + x.abs() + (wp.c * t).abs()));
            prop_assert!((r.z - z).abs() <= 1e-14 * (1.0 + z.abs()));
            prop_assert_eq!(r.t, t);
        }
    }
}
