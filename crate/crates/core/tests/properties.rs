//! Property tests for the domain-type invariants.

use std::f64::consts::PI;

use capwave_core::particle_dynamics::{to_lab, to_moving};
use capwave_core::{
    dispersion_speed, field_sample, first_integral_constants, fit_constants, integrate, trajectory_case2,
    EllipticModulusSquared, Error, IntegratorConfig, ParticleState, RunConfig, TauBridge, WaveParameters,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modulus_outside_unit_interval_is_rejected(m in prop_oneof![-10.0f64..-1e-12, 1.0f64..10.0]) {
        prop_assert!(EllipticModulusSquared::new(m).is_err());
    }

    #[test]
    fn modulus_inside_unit_interval_is_kept(m in 0.0f64..1.0) {
        prop_assert_eq!(EllipticModulusSquared::new(m).unwrap().value(), m);
    }

    #[test]
    fn speed_solves_the_dispersion_relation(delta in 1e-3f64..5.0, weber in 0.0f64..5.0) {
        let c = dispersion_speed(delta, weber).unwrap();
        let kd = 2.0 * PI * delta;
        let rhs = kd.tanh() / kd * (1.0 + kd * kd * weber);
        prop_assert!(c > 0.0);
        prop_assert!((c * c - rhs).abs() <= 1e-14 * rhs);
    }

    #[test]
    fn no_flow_through_the_bed(delta in 0.05f64..2.0, weber in 0.0f64..2.0, c0 in -1.0f64..1.0,
                               x in -5.0f64..5.0, t in 0.0f64..10.0) {
        let wp = WaveParameters::new(delta, weber, c0).unwrap();
        prop_assert_eq!(field_sample(x, 0.0, t, &wp).unwrap().v, 0.0);
    }

    #[test]
    fn frame_transform_round_trip(delta in 0.05f64..2.0, c0 in -1.0f64..1.0,
                                  x in -5.0f64..5.0, z in 0.0f64..1.0, t in 0.0f64..10.0) {
        let wp = WaveParameters::new(delta, 0.0, c0).unwrap();
        let lab = ParticleState::new(x, z, t);
        let m = to_moving(lab, &wp);
        prop_assert!((m.X - 2.0 * PI * (x - wp.c * t)).abs() < 1e-12);
        prop_assert!((m.Z - 2.0 * PI * delta * z).abs() < 1e-12);
        let back = to_lab(m, &wp);
        prop_assert!((back.x - x).abs() < 1e-13 * (1.0 + x.abs() + wp.c * t));
        prop_assert!((back.z - z).abs() < 1e-14);
    }

    #[test]
    fn physical_constants_lie_outside_the_closed_form_x_regime(
        delta in 0.1f64..1.5, x0 in -PI..PI, zr in 0.0f64..1.0,
    ) {
        let wp = WaveParameters::co_moving(delta, 0.0).unwrap();
        let k = first_integral_constants(x0, zr * 2.0 * PI * delta, &wp).unwrap();
        let scale = k.c1.abs().max(1.0);
        prop_assert!(k.a_sq > 0.0);
        prop_assert!(k.c1 >= k.a_sq * (1.0 - 1e-12));
        prop_assert!(k.c2 <= -k.a_sq * (1.0 - 1e-12));
        prop_assert!((k.c1 + k.c2).abs() <= 1e-10 * scale);
    }

    #[test]
    fn numeric_timestamps_increase(delta in 0.3f64..1.5, dc in -0.3f64..0.3, x0 in -0.5f64..0.5, z0 in 0.0f64..1.0) {
        let c = dispersion_speed(delta, 0.0).unwrap();
        let wp = WaveParameters::new(delta, 0.0, c + dc).unwrap();
        let tr = integrate(ParticleState::new(x0, z0, 0.0), 1.0, &wp, &IntegratorConfig::default()).unwrap();
        prop_assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
        prop_assert_eq!(tr.samples[0], ParticleState::new(x0, z0, 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bridge_times_are_monotone_on_each_branch(
        delta in 0.4f64..1.2, dc in prop_oneof![-0.3f64..-0.02, 0.02f64..0.3],
        x0 in -0.2f64..0.2, z0 in 0.1f64..0.9,
    ) {
        let wp = WaveParameters::new(delta, 0.0, dispersion_speed(delta, 0.0).unwrap() + dc).unwrap();
        let k = match fit_constants(2.0 * PI * x0, 2.0 * PI * delta * z0, &wp) {
            Err(Error::UnsupportedInitialData(_)) => return Ok(()),
            other => other.unwrap(),
        };
        prop_assert!(k.b != 0.0);
        prop_assert!(k.tau_domain.0 <= k.tau_domain.1);
        let bridge = TauBridge::new(&k).unwrap();
        let t = bridge.t_values();
        let per = t.len() / bridge.branch_count();
        for branch in t.chunks(per) {
            prop_assert!(branch.windows(2).all(|w| w[1] > w[0]), "{:?}", branch);
        }
    }

    #[test]
    fn case_ii_starts_at_the_initial_point(
        delta in 0.4f64..1.2, dc in prop_oneof![-0.3f64..-0.02, 0.02f64..0.3],
        x0 in -0.2f64..0.2, z0 in 0.0f64..0.9,
    ) {
        let wp = WaveParameters::new(delta, 0.0, dispersion_speed(delta, 0.0).unwrap() + dc).unwrap();
        let tr = trajectory_case2(x0, z0, &[0.0, 0.1], &wp).unwrap();
        prop_assert!((tr.samples[0].x - x0).abs() < 1e-10);
        prop_assert!((tr.samples[0].z - z0).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn invalid_configs_are_rejected(
        which in 0usize..5, bad in prop_oneof![-5.0f64..=0.0, Just(f64::NAN), Just(f64::INFINITY)],
    ) {
        let mut cfg = RunConfig::default();
        match which {
            0 => cfg.delta = bad,
            1 => cfg.weber = bad.min(-1e-9),
            2 => cfg.z0 = if bad.is_finite() { bad - 1e-9 } else { bad },
            3 => cfg.t_end = bad,
            _ => cfg.dt_out = bad,
        }
        prop_assert!(cfg.validate().is_err());
    }
}
