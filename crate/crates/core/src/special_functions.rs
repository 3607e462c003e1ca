//! Elliptic integrals of the first kind and the Jacobi elliptic functions.
//!
//! The parameter convention is `m = k^2` throughout. `K(m)` comes from the
//! arithmetic-geometric mean, `F(phi|m)` from Carlson's symmetric integral
//! `R_F` after reduction of `phi` to `[-pi/2, pi/2]`, and `sn`, `cn`, `dn`
//! from the descending Landen (AGM) scheme after reduction of `u` modulo
//! `4K`. Accuracy target is about 1e-13 relative for `0 <= m <= 0.999999`.
//!
//! All functions are pure and reentrant.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::HYPERBOLIC_LIMIT_GAP;

/// Squared elliptic modulus `m = k^2` restricted to `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct EllipticModulusSquared(f64);

impl EllipticModulusSquared {
    pub fn new(m: f64) -> Result<Self> {
        if (0.0..1.0).contains(&m) {
            Ok(Self(m))
        } else {
            Err(Error::Domain(format!("squared modulus must lie in [0, 1), got {m}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Complementary parameter `1 - m`.
    pub fn complement(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for EllipticModulusSquared {
    type Error = Error;
    fn try_from(m: f64) -> Result<Self> {
        Self::new(m)
    }
}

impl From<EllipticModulusSquared> for f64 {
    fn from(m: EllipticModulusSquared) -> f64 {
        m.0
    }
}

/// Values of `(sn, cn, dn)` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiTriple {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

fn check_parameter(m: f64) -> Result<()> {
    if !m.is_finite() || m < 0.0 {
        return Err(Error::Domain(format!("parameter m = {m} must be >= 0")));
    }
    if m >= 1.0 {
        return Err(Error::Domain(format!("K(m) diverges for m >= 1 (got m = {m})")));
    }
    Ok(())
}

/// Arithmetic-geometric mean of two non-negative numbers.
pub fn agm(a: f64, b: f64) -> f64 {
    let (mut a, mut b) = (a, b);
    for _ in 0..64 {
        let an = 0.5 * (a + b);
        if (a - b).abs() <= 4.0 * f64::EPSILON * an {
            return an;
        }
        b = (a * b).sqrt();
        a = an;
    }
    a
}

/// Complete elliptic integral of the first kind, `K(m) = pi / (2 agm(1, sqrt(1 - m)))`.
pub fn complete_elliptic_k(m: f64) -> Result<f64> {
    check_parameter(m)?;
    Ok(PI / (2.0 * agm(1.0, (1.0 - m).sqrt())))
}

/// Carlson's symmetric elliptic integral of the first kind.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    const ERRTOL: f64 = 1e-4; // error ~ ERRTOL^6 / 4
    let (mut x, mut y, mut z) = (x, y, z);
    for _ in 0..100 {
        let mu = (x + y + z) / 3.0;
        let dx = 1.0 - x / mu;
        let dy = 1.0 - y / mu;
        let dz = 1.0 - z / mu;
        if dx.abs().max(dy.abs()).max(dz.abs()) < ERRTOL {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / mu.sqrt();
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
    }
    let mu = (x + y + z) / 3.0;
    1.0 / mu.sqrt()
}

/// Incomplete elliptic integral of the first kind `F(phi|m)` for real `phi`.
///
/// Accepts `0 <= m <= 1`; at `m = 1` only `|phi| < pi/2` is finite.
pub fn incomplete_elliptic_f(phi: f64, m: f64) -> Result<f64> {
    if !phi.is_finite() {
        return Err(Error::Domain(format!("phi must be finite, got {phi}")));
    }
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Domain(format!("parameter m = {m} outside [0, 1]")));
    }
    if m == 1.0 && phi.abs() >= FRAC_PI_2 {
        return Err(Error::Domain("F(phi|1) diverges for |phi| >= pi/2".to_string()));
    }
    let n = (phi / PI).round();
    let reduced = phi - n * PI;
    let s = reduced.sin();
    let c = reduced.cos();
    let partial = s * carlson_rf(c * c, 1.0 - m * s * s, 1.0);
    if n == 0.0 {
        Ok(partial)
    } else {
        Ok(2.0 * n * complete_elliptic_k(m)? + partial)
    }
}

/// Jacobi elliptic functions `sn(u|m)`, `cn(u|m)`, `dn(u|m)`.
pub fn jacobi_elliptic(u: f64, m: EllipticModulusSquared) -> JacobiTriple {
    let m = m.value();
    if m == 0.0 {
        return JacobiTriple {
            sn: u.sin(),
            cn: u.cos(),
            dn: 1.0,
        };
    }
    if 1.0 - m < HYPERBOLIC_LIMIT_GAP {
        let sech = 1.0 / u.cosh();
        return JacobiTriple {
            sn: u.tanh(),
            cn: sech,
            dn: sech,
        };
    }
    let quarter = PI / (2.0 * agm(1.0, (1.0 - m).sqrt()));
    let period = 4.0 * quarter;
    let u = u - period * (u / period).round();
    landen(u, m)
}

fn landen(u: f64, m: f64) -> JacobiTriple {
    const MAX_LEVELS: usize = 16;
    let mut a = [0.0; MAX_LEVELS + 1];
    let mut c = [0.0; MAX_LEVELS + 1];
    a[0] = 1.0;
    let mut b = (1.0 - m).sqrt();
    c[0] = m.sqrt();
    let mut n = 0;
    while n < MAX_LEVELS && c[n].abs() > f64::EPSILON * a[n] {
        a[n + 1] = 0.5 * (a[n] + b);
        c[n + 1] = 0.5 * (a[n] - b);
        b = (a[n] * b).sqrt();
        n += 1;
    }
    let mut phi = (1u64 << n) as f64 * a[n] * u;
    for k in (1..=n).rev() {
        phi = 0.5 * (phi + (c[k] / a[k] * phi.sin()).asin());
    }
    let (sn, cn) = phi.sin_cos();
    // 1 - m sn^2 written without cancellation; the ratio form
    // cn / cos(phi_1 - phi_0) degenerates to 0/0 at u = K.
    let dn = ((1.0 - m) + m * cn * cn).sqrt();
    JacobiTriple { sn, cn, dn }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn modulus(m: f64) -> EllipticModulusSquared {
        EllipticModulusSquared::new(m).unwrap()
    }

    #[test]
    fn modulus_rejects_outside_unit_interval() {
        assert!(EllipticModulusSquared::new(1.0).is_err());
        assert!(EllipticModulusSquared::new(-1e-3).is_err());
        assert!(EllipticModulusSquared::new(f64::NAN).is_err());
        assert!(EllipticModulusSquared::new(0.0).is_ok());
    }

    #[test]
    fn k_at_zero_is_half_pi() {
        assert!((complete_elliptic_k(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn k_diverges_at_one() {
        assert!(matches!(complete_elliptic_k(1.0), Err(Error::Domain(_))));
        assert!(complete_elliptic_k(1.5).is_err());
    }

    #[test]
    fn k_near_one_is_large_and_finite() {
        let k = complete_elliptic_k(0.999999).unwrap();
        assert!(k.is_finite() && k > 7.0);
        // K ~ ln(4 / sqrt(1 - m)) as m -> 1
        let asym = (4.0 / (1e-6f64).sqrt()).ln();
        assert!((k - asym).abs() < 1e-5);
    }

    #[test]
    fn f_reduces_to_phi_for_zero_parameter() {
        for phi in [-4.0, -0.3, 0.0, 1.2, 7.5] {
            assert!((incomplete_elliptic_f(phi, 0.0).unwrap() - phi).abs() < 1e-14);
        }
    }

    #[test]
    fn f_at_quarter_period_is_k() {
        let k = complete_elliptic_k(0.5).unwrap();
        let f = incomplete_elliptic_f(FRAC_PI_2, 0.5).unwrap();
        assert!((f - k).abs() < 1e-14 * k);
    }

    #[test]
    fn f_domain_errors() {
        assert!(incomplete_elliptic_f(FRAC_PI_2, 1.0).is_err());
        assert!(incomplete_elliptic_f(0.5, 1.0).is_ok());
        assert!(incomplete_elliptic_f(0.5, 1.1).is_err());
        assert!(incomplete_elliptic_f(f64::INFINITY, 0.3).is_err());
    }

    #[test]
    fn jacobi_at_origin() {
        let t = jacobi_elliptic(0.0, modulus(0.7));
        assert_eq!((t.sn, t.cn, t.dn), (0.0, 1.0, 1.0));
    }

    #[test]
    fn jacobi_circular_limit() {
        for u in [-3.0, 0.4, 2.0, 11.0] {
            let t = jacobi_elliptic(u, modulus(0.0));
            assert!((t.sn - u.sin()).abs() < 1e-15);
            assert!((t.cn - u.cos()).abs() < 1e-15);
            assert_eq!(t.dn, 1.0);
        }
    }

    #[test]
    fn jacobi_hyperbolic_limit() {
        let t = jacobi_elliptic(0.8, modulus(1.0 - 1e-13));
        assert!((t.sn - 0.8f64.tanh()).abs() < 1e-12);
        assert!((t.dn - 1.0 / 0.8f64.cosh()).abs() < 1e-12);
    }

    #[test]
    fn dn_has_period_two_k() {
        let m = modulus(0.6);
        let k = complete_elliptic_k(0.6).unwrap();
        for u in [-1.3, 0.2, 2.9] {
            let a = jacobi_elliptic(u, m);
            let b = jacobi_elliptic(u + 2.0 * k, m);
            assert!((a.dn - b.dn).abs() < 1e-12);
            assert!((a.sn + b.sn).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn identities_hold(u in -40.0f64..40.0, m in 0.0f64..0.999) {
            let t = jacobi_elliptic(u, modulus(m));
            prop_assert!((t.sn * t.sn + t.cn * t.cn - 1.0).abs() < 1e-12);
            prop_assert!((t.dn * t.dn + m * t.sn * t.sn - 1.0).abs() < 1e-12);
            prop_assert!(t.dn > 0.0);
        }

        #[test]
        fn parity(u in -10.0f64..10.0, m in 0.0f64..0.99) {
            let p = jacobi_elliptic(u, modulus(m));
            let q = jacobi_elliptic(-u, modulus(m));
            prop_assert!((p.sn + q.sn).abs() < 1e-13);
            prop_assert!((p.cn - q.cn).abs() < 1e-13);
            prop_assert!((p.dn - q.dn).abs() < 1e-13);
        }

        #[test]
        fn f_is_odd(phi in -10.0f64..10.0, m in 0.0f64..0.99) {
            let a = incomplete_elliptic_f(phi, m).unwrap();
            let b = incomplete_elliptic_f(-phi, m).unwrap();
            prop_assert!((a + b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }
}
