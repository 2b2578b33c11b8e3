//! Andoyer–Deprit chart `(L, H, G, l, g)` of the phase space `{(M, gamma): |gamma| = 1}`.
//!
//! `G = |M|`, `L = M3`, `H = (M, gamma)`. The chart is regular away from the planes
//! `L/G = ±1` (where `l` is undefined) and `H/G = ±1` (where `g` is undefined).

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance from the singular planes below which the chart is rejected.
pub const DEFAULT_SING_EPS: f64 = 1e-6;

/// Floor on `|M|` for the inverse chart.
pub const MOMENTUM_FLOOR: f64 = 1e-12;

/// Andoyer–Deprit coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdState {
    /// `L = M3`.
    pub l_mom: f64,
    /// `H = (M, gamma)`.
    pub h_mom: f64,
    /// `G = |M|`.
    pub g_mom: f64,
    pub l_angle: f64,
    pub g_angle: f64,
}

impl AdState {
    pub fn eta(&self) -> f64 {
        self.l_mom / self.g_mom
    }

    pub fn xi(&self) -> f64 {
        self.h_mom / self.g_mom
    }
}

/// Reduces an angle to `[0, 2 pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed difference `a - b` reduced to `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

pub(crate) fn check_ratios(eta: f64, xi: f64, eps: f64) -> Result<()> {
    let ok = |v: f64| v.is_finite() && v.abs() < 1.0 - eps;
    if ok(eta) && ok(xi) {
        Ok(())
    } else {
        Err(Error::SingularChart { eta, xi })
    }
}

/// `(M, gamma)` from the ratios `eta = L/G`, `xi = H/G` and the two angles, with `G = 1`.
pub(crate) fn unit_momentum_frame(
    eta: f64,
    xi: f64,
    l: f64,
    g: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let se = (1.0 - eta * eta).sqrt();
    let sx = (1.0 - xi * xi).sqrt();
    let (sl, cl) = l.sin_cos();
    let (sg, cg) = g.sin_cos();
    let m = Vector3::new(se * sl, se * cl, eta);
    let a = xi * se + eta * sx * cg;
    let gamma = Vector3::new(
        a * sl + sx * sg * cl,
        a * cl - sx * sg * sl,
        xi * eta - se * sx * cg,
    );
    (m, gamma)
}

/// Chart map `(L, H, G, l, g) -> (M, gamma)` using the default singularity margin.
pub fn ad_to_cartesian(ad: &AdState) -> Result<(Vector3<f64>, Vector3<f64>)> {
    ad_to_cartesian_with(ad, DEFAULT_SING_EPS)
}

pub fn ad_to_cartesian_with(ad: &AdState, sing_eps: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
    if !(ad.g_mom > 0.0) {
        return Err(Error::ZeroMomentum { norm: ad.g_mom });
    }
    let (eta, xi) = (ad.eta(), ad.xi());
    check_ratios(eta, xi, sing_eps)?;
    let (m, gamma) = unit_momentum_frame(eta, xi, ad.l_angle, ad.g_angle);
    Ok((m * ad.g_mom, gamma))
}

/// Inverse chart using the default singularity margin.
pub fn cartesian_to_ad(m: &Vector3<f64>, gamma: &Vector3<f64>) -> Result<AdState> {
    cartesian_to_ad_with(m, gamma, DEFAULT_SING_EPS)
}

pub fn cartesian_to_ad_with(
    m: &Vector3<f64>,
    gamma: &Vector3<f64>,
    sing_eps: f64,
) -> Result<AdState> {
    let g_mom = m.norm();
    if !(g_mom >= MOMENTUM_FLOOR) {
        return Err(Error::ZeroMomentum { norm: g_mom });
    }
    let l_mom = m.z;
    let h_mom = m.dot(gamma);
    let (eta, xi) = (l_mom / g_mom, h_mom / g_mom);
    check_ratios(eta, xi, sing_eps)?;
    let l_angle = m.x.atan2(m.y);
    let (sin_g, cos_g) = g_components(eta, xi, l_angle, gamma);
    Ok(AdState {
        l_mom,
        h_mom,
        g_mom,
        l_angle: normalize_angle(l_angle),
        g_angle: normalize_angle(sin_g.atan2(cos_g)),
    })
}

/// `(sx sin g, sx cos g)` with `sx = sqrt(1 - xi^2)` recovered from `gamma`.
///
/// Rotating `(gamma1, gamma2)` by `l` gives `p = xi se + eta sx cos g` and
/// `q = sx sin g`; combining `p` with the `gamma3` row eliminates the `eta`
/// factor so the cosine stays well conditioned at `eta = 0`.
fn g_components(eta: f64, xi: f64, l: f64, gamma: &Vector3<f64>) -> (f64, f64) {
    let se = (1.0 - eta * eta).sqrt();
    let (sl, cl) = l.sin_cos();
    let p = gamma.x * sl + gamma.y * cl;
    let q = gamma.x * cl - gamma.y * sl;
    let sx_cos = eta * (p - xi * se) - se * (gamma.z - xi * eta);
    (q, sx_cos)
}

/// Residuals of the three `gamma` rows of the chart at the recovered `g`.
/// Zero (to rounding) for any `(M, gamma)` with `|gamma| = 1`.
pub fn g_recovery_residuals(m: &Vector3<f64>, gamma: &Vector3<f64>) -> Result<[f64; 3]> {
    let ad = cartesian_to_ad(m, gamma)?;
    let (_, rebuilt) = unit_momentum_frame(ad.eta(), ad.xi(), ad.l_angle, ad.g_angle);
    let d = rebuilt - gamma;
    Ok([d.x, d.y, d.z])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_of_angles() {
        let ad = AdState {
            l_mom: 0.0,
            h_mom: 0.0,
            g_mom: 1.0,
            l_angle: 0.0,
            g_angle: 0.0,
        };
        let (m, gamma) = ad_to_cartesian(&ad).unwrap();
        assert!((m - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        assert!((gamma - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-15);

        let back = cartesian_to_ad(&m, &gamma).unwrap();
        assert!(back.l_mom.abs() < 1e-15);
        assert!(back.h_mom.abs() < 1e-15);
        assert_eq!(back.g_mom, 1.0);
        assert!(angle_diff(back.l_angle, 0.0).abs() < 1e-15);
        assert!(angle_diff(back.g_angle, 0.0).abs() < 1e-15);
    }

    #[test]
    fn singular_planes_rejected() {
        let ad = AdState {
            l_mom: 1.0 - 1e-9,
            h_mom: 0.2,
            g_mom: 1.0,
            l_angle: 0.3,
            g_angle: 0.1,
        };
        assert!(matches!(
            ad_to_cartesian(&ad),
            Err(Error::SingularChart { .. })
        ));

        let m = Vector3::new(0.0, 0.0, 5.0);
        let gamma = Vector3::new(0.6, 0.0, 0.8);
        assert!(matches!(
            cartesian_to_ad(&m, &gamma),
            Err(Error::SingularChart { .. })
        ));
    }

    #[test]
    fn zero_momentum_rejected() {
        let err = cartesian_to_ad(&Vector3::zeros(), &Vector3::z()).unwrap_err();
        assert!(matches!(err, Error::ZeroMomentum { .. }));
    }

    #[test]
    fn angle_normalisation() {
        assert_eq!(normalize_angle(-1e-18), 0.0);
        assert!((normalize_angle(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!((normalize_angle(7.0) - (7.0 - TAU)).abs() < 1e-15);
        assert!((angle_diff(0.1, TAU - 0.1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn g_recovery_at_zero_eta() {
        let ad = AdState {
            l_mom: 0.0,
            h_mom: 0.3,
            g_mom: 2.0,
            l_angle: 1.0,
            g_angle: 2.5,
        };
        let (m, gamma) = ad_to_cartesian(&ad).unwrap();
        let back = cartesian_to_ad(&m, &gamma).unwrap();
        assert!(angle_diff(back.g_angle, 2.5).abs() < 1e-12);
    }
}
