//! Three-dimensional return map of the flow to the section `g = g0` on a fixed energy
//! level, in the coordinates `x = (l, L/G, H/G)`.
//!
//! The Andoyer–Deprit chart of the section is read in a fixed body frame selected by
//! [`SectionChart`]. The default frame is spanned by the principal inertia axes with the
//! symmetry axis pointing from the centre of mass into the base; in that frame the
//! published section `g = 0` meets the physically admissible half `gamma3 > 0` of the
//! geometric frame.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::andoyer::{
    angle_diff, cartesian_to_ad_with, check_ratios, normalize_angle, unit_momentum_frame,
    DEFAULT_SING_EPS,
};
use crate::error::{Error, Result};
use crate::integrator::{
    locate_section_crossing, CrossingDirection, EventFn, IntegratorConfig, Stepper,
};
use crate::physics::{contact_inertia, potential, BodyState, StoneFlow, StoneParams};

/// Point of the section: `l` in `[0, 2 pi)`, `eta = L/G`, `xi = H/G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub l: f64,
    pub eta: f64,
    pub xi: f64,
}

impl SectionPoint {
    pub fn new(l: f64, eta: f64, xi: f64) -> Self {
        Self {
            l: normalize_angle(l),
            eta,
            xi,
        }
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.l, self.eta, self.xi)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    /// Componentwise difference with the angle reduced to `(-pi, pi]`.
    pub fn delta(&self, other: &SectionPoint) -> Vector3<f64> {
        Vector3::new(
            angle_diff(self.l, other.l),
            self.eta - other.eta,
            self.xi - other.xi,
        )
    }

    pub fn distance(&self, other: &SectionPoint) -> f64 {
        self.delta(other).norm()
    }

    /// Largest coordinate difference, angle-aware.
    pub fn max_abs_diff(&self, other: &SectionPoint) -> f64 {
        self.delta(other).amax()
    }

    /// `self + v` with the angle re-normalised.
    pub fn offset(&self, v: &Vector3<f64>) -> SectionPoint {
        SectionPoint::new(self.l + v.x, self.eta + v.y, self.xi + v.z)
    }

    pub fn in_domain(&self, sing_eps: f64) -> bool {
        check_ratios(self.eta, self.xi, sing_eps).is_ok()
    }
}

/// Body frame in which the section chart is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SectionChart {
    /// Principal inertia axes, third axis pointing into the base.
    #[default]
    Principal,
    /// The geometric frame of the paraboloid, third axis pointing up.
    Geometric,
}

impl SectionChart {
    /// Rotation taking geometric-frame components to chart-frame components.
    pub fn rotation(&self, params: &StoneParams) -> Matrix3<f64> {
        match self {
            SectionChart::Geometric => Matrix3::identity(),
            SectionChart::Principal => {
                let (s, c) = params.delta.sin_cos();
                Matrix3::new(c, s, 0.0, s, -c, 0.0, 0.0, 0.0, -1.0)
            }
        }
    }
}

/// Settings of one return map `F_{g0,E}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapConfig {
    pub energy: f64,
    pub g0: f64,
    pub crossing_direction: CrossingDirection,
    pub chart: SectionChart,
    pub integrator: IntegratorConfig,
    /// Relative finite-difference step for map Jacobians.
    pub fd_step: f64,
    /// Margin from the singular planes `|L/G| = 1`, `|H/G| = 1`.
    pub sing_eps: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            energy: 752.0,
            g0: 0.0,
            crossing_direction: CrossingDirection::Positive,
            chart: SectionChart::Principal,
            integrator: IntegratorConfig::default(),
            fd_step: 1e-6,
            sing_eps: DEFAULT_SING_EPS,
        }
    }
}

impl MapConfig {
    pub fn at_energy(energy: f64) -> Self {
        Self {
            energy,
            ..Self::default()
        }
    }

    pub fn with_energy(mut self, energy: f64) -> Self {
        self.energy = energy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if !self.energy.is_finite() {
            return Err(Error::InvalidParams("energy must be finite".into()));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 1e-2) {
            return Err(Error::InvalidParams(format!(
                "fd_step must lie in (0, 1e-2), got {}",
                self.fd_step
            )));
        }
        if !(self.sing_eps > 0.0 && self.sing_eps < 0.5) {
            return Err(Error::InvalidParams("sing_eps must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

/// Chart-frame Andoyer–Deprit reading of a body state: `(section point, g)`.
pub fn chart_coordinates(
    state: &BodyState,
    cfg: &MapConfig,
    params: &StoneParams,
) -> Result<(SectionPoint, f64)> {
    let rot = cfg.chart.rotation(params);
    let ad = cartesian_to_ad_with(&(rot * state.m), &(rot * state.gamma), cfg.sing_eps)?;
    Ok((SectionPoint::new(ad.l_angle, ad.eta(), ad.xi()), ad.g_angle))
}

/// The body state on the section `g = g0` with coordinates `x` and energy `cfg.energy`.
///
/// At fixed `(l, eta, xi, g0)` the vertical is fixed and `M = G m_hat`, so the energy is
/// `c G^2 + U` with `c > 0`, which has exactly one positive root `G`.
pub fn lift_section_point(
    x: &SectionPoint,
    cfg: &MapConfig,
    params: &StoneParams,
) -> Result<BodyState> {
    check_ratios(x.eta, x.xi, cfg.sing_eps)?;
    let rot_t = cfg.chart.rotation(params).transpose();
    let (m_hat, gamma) = unit_momentum_frame(x.eta, x.xi, x.l, cfg.g0);
    let (m_hat, gamma) = (rot_t * m_hat, rot_t * gamma);
    let u = potential(&gamma, params)?;
    if !(cfg.energy > u) {
        return Err(Error::EnergyBelowPotential {
            energy: cfg.energy,
            potential: u,
        });
    }
    let a = contact_inertia(&gamma, params)?;
    let omega_hat = a
        .cholesky()
        .expect("contact inertia is positive definite")
        .solve(&m_hat);
    let c = 0.5 * m_hat.dot(&omega_hat);
    let g = ((cfg.energy - u) / c).sqrt();
    Ok(BodyState::new(m_hat * g, gamma))
}

/// Result of one application of the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionReturn {
    pub point: SectionPoint,
    pub state: BodyState,
    /// Signed return time (negative for the inverse map).
    pub time: f64,
}

/// Applies the map (or its inverse) once, returning the full crossing data.
pub fn poincare_return(
    x: &SectionPoint,
    cfg: &MapConfig,
    params: &StoneParams,
    inverse: bool,
) -> Result<SectionReturn> {
    let state = lift_section_point(x, cfg, params)?;
    flow_to_section(&state, cfg, params, inverse)
}

/// Flows an arbitrary admissible state to its next (or previous) section crossing.
pub fn flow_to_section(
    state: &BodyState,
    cfg: &MapConfig,
    params: &StoneParams,
    inverse: bool,
) -> Result<SectionReturn> {
    let flow = StoneFlow::new(params);
    let rot = cfg.chart.rotation(params);
    let g0 = cfg.g0;
    let event = EventFn::angular(
        move |y: &SVector<f64, 6>| {
            let s = BodyState::from_slice(y.as_slice());
            // the lift only needs g; a zero margin keeps the event defined up to the planes
            cartesian_to_ad_with(&(rot * s.m), &(rot * s.gamma), 0.0)
                .map(|ad| ad.g_angle - g0)
                .unwrap_or(f64::NAN)
        },
        TAU,
    );
    let dir = if inverse { -1.0 } else { 1.0 };
    let mut stepper = Stepper::new(&flow, state.to_vector(), 0.0, dir, cfg.integrator)?;
    let crossing = locate_section_crossing(&mut stepper, &event, cfg.crossing_direction)?;
    let end = BodyState::from_slice(crossing.y.as_slice());
    let (point, _) = chart_coordinates(&end, cfg, params)?;
    Ok(SectionReturn {
        point,
        state: end,
        time: crossing.t,
    })
}

/// One application of the map `x -> F(x)` (or `F^{-1}(x)` when `inverse`).
pub fn poincare_step(
    x: &SectionPoint,
    cfg: &MapConfig,
    params: &StoneParams,
    inverse: bool,
) -> Result<SectionPoint> {
    poincare_return(x, cfg, params, inverse).map(|r| r.point)
}

/// Central-difference Jacobian of the map at `x`.
pub fn poincare_jacobian(
    x: &SectionPoint,
    cfg: &MapConfig,
    params: &StoneParams,
) -> Result<Matrix3<f64>> {
    jacobian_with_step(x, cfg, params, cfg.fd_step)
}

/// Jacobian with an explicit relative step, scaled by `max(1, |x_k|)` per coordinate.
pub fn jacobian_with_step(
    x: &SectionPoint,
    cfg: &MapConfig,
    params: &StoneParams,
    step: f64,
) -> Result<Matrix3<f64>> {
    let base = x.to_vector();
    let mut jac = Matrix3::zeros();
    for k in 0..3 {
        let hk = step * base[k].abs().max(1.0);
        let mut e = Vector3::zeros();
        e[k] = hk;
        let fp = poincare_step(&x.offset(&e), cfg, params, false)?;
        let fm = poincare_step(&x.offset(&-e), cfg, params, false)?;
        jac.set_column(k, &(fp.delta(&fm) / (2.0 * hk)));
    }
    Ok(jac)
}

/// The three linear symmetries of the map on the section `g = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    /// `l -> l + pi`; commutes with the map.
    S1,
    /// `l -> l + pi, eta -> -eta, xi -> -xi`; conjugates the map to its inverse.
    I1,
    /// `eta -> -eta, xi -> -xi`; conjugates the map to its inverse.
    I2,
}

impl Symmetry {
    pub const ALL: [Symmetry; 3] = [Symmetry::S1, Symmetry::I1, Symmetry::I2];

    /// Whether the transformation reverses the direction of the map.
    pub fn is_reversing(&self) -> bool {
        !matches!(self, Symmetry::S1)
    }
}

pub fn apply_symmetry(x: &SectionPoint, which: Symmetry) -> SectionPoint {
    match which {
        Symmetry::S1 => SectionPoint::new(x.l + PI, x.eta, x.xi),
        Symmetry::I1 => SectionPoint::new(x.l + PI, -x.eta, -x.xi),
        Symmetry::I2 => SectionPoint::new(x.l, -x.eta, -x.xi),
    }
}

/// A return map bound to its parameters; the unit the analysis routines work with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareMap {
    pub params: StoneParams,
    pub cfg: MapConfig,
}

impl PoincareMap {
    pub fn new(params: StoneParams, cfg: MapConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        Ok(Self { params, cfg })
    }

    pub fn at_energy(&self, energy: f64) -> Self {
        Self {
            params: self.params,
            cfg: self.cfg.with_energy(energy),
        }
    }

    pub fn energy(&self) -> f64 {
        self.cfg.energy
    }

    pub fn lift(&self, x: &SectionPoint) -> Result<BodyState> {
        lift_section_point(x, &self.cfg, &self.params)
    }

    /// One application with the return time and the full state at the crossing.
    pub fn step_return(&self, x: &SectionPoint) -> Result<SectionReturn> {
        poincare_return(x, &self.cfg, &self.params, false)
    }

    pub fn step(&self, x: &SectionPoint) -> Result<SectionPoint> {
        poincare_step(x, &self.cfg, &self.params, false)
    }

    pub fn step_inverse(&self, x: &SectionPoint) -> Result<SectionPoint> {
        poincare_step(x, &self.cfg, &self.params, true)
    }

    pub fn iterate(&self, x: &SectionPoint, n: usize) -> Result<SectionPoint> {
        let mut p = *x;
        for _ in 0..n {
            p = self.step(&p)?;
        }
        Ok(p)
    }

    pub fn jacobian(&self, x: &SectionPoint) -> Result<Matrix3<f64>> {
        poincare_jacobian(x, &self.cfg, &self.params)
    }

    /// How far the map is from respecting its symmetries at `x`:
    /// `|F(S1 x) - S1 F(x)|`, `|F^-1(I1 x) - I1 F(x)|` and `|F^-1(I2 x) - I2 F(x)|`.
    pub fn symmetry_defects(&self, x: &SectionPoint) -> Result<[f64; 3]> {
        let fx = self.step(x)?;
        let mut out = [0.0; 3];
        for (slot, which) in out.iter_mut().zip(Symmetry::ALL) {
            let image = apply_symmetry(x, which);
            let moved = if which.is_reversing() {
                self.step_inverse(&image)?
            } else {
                self.step(&image)?
            };
            *slot = moved.distance(&apply_symmetry(&fx, which));
        }
        Ok(out)
    }

    /// Image and Jacobian together.
    pub fn step_with_jacobian(&self, x: &SectionPoint) -> Result<(SectionPoint, Matrix3<f64>)> {
        let image = self.step(x)?;
        let jac = self.jacobian(x)?;
        Ok((image, jac))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::energy;

    #[test]
    fn symmetries_are_involutive() {
        let x = SectionPoint::new(1.234, 0.3, -0.45);
        for s in Symmetry::ALL {
            let y = apply_symmetry(&apply_symmetry(&x, s), s);
            assert!(y.distance(&x) < 1e-15, "{s:?}");
        }
    }

    #[test]
    fn i2_is_i1_after_s1() {
        let x = SectionPoint::new(5.9, -0.12, 0.77);
        let a = apply_symmetry(&x, Symmetry::I2);
        let b = apply_symmetry(&apply_symmetry(&x, Symmetry::S1), Symmetry::I1);
        assert!(a.distance(&b) < 1e-15);
    }

    #[test]
    fn i1_direct_substitution() {
        let y = apply_symmetry(&SectionPoint::new(0.0, 0.5, -0.2), Symmetry::I1);
        assert!((y.l - PI).abs() < 1e-15);
        assert_eq!((y.eta, y.xi), (-0.5, 0.2));
    }

    #[test]
    fn principal_chart_is_a_rotation() {
        let p = StoneParams::default();
        let r = SectionChart::Principal.rotation(&p);
        assert!((r * r.transpose() - Matrix3::identity()).norm() < 1e-15);
        assert!((r.determinant() - 1.0).abs() < 1e-15);
        // diagonalises the inertia tensor
        let d = r * p.inertia_tensor() * r.transpose();
        assert!((d - Matrix3::from_diagonal(&Vector3::new(2.0, 6.0, 7.0))).norm() < 1e-13);
    }

    #[test]
    fn lift_hits_energy_and_section() {
        let p = StoneParams::default();
        let cfg = MapConfig::default();
        let x = SectionPoint::new(3.650, 0.669, -0.384);
        let s = lift_section_point(&x, &cfg, &p).unwrap();
        assert!(s.gamma.z > 0.0);
        assert!((energy(&s, &p).unwrap() - 752.0).abs() < 1e-9);
        let (back, g) = chart_coordinates(&s, &cfg, &p).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-10);
        assert!(angle_diff(g, 0.0).abs() < 1e-10);
    }

    #[test]
    fn lift_rejects_low_energy() {
        let p = StoneParams::default();
        let cfg = MapConfig::at_energy(50.0);
        let err =
            lift_section_point(&SectionPoint::new(3.65, 0.669, -0.384), &cfg, &p).unwrap_err();
        assert!(matches!(err, Error::EnergyBelowPotential { .. }));
    }

    #[test]
    fn lift_rejects_singular_chart() {
        let p = StoneParams::default();
        let cfg = MapConfig::default();
        let err =
            lift_section_point(&SectionPoint::new(1.0, 1.0 - 1e-9, 0.1), &cfg, &p).unwrap_err();
        assert!(matches!(err, Error::SingularChart { .. }));
    }
}
