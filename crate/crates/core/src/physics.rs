//! Equations of motion of a rigid body with an elliptic-paraboloid base rolling
//! without slipping on a horizontal plane.
//!
//! The phase point is `(M, gamma)`: angular momentum about the contact point and
//! the unit upward vertical, both in body coordinates. The no-slip condition
//! `v + omega x r = 0` has been eliminated from the momentum balance, so the flow is
//!
//! ```text
//! dM/dt     = M x omega + m (dr/dt) x (omega x r) + m g (r x gamma)
//! dgamma/dt = gamma x omega
//! M         = I omega + m r x (omega x r)
//! ```
//!
//! with `r(gamma)` the vector from the centre of mass to the contact point.

use nalgebra::{Matrix3, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::OdeSystem;

/// Smallest admissible `gamma3`; below it the contact point runs off to infinity.
pub const DEFAULT_GAMMA_EPS: f64 = 1e-8;

/// Physical and geometric constants of the stone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoneParams {
    /// Principal moments of inertia.
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub mass: f64,
    pub grav_accel: f64,
    /// Principal curvature radii of the paraboloid at its vertex.
    pub a1: f64,
    pub a2: f64,
    /// Height of the centre of mass above the vertex.
    pub h: f64,
    /// Angle between the horizontal inertia axes and the geometric axes.
    pub delta: f64,
    /// Admissibility threshold on `gamma3`.
    pub gamma_eps: f64,
}

impl Default for StoneParams {
    fn default() -> Self {
        Self {
            i1: 2.0,
            i2: 6.0,
            i3: 7.0,
            mass: 1.0,
            grav_accel: 100.0,
            a1: 9.0,
            a2: 4.0,
            h: 1.0,
            delta: 0.485,
            gamma_eps: DEFAULT_GAMMA_EPS,
        }
    }
}

impl StoneParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("i1", self.i1),
            ("i2", self.i2),
            ("i3", self.i3),
            ("mass", self.mass),
            ("grav_accel", self.grav_accel),
            ("a1", self.a1),
            ("a2", self.a2),
            ("h", self.h),
            ("gamma_eps", self.gamma_eps),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        // A quarter turn is accepted as well: it only swaps the horizontal axes.
        if !(self.delta >= 0.0 && self.delta <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParams(format!(
                "delta must lie in [0, pi/2], got {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// Inertia tensor in the geometric frame: the horizontal principal axes are
    /// rotated by `delta` about the vertical one.
    pub fn inertia_tensor(&self) -> Matrix3<f64> {
        let (s, c) = self.delta.sin_cos();
        let off = (self.i1 - self.i2) * c * s;
        Matrix3::new(
            self.i1 * c * c + self.i2 * s * s,
            off,
            0.0,
            off,
            self.i1 * s * s + self.i2 * c * c,
            0.0,
            0.0,
            0.0,
            self.i3,
        )
    }

    fn check_gamma(&self, gamma: &Vector3<f64>) -> Result<()> {
        if gamma.z > self.gamma_eps {
            Ok(())
        } else {
            Err(Error::DegenerateContact { gamma3: gamma.z })
        }
    }
}

/// Phase point of the six-dimensional flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    /// Angular momentum about the contact point.
    pub m: Vector3<f64>,
    /// Unit upward vertical in body coordinates.
    pub gamma: Vector3<f64>,
}

impl BodyState {
    pub fn new(m: Vector3<f64>, gamma: Vector3<f64>) -> Self {
        Self { m, gamma }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.m.x,
            self.m.y,
            self.m.z,
            self.gamma.x,
            self.gamma.y,
            self.gamma.z,
        ]
    }

    pub fn to_vector(&self) -> SVector<f64, 6> {
        SVector::<f64, 6>::from(self.to_array())
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self {
            m: Vector3::new(y[0], y[1], y[2]),
            gamma: Vector3::new(y[3], y[4], y[5]),
        }
    }
}

/// Values of the two first integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integrals {
    pub energy: f64,
    pub gamma_norm_sq: f64,
}

/// Contact point relative to the centre of mass for the paraboloid
/// `(r1^2/a1 + r2^2/a2)/2 - (r3 + h) = 0` whose outward normal is `-gamma`.
pub fn contact_vector(gamma: &Vector3<f64>, params: &StoneParams) -> Result<Vector3<f64>> {
    params.check_gamma(gamma)?;
    Ok(contact_unchecked(gamma, params))
}

fn contact_unchecked(gamma: &Vector3<f64>, p: &StoneParams) -> Vector3<f64> {
    let (g1, g2, g3) = (gamma.x, gamma.y, gamma.z);
    Vector3::new(
        -p.a1 * g1 / g3,
        -p.a2 * g2 / g3,
        -p.h + (p.a1 * g1 * g1 + p.a2 * g2 * g2) / (2.0 * g3 * g3),
    )
}

/// Analytic derivative `dr/dgamma` of [`contact_vector`].
pub fn contact_jacobian(gamma: &Vector3<f64>, params: &StoneParams) -> Result<Matrix3<f64>> {
    params.check_gamma(gamma)?;
    Ok(contact_jacobian_unchecked(gamma, params))
}

fn contact_jacobian_unchecked(gamma: &Vector3<f64>, p: &StoneParams) -> Matrix3<f64> {
    let (g1, g2, g3) = (gamma.x, gamma.y, gamma.z);
    let g3s = g3 * g3;
    Matrix3::new(
        -p.a1 / g3,
        0.0,
        p.a1 * g1 / g3s,
        0.0,
        -p.a2 / g3,
        p.a2 * g2 / g3s,
        p.a1 * g1 / g3s,
        p.a2 * g2 / g3s,
        -(p.a1 * g1 * g1 + p.a2 * g2 * g2) / (g3s * g3),
    )
}

/// Paraboloid defining function; zero on the body surface.
pub fn surface_residual(r: &Vector3<f64>, params: &StoneParams) -> f64 {
    0.5 * (r.x * r.x / params.a1 + r.y * r.y / params.a2) - (r.z + params.h)
}

/// Inertia operator about the contact point, `A = I + m(|r|^2 Id - r r^T)`.
pub fn contact_inertia(gamma: &Vector3<f64>, params: &StoneParams) -> Result<Matrix3<f64>> {
    let r = contact_vector(gamma, params)?;
    Ok(contact_inertia_at(
        &r,
        &params.inertia_tensor(),
        params.mass,
    ))
}

fn contact_inertia_at(r: &Vector3<f64>, inertia: &Matrix3<f64>, mass: f64) -> Matrix3<f64> {
    inertia + (Matrix3::identity() * r.norm_squared() - r * r.transpose()) * mass
}

fn solve_spd(a: Matrix3<f64>, rhs: &Vector3<f64>) -> Vector3<f64> {
    // A is I plus a positive semidefinite term, so Cholesky cannot fail for valid params.
    a.cholesky()
        .expect("contact inertia is positive definite")
        .solve(rhs)
}

/// Recovers the angular velocity from the momentum about the contact point.
pub fn omega_from_momentum(
    m: &Vector3<f64>,
    gamma: &Vector3<f64>,
    params: &StoneParams,
) -> Result<Vector3<f64>> {
    let a = contact_inertia(gamma, params)?;
    Ok(solve_spd(a, m))
}

/// Momentum about the contact point, `M = I omega + m r x (omega x r)`.
pub fn momentum_from_omega(
    omega: &Vector3<f64>,
    gamma: &Vector3<f64>,
    params: &StoneParams,
) -> Result<Vector3<f64>> {
    let r = contact_vector(gamma, params)?;
    Ok(params.inertia_tensor() * omega + r.cross(&omega.cross(&r)) * params.mass)
}

/// Gravitational potential `-m g (r, gamma)` of an admissible orientation.
pub fn potential(gamma: &Vector3<f64>, params: &StoneParams) -> Result<f64> {
    let r = contact_vector(gamma, params)?;
    Ok(-params.mass * params.grav_accel * r.dot(gamma))
}

/// Right-hand side `(dM/dt, dgamma/dt)` of the flow.
pub fn flow_rhs(state: &BodyState, params: &StoneParams) -> Result<(Vector3<f64>, Vector3<f64>)> {
    StoneFlow::new(params).eval(state)
}

/// The flow as an integrable system, with the inertia tensor precomputed.
#[derive(Debug, Clone, Copy)]
pub struct StoneFlow {
    params: StoneParams,
    inertia: Matrix3<f64>,
}

impl StoneFlow {
    pub fn new(params: &StoneParams) -> Self {
        Self {
            params: *params,
            inertia: params.inertia_tensor(),
        }
    }

    pub fn params(&self) -> &StoneParams {
        &self.params
    }

    pub fn eval(&self, state: &BodyState) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let p = &self.params;
        let gamma = &state.gamma;
        p.check_gamma(gamma)?;
        let r = contact_unchecked(gamma, p);
        let omega = solve_spd(contact_inertia_at(&r, &self.inertia, p.mass), &state.m);
        let gamma_dot = gamma.cross(&omega);
        let r_dot = contact_jacobian_unchecked(gamma, p) * gamma_dot;
        let m_dot = state.m.cross(&omega)
            + r_dot.cross(&omega.cross(&r)) * p.mass
            + r.cross(gamma) * (p.mass * p.grav_accel);
        Ok((m_dot, gamma_dot))
    }
}

impl OdeSystem<6> for StoneFlow {
    fn rhs(&self, y: &SVector<f64, 6>) -> Result<SVector<f64, 6>> {
        let (md, gd) = self.eval(&BodyState::from_slice(y.as_slice()))?;
        Ok(SVector::<f64, 6>::new(md.x, md.y, md.z, gd.x, gd.y, gd.z))
    }
}

/// Energy and geometric integrals.
pub fn integrals(state: &BodyState, params: &StoneParams) -> Result<Integrals> {
    let r = contact_vector(&state.gamma, params)?;
    let a = contact_inertia_at(&r, &params.inertia_tensor(), params.mass);
    let omega = solve_spd(a, &state.m);
    Ok(Integrals {
        energy: 0.5 * state.m.dot(&omega) - params.mass * params.grav_accel * r.dot(&state.gamma),
        gamma_norm_sq: state.gamma.norm_squared(),
    })
}

/// Energy only; shorthand for `integrals(..)?.energy`.
pub fn energy(state: &BodyState, params: &StoneParams) -> Result<f64> {
    integrals(state, params).map(|i| i.energy)
}
