use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poincare::{PoincareMap, SectionPoint};

/// Settings of the periodic point solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    /// Bound on `|F^p(x) - x|` at convergence.
    pub tol: f64,
    pub max_iter: usize,
    /// Condition number of `DF^p - I` above which a Levenberg-Marquardt step is taken.
    pub max_condition: f64,
    /// Largest accepted update norm.
    pub max_update: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            max_condition: 1e8,
            max_update: 0.05,
        }
    }
}

/// A periodic point with the eigenvalues of its period-`p` Jacobian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPointResult {
    pub point: SectionPoint,
    pub period: usize,
    /// Sorted by increasing modulus.
    pub multipliers: [Complex64; 3],
    /// `|F^p(x) - x|`.
    pub residual: f64,
    /// `DF^p` at `point`.
    pub jacobian: Matrix3<f64>,
    pub iterations: usize,
}

impl PeriodicPointResult {
    /// Number of multipliers of modulus greater than one.
    pub fn unstable_count(&self) -> usize {
        self.multipliers.iter().filter(|m| m.norm() > 1.0).count()
    }

    /// Whether some real multiplier lies below `-1`.
    pub fn has_flip(&self) -> bool {
        self.multipliers.iter().any(|m| is_real(m) && m.re < -1.0)
    }

    /// Whether a non-real multiplier lies outside the unit circle.
    pub fn has_unstable_focus(&self) -> bool {
        self.multipliers
            .iter()
            .any(|m| !is_real(m) && m.norm() > 1.0)
    }

    /// `(lambda1, lambda2, mult3)` of a saddle with two real stable multipliers and one
    /// real unstable one, where `|lambda2| < |lambda1| < 1 < |mult3|`.
    pub fn saddle_multipliers(&self) -> Option<(f64, f64, f64)> {
        let [a, b, c] = self.multipliers;
        if [a, b, c].iter().all(is_real) && b.norm() < 1.0 && c.norm() > 1.0 {
            Some((b.re, a.re, c.re))
        } else {
            None
        }
    }
}

pub(crate) fn is_real(z: &Complex64) -> bool {
    z.im.abs() <= 1e-9 * z.norm().max(1.0)
}

/// Eigenvalues of a real 3x3 matrix sorted by increasing modulus.
pub fn sorted_eigenvalues(m: &Matrix3<f64>) -> [Complex64; 3] {
    let ev = m.complex_eigenvalues();
    let mut out = [0, 1, 2].map(|k| Complex64::new(ev[k].re, ev[k].im));
    out.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.im.total_cmp(&b.im)));
    out
}

/// `F^p(x)` and the product `DF(x_{p-1}) ... DF(x_0)`.
pub fn orbit_jacobian(
    map: &PoincareMap,
    x: &SectionPoint,
    period: usize,
) -> Result<(SectionPoint, Matrix3<f64>)> {
    let mut jac = Matrix3::identity();
    let mut y = *x;
    for _ in 0..period {
        jac = map.jacobian(&y)? * jac;
        y = map.step(&y)?;
    }
    Ok((y, jac))
}

fn residual(map: &PoincareMap, x: &SectionPoint, period: usize) -> Result<Vector3<f64>> {
    Ok(map.iterate(x, period)?.delta(x))
}

/// Solves `F^p(x) = x` by damped Newton with finite-difference Jacobians.
///
/// When `DF^p - I` is ill-conditioned the step minimises `|F^p(x) - x|^2` in the
/// Levenberg-Marquardt sense instead.
pub fn find_periodic_point(
    map: &PoincareMap,
    guess: &SectionPoint,
    period: usize,
    newton: &NewtonConfig,
) -> Result<PeriodicPointResult> {
    assert!(period >= 1, "period must be at least 1");
    let mut x = *guess;
    let mut g = residual(map, &x, period)?;
    let mut r = g.norm();
    for it in 0..newton.max_iter {
        let (_, jac) = orbit_jacobian(map, &x, period)?;
        if r < newton.tol {
            return Ok(PeriodicPointResult {
                point: x,
                period,
                multipliers: sorted_eigenvalues(&jac),
                residual: r,
                jacobian: jac,
                iterations: it,
            });
        }
        let a = jac - Matrix3::identity();
        let dx = newton_update(&a, &g, newton.max_condition)?;
        let dx = dx * (newton.max_update / dx.norm()).min(1.0);

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial = x.offset(&(dx * step));
            if let Ok(gt) = residual(map, &trial, period) {
                if gt.norm() < r {
                    x = trial;
                    g = gt;
                    r = gt.norm();
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: it + 1,
                residual: r,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: newton.max_iter,
        residual: r,
    })
}

fn newton_update(a: &Matrix3<f64>, g: &Vector3<f64>, max_condition: f64) -> Result<Vector3<f64>> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax.is_finite() && smax > 0.0) {
        return Err(Error::SingularNewtonMatrix);
    }
    let dx = if smin * max_condition >= smax {
        svd.solve(&-g, 0.0)
            .map_err(|_| Error::SingularNewtonMatrix)?
    } else {
        let mu = smax * smax / max_condition;
        let normal = a.transpose() * a + Matrix3::identity() * mu;
        normal
            .cholesky()
            .ok_or(Error::SingularNewtonMatrix)?
            .solve(&(-a.transpose() * g))
    };
    if dx.iter().all(|v| v.is_finite()) && dx.norm() > 0.0 {
        Ok(dx)
    } else {
        Err(Error::SingularNewtonMatrix)
    }
}
