use std::fmt;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::orbit::EscapeGuard;
use crate::error::Result;
use crate::poincare::{PoincareMap, SectionPoint};

/// Default width of the band around zero treated as a vanishing exponent.
pub const DEFAULT_ZERO_TOL: f64 = 0.002;

/// Lyapunov exponents of the map, natural log per iteration, sorted descending.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub n_iter: usize,
    pub transient: usize,
    /// Orbit average of `ln|det DF|`.
    pub mean_log_det: f64,
    /// Range of the running estimate of the middle exponent over the second half of the run.
    pub lambda2_band: (f64, f64),
    /// Mean flow time between consecutive section crossings along the measured orbit.
    pub mean_return_time: f64,
}

impl LyapunovSpectrum {
    pub fn as_array(&self) -> [f64; 3] {
        [self.lambda1, self.lambda2, self.lambda3]
    }

    pub fn sum(&self) -> f64 {
        self.lambda1 + self.lambda2 + self.lambda3
    }

    /// Exponents per unit of flow time: the per-iteration values over the mean return time.
    pub fn per_unit_time(&self) -> [f64; 3] {
        self.as_array().map(|l| l / self.mean_return_time)
    }
}

/// Benettin spectrum: an orthonormal frame is pushed through the Jacobian at every
/// iterate and re-orthonormalised by QR; the exponents are the mean logs of `|R_kk|`.
pub fn lyapunov_spectrum(
    map: &PoincareMap,
    x0: &SectionPoint,
    n_transient: usize,
    n_iter: usize,
    escape_radius: f64,
) -> Result<LyapunovSpectrum> {
    assert!(n_iter > 0, "n_iter must be positive");
    let guard = EscapeGuard::new(*x0, escape_radius);
    let mut x = *x0;
    for i in 0..n_transient {
        x = map.step(&x)?;
        guard.check(&x, i + 1)?;
    }

    let mut frame = Matrix3::identity();
    let mut sums = [0.0; 3];
    let mut log_det = 0.0;
    let mut band = (f64::INFINITY, f64::NEG_INFINITY);
    let mut time = 0.0;
    for i in 0..n_iter {
        let jac = map.jacobian(&x)?;
        log_det += jac.determinant().abs().ln();
        let qr = (jac * frame).qr();
        let r = qr.r();
        for (k, s) in sums.iter_mut().enumerate() {
            *s += r[(k, k)].abs().ln();
        }
        frame = qr.q();
        let ret = map.step_return(&x)?;
        x = ret.point;
        time += ret.time;
        guard.check(&x, n_transient + i + 1)?;
        if 2 * (i + 1) >= n_iter {
            let running = sums[1] / (i + 1) as f64;
            band = (band.0.min(running), band.1.max(running));
        }
    }

    let n = n_iter as f64;
    let mut lambda = sums.map(|s| s / n);
    lambda.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovSpectrum {
        lambda1: lambda[0],
        lambda2: lambda[1],
        lambda3: lambda[2],
        n_iter,
        transient: n_transient,
        mean_log_det: log_det / n,
        lambda2_band: band,
        mean_return_time: time / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    PeriodicSink,
    InvariantCurve,
    Chaotic,
    /// Leading exponents both inside the zero band.
    Indeterminate,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::PeriodicSink => "PeriodicSink",
            Regime::InvariantCurve => "InvariantCurve",
            Regime::Chaotic => "Chaotic",
            Regime::Indeterminate => "Indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub regime: Regime,
    /// `L1 > 0`, `L1 + L2 > 0` and `L1 + L2 + L3 < 0`.
    pub pseudo_hyperbolic: bool,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.regime.as_str())?;
        if self.pseudo_hyperbolic {
            f.write_str("+PseudoHyperbolicCandidate")?;
        }
        Ok(())
    }
}

pub fn classify_regime(spectrum: &LyapunovSpectrum, zero_tol: f64) -> Classification {
    let [l1, l2, l3] = spectrum.as_array();
    let regime = if l1 > zero_tol {
        Regime::Chaotic
    } else if l1 < -zero_tol {
        Regime::PeriodicSink
    } else if l2 < -zero_tol {
        Regime::InvariantCurve
    } else {
        Regime::Indeterminate
    };
    Classification {
        regime,
        pseudo_hyperbolic: l1 > 0.0 && l1 + l2 > 0.0 && l1 + l2 + l3 < 0.0,
    }
}
