use crate::error::{Error, Result};
use crate::poincare::{PoincareMap, SectionPoint};

/// Default radius of the neighbourhood an orbit must stay in.
pub const DEFAULT_ESCAPE_RADIUS: f64 = 1.0;

/// Flags orbits that leave a ball around a reference point of the section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeGuard {
    pub center: SectionPoint,
    pub radius: f64,
}

impl EscapeGuard {
    pub fn new(center: SectionPoint, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn check(&self, x: &SectionPoint, iteration: usize) -> Result<()> {
        if x.distance(&self.center) <= self.radius {
            Ok(())
        } else {
            Err(Error::OrbitEscaped { iteration })
        }
    }
}

/// Iterates `x0`, drops `n_transient` iterates and returns the next `n_keep`.
///
/// Fails with `OrbitEscaped` once an iterate is farther than `escape_radius` from `x0`.
pub fn iterate_attractor(
    map: &PoincareMap,
    x0: &SectionPoint,
    n_transient: usize,
    n_keep: usize,
    escape_radius: f64,
) -> Result<Vec<SectionPoint>> {
    let guard = EscapeGuard::new(*x0, escape_radius);
    let mut x = *x0;
    let mut cloud = Vec::with_capacity(n_keep);
    for i in 0..n_transient + n_keep {
        x = map.step(&x)?;
        guard.check(&x, i + 1)?;
        if i >= n_transient {
            cloud.push(x);
        }
    }
    Ok(cloud)
}

/// Follows an attractor through a sequence of energies: at each energy the current point
/// is iterated `n_settle` times and the last iterate seeds the next energy.
pub fn continue_attractor(
    base: &PoincareMap,
    x0: &SectionPoint,
    energies: &[f64],
    n_settle: usize,
    escape_radius: f64,
) -> Result<SectionPoint> {
    let mut x = *x0;
    for &e in energies {
        let cloud = iterate_attractor(
            &base.at_energy(e),
            &x,
            n_settle.saturating_sub(1),
            1,
            escape_radius,
        )?;
        x = cloud[0];
    }
    Ok(x)
}

/// Energies from `from` to `to` (inclusive) in steps no larger than `max_step`.
pub fn energy_path(from: f64, to: f64, max_step: f64) -> Vec<f64> {
    let n = ((to - from).abs() / max_step).ceil().max(1.0) as usize;
    (1..=n)
        .map(|i| {
            if i == n {
                to
            } else {
                from + (to - from) * i as f64 / n as f64
            }
        })
        .collect()
}

/// Smallest `p <= max_period` with `|x_{i+p} - x_i| < tol` along the whole cloud.
pub fn detect_period(cloud: &[SectionPoint], max_period: usize, tol: f64) -> Option<usize> {
    (1..=max_period.min(cloud.len().saturating_sub(1))).find(|&p| {
        cloud
            .iter()
            .zip(&cloud[p..])
            .all(|(a, b)| a.distance(b) < tol)
    })
}

/// Diagonal of the bounding box of the cloud (an upper bound on its diameter).
pub fn cloud_diameter(cloud: &[SectionPoint]) -> f64 {
    let Some(first) = cloud.first() else {
        return 0.0;
    };
    let mut lo = nalgebra::Vector3::zeros();
    let mut hi = nalgebra::Vector3::zeros();
    for x in cloud {
        let d = x.delta(first);
        lo = lo.inf(&d);
        hi = hi.sup(&d);
    }
    (hi - lo).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_of_synthetic_cycle() {
        let a = SectionPoint::new(1.0, 0.1, 0.2);
        let b = SectionPoint::new(1.1, 0.1, 0.2);
        let cloud: Vec<_> = (0..20).map(|i| if i % 2 == 0 { a } else { b }).collect();
        assert_eq!(detect_period(&cloud, 8, 1e-9), Some(2));
        assert!((cloud_diameter(&cloud) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn energy_path_ends_on_target() {
        let p = energy_path(752.0, 755.5, 1.0);
        assert_eq!(p.len(), 4);
        assert_eq!(*p.last().unwrap(), 755.5);
        let down = energy_path(752.0, 747.0, 2.0);
        assert_eq!(down.len(), 3);
        assert_eq!(*down.last().unwrap(), 747.0);
    }

    #[test]
    fn diameter_across_the_seam() {
        let cloud = [
            SectionPoint::new(-1e-3, 0.0, 0.0),
            SectionPoint::new(1e-3, 0.0, 0.0),
        ];
        assert!((cloud_diameter(&cloud) - 2e-3).abs() < 1e-12);
    }
}
