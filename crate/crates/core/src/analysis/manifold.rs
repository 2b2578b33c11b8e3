use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::orbit::EscapeGuard;
use super::periodic::{find_periodic_point, is_real, NewtonConfig, PeriodicPointResult};
use crate::error::{Error, Result};
use crate::poincare::{PoincareMap, SectionPoint};

/// Side of the unstable eigendirection a branch leaves along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        }
    }
}

impl FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "+" | "plus" => Ok(Branch::Plus),
            "-" | "minus" => Ok(Branch::Minus),
            other => Err(format!("unknown branch '{other}', expected + or -")),
        }
    }
}

/// Unstable multiplier and unit eigenvector of a saddle. The vector is oriented so
/// that its largest component is positive; `Branch::Plus` leaves along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnstableDirection {
    pub multiplier: f64,
    pub vector: Vector3<f64>,
}

pub fn unstable_direction(fp: &PeriodicPointResult) -> Result<UnstableDirection> {
    let unstable: Vec<_> = fp.multipliers.iter().filter(|m| m.norm() > 1.0).collect();
    if unstable.len() != 1 || !is_real(unstable[0]) {
        return Err(Error::NotASaddle);
    }
    let mu = unstable[0].re;
    let svd = (fp.jacobian - Matrix3::identity() * mu).svd(false, true);
    let v_t = svd.v_t.ok_or(Error::NotASaddle)?;
    let k = svd.singular_values.imin();
    let mut v: Vector3<f64> = v_t.row(k).transpose();
    v /= v.norm();
    if v[v.iamax()] < 0.0 {
        v = -v;
    }
    Ok(UnstableDirection {
        multiplier: mu,
        vector: v,
    })
}

/// Ordered points of one branch of the unstable manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPolyline {
    pub branch: Branch,
    pub points: Vec<SectionPoint>,
}

/// Settings of a branch trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldConfig {
    /// Distance of the fundamental segment from the saddle.
    pub eps0: f64,
    /// Largest gap between consecutive points.
    pub spacing_max: f64,
    pub n_points: usize,
    pub escape_radius: f64,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self {
            eps0: 1e-6,
            spacing_max: 0.005,
            n_points: 4000,
            escape_radius: super::orbit::DEFAULT_ESCAPE_RADIUS,
        }
    }
}

const MAX_BISECTIONS: usize = 24;
const SEED_POINTS: usize = 8;

/// Grows a branch one fundamental segment at a time.
///
/// Segment `n + 1` is the image of segment `n` under `F^k`, with `k` the period, doubled
/// when the unstable multiplier is negative so that the branch keeps its side. Gaps wider
/// than `spacing_max` are filled by mapping midpoints of the previous segment.
pub struct ManifoldTracer<'a> {
    map: &'a PoincareMap,
    k: usize,
    spacing_max: f64,
    guard: EscapeGuard,
    segment: Vec<SectionPoint>,
    level: usize,
}

impl<'a> ManifoldTracer<'a> {
    pub fn new(
        map: &'a PoincareMap,
        fp: &PeriodicPointResult,
        branch: Branch,
        cfg: &ManifoldConfig,
    ) -> Result<Self> {
        let dir = unstable_direction(fp)?;
        let (k, growth) = if dir.multiplier < 0.0 {
            (2 * fp.period, dir.multiplier * dir.multiplier)
        } else {
            (fp.period, dir.multiplier)
        };
        let v = dir.vector * branch.sign();
        let segment = (0..=SEED_POINTS)
            .map(|i| {
                let s = i as f64 / SEED_POINTS as f64;
                fp.point.offset(&(v * (cfg.eps0 * growth.powf(s))))
            })
            .collect();
        Ok(Self {
            map,
            k,
            spacing_max: cfg.spacing_max,
            guard: EscapeGuard::new(fp.point, cfg.escape_radius),
            segment,
            level: 0,
        })
    }

    /// The current fundamental segment.
    pub fn segment(&self) -> &[SectionPoint] {
        &self.segment
    }

    fn image(&self, x: &SectionPoint) -> Result<SectionPoint> {
        let y = self.map.iterate(x, self.k)?;
        self.guard.check(&y, self.level + 1)?;
        Ok(y)
    }

    /// Replaces the current segment by its refined image and returns it.
    pub fn advance(&mut self) -> Result<&[SectionPoint]> {
        let mut next = Vec::with_capacity(self.segment.len() * 2);
        let mut prev_src = self.segment[0];
        let mut prev_img = self.image(&prev_src)?;
        next.push(prev_img);
        for src in self.segment[1..].iter().copied() {
            let img = self.image(&src)?;
            self.fill_gap(prev_src, prev_img, src, img, 0, &mut next)?;
            next.push(img);
            prev_src = src;
            prev_img = img;
        }
        self.segment = next;
        self.level += 1;
        Ok(&self.segment)
    }

    fn fill_gap(
        &self,
        a_src: SectionPoint,
        a_img: SectionPoint,
        b_src: SectionPoint,
        b_img: SectionPoint,
        depth: usize,
        out: &mut Vec<SectionPoint>,
    ) -> Result<()> {
        if depth >= MAX_BISECTIONS || a_img.distance(&b_img) <= self.spacing_max {
            return Ok(());
        }
        let m_src = a_src.offset(&(b_src.delta(&a_src) * 0.5));
        let m_img = self.image(&m_src)?;
        self.fill_gap(a_src, a_img, m_src, m_img, depth + 1, out)?;
        out.push(m_img);
        self.fill_gap(m_src, m_img, b_src, b_img, depth + 1, out)
    }
}

/// Traces one branch of the unstable manifold of a saddle up to `cfg.n_points` points.
pub fn trace_unstable_manifold(
    map: &PoincareMap,
    fp: &PeriodicPointResult,
    branch: Branch,
    cfg: &ManifoldConfig,
) -> Result<ManifoldPolyline> {
    let mut tracer = ManifoldTracer::new(map, fp, branch, cfg)?;
    let mut points = tracer.segment().to_vec();
    while points.len() < cfg.n_points {
        let seg = tracer.advance()?;
        // the first image repeats the last point of the previous segment
        points.extend_from_slice(&seg[1..]);
    }
    points.truncate(cfg.n_points);
    Ok(ManifoldPolyline { branch, points })
}

/// Default radius of the return ball around the saddle.
pub const DEFAULT_RHO: f64 = 0.02;

/// Where a branch comes back to its saddle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixReturn {
    /// Unstable eigen-coordinate of the closest return point: the side of the local
    /// stable manifold the branch comes back on.
    pub side: f64,
    /// Distance of the closest return point from the saddle.
    pub closest_distance: f64,
    pub point: SectionPoint,
}

/// Follows a branch until it re-enters the ball of radius `rho` around the saddle after
/// having left it, and reports its closest approach during that visit.
pub fn separatrix_return(
    map: &PoincareMap,
    fp: &PeriodicPointResult,
    branch: Branch,
    cfg: &ManifoldConfig,
    rho: f64,
) -> Result<SeparatrixReturn> {
    let dir = unstable_direction(fp)?;
    let dual = unstable_dual(fp, &dir)?;
    let mut tracer = ManifoldTracer::new(map, fp, branch, cfg)?;
    let mut left = false;
    let mut best: Option<SeparatrixReturn> = None;
    let mut seen = tracer.segment().len();
    while seen < cfg.n_points {
        let seg = tracer.advance()?;
        for p in &seg[1..] {
            let d = p.delta(&fp.point);
            let r = d.norm();
            if r > rho {
                if let Some(b) = best {
                    return Ok(b);
                }
                left = true;
            } else if left && best.is_none_or(|b| r < b.closest_distance) {
                best = Some(SeparatrixReturn {
                    side: d.dot(&dual),
                    closest_distance: r,
                    point: *p,
                });
            }
        }
        seen += seg.len() - 1;
    }
    best.ok_or(Error::NoReturn)
}

/// Signed unstable coordinate of a branch's return to its saddle; a sign change under
/// variation of the energy brackets a homoclinic connection.
pub fn separatrix_return_sign(
    map: &PoincareMap,
    fp: &PeriodicPointResult,
    branch: Branch,
    cfg: &ManifoldConfig,
    rho: f64,
) -> Result<f64> {
    separatrix_return(map, fp, branch, cfg, rho).map(|r| r.side)
}

/// Left eigenvector `w` of the unstable multiplier scaled so that `w . v = 1`.
fn unstable_dual(fp: &PeriodicPointResult, dir: &UnstableDirection) -> Result<Vector3<f64>> {
    let svd = (fp.jacobian.transpose() - Matrix3::identity() * dir.multiplier).svd(false, true);
    let v_t = svd.v_t.ok_or(Error::NotASaddle)?;
    let w: Vector3<f64> = v_t.row(svd.singular_values.imin()).transpose();
    let scale = w.dot(&dir.vector);
    if scale.abs() < 1e-12 {
        return Err(Error::NotASaddle);
    }
    Ok(w / scale)
}

/// Energy bracket of a sign change of the separatrix return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicBracket {
    pub energy: f64,
    pub bracket: (f64, f64),
    /// Returns at the two ends of the final bracket.
    pub lower: SeparatrixReturn,
    pub upper: SeparatrixReturn,
}

/// Bisects a sign change of [`separatrix_return`] between `e_lo` and `e_hi`, continuing the
/// fixed point from `guess`. Fails with `NoReturn` when the ends have the same sign.
#[allow(clippy::too_many_arguments)]
pub fn bisect_separatrix_sign(
    base: &PoincareMap,
    guess: &SectionPoint,
    e_lo: f64,
    e_hi: f64,
    branch: Branch,
    cfg: &ManifoldConfig,
    rho: f64,
    newton: &NewtonConfig,
    tol: f64,
) -> Result<HomoclinicBracket> {
    let eval = |e: f64, seed: &SectionPoint| -> Result<(SectionPoint, SeparatrixReturn)> {
        let map = base.at_energy(e);
        let fp = find_periodic_point(&map, seed, 1, newton)?;
        let ret = separatrix_return(&map, &fp, branch, cfg, rho)?;
        Ok((fp.point, ret))
    };
    let (mut lo, mut hi) = (e_lo, e_hi);
    let (mut seed, mut r_lo) = eval(lo, guess)?;
    let (_, mut r_hi) = eval(hi, &seed)?;
    if r_lo.side.signum() == r_hi.side.signum() {
        return Err(Error::NoReturn);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (p, r) = eval(mid, &seed)?;
        if r.side.signum() == r_lo.side.signum() {
            lo = mid;
            r_lo = r;
            seed = p;
        } else {
            hi = mid;
            r_hi = r;
        }
    }
    Ok(HomoclinicBracket {
        energy: 0.5 * (lo + hi),
        bracket: (lo, hi),
        lower: r_lo,
        upper: r_hi,
    })
}

/// Largest distance from a point of `a` to the polyline `b`.
pub fn directed_hausdorff(a: &[SectionPoint], b: &[SectionPoint]) -> f64 {
    a.iter()
        .map(|p| distance_to_polyline(p, b))
        .fold(0.0, f64::max)
}

pub fn distance_to_polyline(p: &SectionPoint, line: &[SectionPoint]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [only] => p.distance(only),
        _ => line
            .windows(2)
            .map(|w| {
                let seg = w[1].delta(&w[0]);
                let rel = p.delta(&w[0]);
                let len2 = seg.norm_squared();
                let t = if len2 > 0.0 {
                    (rel.dot(&seg) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (rel - seg * t).norm()
            })
            .fold(f64::INFINITY, f64::min),
    }
}
