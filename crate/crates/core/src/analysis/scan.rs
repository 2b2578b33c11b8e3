use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lyapunov::{classify_regime, lyapunov_spectrum, Classification, LyapunovSpectrum};
use super::orbit::{detect_period, iterate_attractor, DEFAULT_ESCAPE_RADIUS};
use super::periodic::{find_periodic_point, NewtonConfig, PeriodicPointResult};
use crate::error::{Error, Result};
use crate::poincare::{PoincareMap, SectionPoint};

/// Settings of an energy scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub e_min: f64,
    pub e_max: f64,
    pub e_step: f64,
    /// Initial guess for the fixed point at `e_min`.
    pub seed: SectionPoint,
    pub newton: NewtonConfig,
    /// Compute a Lyapunov spectrum at every grid energy.
    pub spectra: bool,
    pub n_transient: usize,
    pub n_iter: usize,
    pub zero_tol: f64,
    pub escape_radius: f64,
    /// Offset from the fixed point of the first orbit seed.
    pub seed_offset: f64,
    /// Iterations at each energy before the orbit point is handed to the next energy.
    pub settle: usize,
    /// Follow the period-2 cycle born at a period doubling.
    pub track_cycle: bool,
    /// Width of the energy bracket at which bisection stops.
    pub bisect_tol: f64,
    /// Worker threads for the spectra; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            e_min: 752.0,
            e_max: 752.01,
            e_step: 1e-3,
            seed: SectionPoint::new(3.65, 0.67, -0.38),
            newton: NewtonConfig::default(),
            spectra: true,
            n_transient: 1000,
            n_iter: 10_000,
            zero_tol: super::lyapunov::DEFAULT_ZERO_TOL,
            escape_radius: DEFAULT_ESCAPE_RADIUS,
            seed_offset: 1e-4,
            settle: 300,
            track_cycle: false,
            bisect_tol: 1e-3,
            workers: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(self.e_min.is_finite() && self.e_max.is_finite() && self.e_max >= self.e_min) {
            return bad("scan window must satisfy e_min <= e_max");
        }
        if !(self.e_step > 0.0) {
            return bad("e_step must be positive");
        }
        if !(self.bisect_tol > 0.0) {
            return bad("bisect_tol must be positive");
        }
        if self.spectra && self.n_iter == 0 {
            return bad("n_iter must be positive");
        }
        Ok(())
    }

    /// Grid energies `e_min + i e_step` up to `e_max` (within rounding).
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.e_max - self.e_min) / self.e_step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| self.e_min + i as f64 * self.e_step)
            .collect()
    }
}

/// Outcome at one grid energy. Failures are kept in `error` and the scan continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub energy: f64,
    pub spectrum: Option<LyapunovSpectrum>,
    pub fixed_point: Option<PeriodicPointResult>,
    pub cycle: Option<PeriodicPointResult>,
    pub regime: Option<Classification>,
    pub error: Option<String>,
}

impl ScanRecord {
    fn push_error(&mut self, what: &str, err: &Error) {
        let msg = format!("{what}: {err}");
        self.error = Some(match self.error.take() {
            Some(prev) => format!("{prev}; {msg}"),
            None => msg,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BifurcationKind {
    /// A real multiplier of the fixed point crosses `-1`.
    PeriodDoubling,
    /// A complex pair of the period-2 multipliers leaves the unit circle.
    TorusBirth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bifurcation {
    pub kind: BifurcationKind,
    pub energy: f64,
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub records: Vec<ScanRecord>,
    pub bifurcations: Vec<Bifurcation>,
}

impl ScanReport {
    pub fn first(&self, kind: BifurcationKind) -> Option<&Bifurcation> {
        self.bifurcations.iter().find(|b| b.kind == kind)
    }
}

/// Iterations used to let an orbit settle on a freshly born period-2 cycle.
const CYCLE_SETTLE: usize = 3000;

/// Scans the energy window: fixed points and the attractor are continued sequentially,
/// bifurcations are bisected, and the spectra are then computed in parallel. Records are
/// ordered by energy.
pub fn energy_scan(base: &PoincareMap, cfg: &ScanConfig) -> Result<ScanReport> {
    cfg.validate()?;
    let energies = cfg.grid();
    let mut records: Vec<ScanRecord> = energies
        .iter()
        .map(|&energy| ScanRecord {
            energy,
            spectrum: None,
            fixed_point: None,
            cycle: None,
            regime: None,
            error: None,
        })
        .collect();

    let mut fp_seed = cfg.seed;
    let mut cycle_seed: Option<SectionPoint> = None;
    let mut orbit_seed: Option<SectionPoint> = None;
    let mut spectrum_seeds = vec![None; records.len()];
    for (rec, spectrum_seed) in records.iter_mut().zip(spectrum_seeds.iter_mut()) {
        let map = base.at_energy(rec.energy);
        match find_periodic_point(&map, &fp_seed, 1, &cfg.newton) {
            Ok(fp) => {
                fp_seed = fp.point;
                rec.fixed_point = Some(fp);
            }
            Err(e) => rec.push_error("fixed point", &e),
        }
        if cfg.track_cycle {
            match continue_cycle(&map, rec.fixed_point.as_ref(), cycle_seed, cfg) {
                Ok(Some(c)) => {
                    cycle_seed = Some(c.point);
                    rec.cycle = Some(c);
                }
                Ok(None) => {}
                Err(e) => {
                    cycle_seed = None;
                    rec.push_error("period-2 cycle", &e);
                }
            }
        }
        if cfg.spectra {
            // the attractor is followed from energy to energy; its basin need not
            // contain the fixed point
            let start = orbit_seed.unwrap_or_else(|| match &rec.fixed_point {
                Some(fp) => fp.point.offset(&Vector3::repeat(cfg.seed_offset)),
                None => cfg.seed,
            });
            match iterate_attractor(
                &map,
                &start,
                cfg.settle.saturating_sub(1),
                1,
                cfg.escape_radius,
            ) {
                Ok(cloud) => {
                    orbit_seed = Some(cloud[0]);
                    *spectrum_seed = Some(cloud[0]);
                }
                Err(e) => {
                    orbit_seed = None;
                    rec.push_error("spectrum", &e);
                }
            }
        }
    }

    let bifurcations = locate_bifurcations(base, &records, cfg);

    if cfg.spectra {
        let run = |records: &mut Vec<ScanRecord>| {
            records
                .par_iter_mut()
                .zip(&spectrum_seeds)
                .for_each(|(rec, seed)| {
                    let Some(seed) = seed else {
                        return;
                    };
                    let map = base.at_energy(rec.energy);
                    match lyapunov_spectrum(
                        &map,
                        seed,
                        cfg.n_transient,
                        cfg.n_iter,
                        cfg.escape_radius,
                    ) {
                        Ok(s) => {
                            rec.regime = Some(classify_regime(&s, cfg.zero_tol));
                            rec.spectrum = Some(s);
                        }
                        Err(e) => rec.push_error("spectrum", &e),
                    }
                })
        };
        if cfg.workers == 0 {
            run(&mut records);
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?
                .install(|| run(&mut records));
        }
    }
    Ok(ScanReport {
        records,
        bifurcations,
    })
}

/// Period-2 cycle at this energy: continued from `seed`, or found by settling an orbit
/// near a flip-unstable fixed point. `None` while no cycle is expected.
fn continue_cycle(
    map: &PoincareMap,
    fp: Option<&PeriodicPointResult>,
    seed: Option<SectionPoint>,
    cfg: &ScanConfig,
) -> Result<Option<PeriodicPointResult>> {
    let seed = match (seed, fp) {
        (Some(s), _) => s,
        (None, Some(fp)) if fp.has_flip() => settle_on_cycle(map, fp, cfg)?,
        _ => return Ok(None),
    };
    let cycle = find_periodic_point(map, &seed, 2, &cfg.newton)?;
    if let Some(fp) = fp {
        if cycle.point.distance(&fp.point) < 1e-6 {
            return Err(Error::NoConvergence {
                iterations: cycle.iterations,
                residual: cycle.residual,
            });
        }
    }
    Ok(Some(cycle))
}

fn settle_on_cycle(
    map: &PoincareMap,
    fp: &PeriodicPointResult,
    cfg: &ScanConfig,
) -> Result<SectionPoint> {
    let start = fp.point.offset(&Vector3::repeat(cfg.seed_offset));
    let cloud = iterate_attractor(map, &start, CYCLE_SETTLE, 4, cfg.escape_radius)?;
    match detect_period(&cloud, 2, 1e-3) {
        Some(2) => Ok(cloud[cloud.len() - 1]),
        _ => Err(Error::NoConvergence {
            iterations: CYCLE_SETTLE,
            residual: cloud[0].distance(&cloud[2]),
        }),
    }
}

fn locate_bifurcations(
    base: &PoincareMap,
    records: &[ScanRecord],
    cfg: &ScanConfig,
) -> Vec<Bifurcation> {
    let mut out = Vec::new();
    for w in records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if let (Some(fa), Some(fb)) = (&a.fixed_point, &b.fixed_point) {
            if fa.has_flip() != fb.has_flip() {
                let pred = |e: f64, seed: &SectionPoint| {
                    find_periodic_point(&base.at_energy(e), seed, 1, &cfg.newton)
                        .map(|r| (r.has_flip(), r.point))
                };
                if let Some(bif) = bisect(a.energy, b.energy, fa.point, fa.has_flip(), cfg, pred) {
                    out.push(Bifurcation {
                        kind: BifurcationKind::PeriodDoubling,
                        energy: bif.0,
                        bracket: bif.1,
                    });
                }
            }
        }
        if let (Some(ca), Some(cb)) = (&a.cycle, &b.cycle) {
            if ca.has_unstable_focus() != cb.has_unstable_focus() {
                let pred = |e: f64, seed: &SectionPoint| {
                    find_periodic_point(&base.at_energy(e), seed, 2, &cfg.newton)
                        .map(|r| (r.has_unstable_focus(), r.point))
                };
                if let Some(bif) = bisect(
                    a.energy,
                    b.energy,
                    ca.point,
                    ca.has_unstable_focus(),
                    cfg,
                    pred,
                ) {
                    out.push(Bifurcation {
                        kind: BifurcationKind::TorusBirth,
                        energy: bif.0,
                        bracket: bif.1,
                    });
                }
            }
        }
    }
    out
}

/// Bisects a change of a boolean indicator, continuing the solution from the lower end.
fn bisect<F>(
    mut lo: f64,
    mut hi: f64,
    mut seed: SectionPoint,
    lo_value: bool,
    cfg: &ScanConfig,
    pred: F,
) -> Option<(f64, (f64, f64))>
where
    F: Fn(f64, &SectionPoint) -> Result<(bool, SectionPoint)>,
{
    while hi - lo > cfg.bisect_tol {
        let mid = 0.5 * (lo + hi);
        let (value, point) = pred(mid, &seed).ok()?;
        if value == lo_value {
            lo = mid;
            seed = point;
        } else {
            hi = mid;
        }
    }
    Some((0.5 * (lo + hi), (lo, hi)))
}
