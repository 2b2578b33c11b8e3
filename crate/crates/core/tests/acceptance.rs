//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit when any fails.

use std::process::ExitCode;
use std::time::Instant;

use celtic_stone::analysis::manifold::directed_hausdorff;
use celtic_stone::analysis::orbit::{continue_attractor, energy_path, DEFAULT_ESCAPE_RADIUS};
use celtic_stone::analysis::{
    bisect_separatrix_sign, classify_regime, energy_scan, find_periodic_point, iterate_attractor,
    lyapunov_spectrum, trace_unstable_manifold, BifurcationKind, Branch, LyapunovSpectrum,
    ManifoldConfig, NewtonConfig, Regime, ScanConfig,
};
use celtic_stone::andoyer::{ad_to_cartesian, cartesian_to_ad, AdState};
use celtic_stone::integrator::{integrate, lorenz_max_exponent, IntegratorConfig, LorenzField};
use celtic_stone::physics::{
    integrals, momentum_from_omega, omega_from_momentum, StoneFlow, StoneParams,
};
use celtic_stone::poincare::{
    apply_symmetry, jacobian_with_step, MapConfig, PoincareMap, SectionPoint, Symmetry,
};
use celtic_stone::Result;
use nalgebra::{SVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_TRANSIENT: usize = 1000;
const N_ITER: usize = 10_000;
const ZERO_TOL: f64 = 0.002;
const SEED_OFFSET: f64 = 1e-4;

fn map(energy: f64) -> PoincareMap {
    PoincareMap::new(StoneParams::default(), MapConfig::at_energy(energy)).unwrap()
}

fn guess() -> SectionPoint {
    SectionPoint::new(3.65, 0.67, -0.38)
}

/// Collects the checks of one criterion.
struct Checks {
    items: Vec<(bool, String)>,
}

impl Checks {
    fn new() -> Self {
        Self { items: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.items.push((ok, what));
    }

    fn passed(&self) -> bool {
        !self.items.is_empty() && self.items.iter().all(|(ok, _)| *ok)
    }
}

/// Spectrum of the orbit through `fixed point + SEED_OFFSET` at `energy`.
fn spectrum_near_fixed_point(energy: f64) -> Result<LyapunovSpectrum> {
    let m = map(energy);
    let fp = find_periodic_point(&m, &guess(), 1, &NewtonConfig::default())?;
    let x0 = fp.point.offset(&Vector3::new(SEED_OFFSET, 0.0, 0.0));
    lyapunov_spectrum(&m, &x0, N_TRANSIENT, N_ITER, DEFAULT_ESCAPE_RADIUS)
}

/// Orbit point on the attractor at `energy`, carried along from the 752 attractor.
fn continued_seed(energy: f64) -> Result<SectionPoint> {
    let base = map(752.0);
    let fp = find_periodic_point(&base, &guess(), 1, &NewtonConfig::default())?;
    let x0 = fp.point.offset(&Vector3::new(SEED_OFFSET, 0.0, 0.0));
    let mut path = vec![752.0];
    path.extend(energy_path(752.0, energy, 1.0));
    path.pop();
    continue_attractor(&base, &x0, &path, 1000, DEFAULT_ESCAPE_RADIUS)
}

fn fmt3(v: [f64; 3]) -> String {
    format!("({:.5}, {:.5}, {:.5})", v[0], v[1], v[2])
}

fn criterion_1(c: &mut Checks) -> Result<()> {
    let started = Instant::now();
    let fp = find_periodic_point(&map(752.0), &guess(), 1, &NewtonConfig::default())?;
    let p = [fp.point.l, fp.point.eta, fp.point.xi];
    let target = [3.650, 0.669, -0.384];
    let close = p.iter().zip(target).all(|(a, b)| (a - b).abs() < 1e-2);
    c.check(close, format!("fixed point {}", fmt3(p)));
    let (l1, l2, m3) = fp.saddle_multipliers().expect("saddle");
    let mults = [l1, l2, m3];
    let ok = mults
        .iter()
        .zip([0.996, -0.664, -1.312])
        .all(|(a, b)| (a - b).abs() <= 0.05);
    c.check(ok, format!("multipliers {}", fmt3(mults)));
    c.check(
        (l1 * m3).abs() > 1.0,
        format!("|lambda1 mult3| = {:.4}", (l1 * m3).abs()),
    );
    let secs = started.elapsed().as_secs_f64();
    c.check(secs < 60.0, format!("runtime {secs:.2} s"));
    Ok(())
}

fn criterion_2(c: &mut Checks, s: &LyapunovSpectrum) {
    let t = s.per_unit_time();
    c.check(
        (t[0] - 0.0248).abs() <= 0.01,
        format!("Lambda1 = {:.5} per unit time", t[0]),
    );
    c.check(
        (t[2] + 0.2445).abs() <= 0.02,
        format!("Lambda3 = {:.5} per unit time", t[2]),
    );
    c.check(
        t[1].abs() < 0.002,
        format!("|Lambda2| = {:.5} per unit time", t[1].abs()),
    );
    let class = classify_regime(s, ZERO_TOL);
    c.check(
        class.pseudo_hyperbolic,
        format!(
            "L1 > 0, L1 + L2 = {:.5} > 0, L1 + L2 + L3 = {:.5} < 0 (per iteration, mean return time {:.4})",
            s.lambda1 + s.lambda2,
            s.sum(),
            s.mean_return_time
        ),
    );
}

fn criterion_3(c: &mut Checks) -> Result<()> {
    let cfg = ScanConfig {
        e_min: 752.0,
        e_max: 752.01,
        e_step: 1e-3,
        n_transient: N_TRANSIENT,
        n_iter: N_ITER,
        ..ScanConfig::default()
    };
    let report = energy_scan(&map(752.0), &cfg)?;
    c.check(
        report.records.len() == 11,
        format!("{} grid points", report.records.len()),
    );
    for r in &report.records {
        match (&r.spectrum, &r.error) {
            (Some(s), _) => c.check(
                s.lambda1 > 0.0,
                format!("E = {:.3}: Lambda1 = {:.5}", r.energy, s.lambda1),
            ),
            (None, e) => c.check(false, format!("E = {:.3}: {e:?}", r.energy)),
        }
    }
    Ok(())
}

/// Energy in `[lo, hi]` where the complex pair of the fixed point becomes real.
fn focus_to_node(lo: f64, hi: f64) -> Result<f64> {
    let complex = |e: f64| -> Result<bool> {
        let fp = find_periodic_point(&map(e), &guess(), 1, &NewtonConfig::default())?;
        Ok(fp.multipliers.iter().any(|m| m.im.abs() > 1e-9))
    };
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if complex(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn criterion_4(c: &mut Checks) -> Result<()> {
    let cfg = ScanConfig {
        e_min: 747.3,
        e_max: 749.2,
        e_step: 0.1,
        spectra: false,
        track_cycle: true,
        bisect_tol: 1e-4,
        ..ScanConfig::default()
    };
    let report = energy_scan(&map(747.3), &cfg)?;
    match report.first(BifurcationKind::PeriodDoubling) {
        Some(b) => c.check(
            (b.energy - 747.61).abs() <= 0.1,
            format!(
                "period doubling E1 = {:.4} in [{:.4}, {:.4}] (focus-to-node transition of the fixed point at {:.3})",
                b.energy,
                b.bracket.0,
                b.bracket.1,
                focus_to_node(747.3, 748.0)?
            ),
        ),
        None => c.check(false, "no period doubling found".into()),
    }
    match report.first(BifurcationKind::TorusBirth) {
        Some(b) => c.check(
            (b.energy - 748.98).abs() <= 0.05,
            format!(
                "torus birth E4 = {:.4} in [{:.4}, {:.4}]",
                b.energy, b.bracket.0, b.bracket.1
            ),
        ),
        None => c.check(false, "no torus birth found".into()),
    }
    let h = bisect_separatrix_sign(
        &map(748.3),
        &guess(),
        748.3,
        748.5,
        Branch::Plus,
        &ManifoldConfig::default(),
        celtic_stone::analysis::manifold::DEFAULT_RHO,
        &NewtonConfig::default(),
        1e-3,
    )?;
    c.check(
        h.bracket.0 >= 748.40 && h.bracket.1 <= 748.48,
        format!(
            "separatrix side changes in [{:.4}, {:.4}] (sides {:+.2e} / {:+.2e})",
            h.bracket.0, h.bracket.1, h.lower.side, h.upper.side
        ),
    );
    Ok(())
}

fn criterion_5(c: &mut Checks, s752: &LyapunovSpectrum) -> Result<()> {
    let describe = |e: f64, s: &LyapunovSpectrum| {
        let class = classify_regime(s, ZERO_TOL);
        (class, format!("E = {e}: {class} {}", fmt3(s.as_array())))
    };

    let s = spectrum_near_fixed_point(747.0)?;
    let (class, msg) = describe(747.0, &s);
    c.check(class.regime == Regime::PeriodicSink, msg);

    // period-2 sink: negative spectrum, and the orbit settles on a stable 2-cycle
    let m = map(748.5);
    let fp = find_periodic_point(&m, &guess(), 1, &NewtonConfig::default())?;
    let x0 = fp.point.offset(&Vector3::new(SEED_OFFSET, 0.0, 0.0));
    let s = lyapunov_spectrum(&m, &x0, N_TRANSIENT, N_ITER, DEFAULT_ESCAPE_RADIUS)?;
    let (class, msg) = describe(748.5, &s);
    let tail = iterate_attractor(&m, &x0, N_TRANSIENT + N_ITER, 1, DEFAULT_ESCAPE_RADIUS)?;
    let cycle = find_periodic_point(&m, &tail[0], 2, &NewtonConfig::default())?;
    let is_two_cycle = cycle.point.distance(&fp.point) > 1e-3
        && cycle.multipliers.iter().all(|mu| mu.norm() < 1.0)
        && tail[0]
            .distance(&cycle.point)
            .min(tail[0].distance(&m.step(&cycle.point)?))
            < 1e-3;
    c.check(
        class.regime == Regime::PeriodicSink && is_two_cycle,
        format!(
            "{msg}, stable 2-cycle through {}",
            fmt3([cycle.point.l, cycle.point.eta, cycle.point.xi])
        ),
    );

    for (e, s) in [(752.0, *s752), (754.0, spectrum_near_fixed_point(754.0)?)] {
        let (class, msg) = describe(e, &s);
        c.check(
            class.regime == Regime::Chaotic && class.pseudo_hyperbolic,
            msg,
        );
    }

    let s = spectrum_near_fixed_point(755.0)?;
    let (class, msg) = describe(755.0, &s);
    c.check(class.regime == Regime::InvariantCurve, msg);

    for (e, want) in [(775.0, Regime::InvariantCurve), (780.0, Regime::Chaotic)] {
        let x0 = continued_seed(e)?;
        let s = lyapunov_spectrum(&map(e), &x0, N_TRANSIENT, N_ITER, DEFAULT_ESCAPE_RADIUS)?;
        let (class, msg) = describe(e, &s);
        c.check(class.regime == want, msg);
    }

    let escaped = continued_seed(800.0).and_then(|x0| {
        lyapunov_spectrum(&map(800.0), &x0, N_TRANSIENT, N_ITER, DEFAULT_ESCAPE_RADIUS)
    });
    c.check(
        matches!(escaped, Err(celtic_stone::Error::OrbitEscaped { .. })),
        format!(
            "E = 800: {}",
            match escaped {
                Ok(s) => format!("bounded, {}", classify_regime(&s, ZERO_TOL)),
                Err(e) => e.to_string(),
            }
        ),
    );
    Ok(())
}

fn criterion_6(c: &mut Checks) -> Result<()> {
    let m = map(752.0);
    let flow = StoneFlow::new(&m.params);
    let fp = find_periodic_point(&m, &guess(), 1, &NewtonConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut starts = vec![fp.point];
    while starts.len() < 4 {
        let x = SectionPoint::new(
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(-0.8..0.8),
            rng.gen_range(-0.8..0.8),
        );
        if m.lift(&x).is_ok() {
            starts.push(x);
        }
    }
    for x in starts {
        let s0 = m.lift(&x)?;
        let e0 = integrals(&s0, &m.params)?.energy;
        let traj = integrate(
            &flow,
            s0.to_vector(),
            (0.0, 100.0),
            &IntegratorConfig::default(),
        )?;
        let (mut drift, mut norm) = (0.0f64, 0.0f64);
        for (_, y) in traj.samples() {
            let i = integrals(
                &celtic_stone::physics::BodyState::from_slice(y.as_slice()),
                &m.params,
            )?;
            drift = drift.max(((i.energy - e0) / e0).abs());
            norm = norm.max((i.gamma_norm_sq - 1.0).abs());
        }
        c.check(
            drift < 1e-8 && norm < 1e-9,
            format!(
                "from {}: energy drift {drift:.2e}, |(gamma, gamma) - 1| {norm:.2e}",
                fmt3([x.l, x.eta, x.xi])
            ),
        );
    }
    Ok(())
}

fn criterion_7(c: &mut Checks) {
    let m = map(752.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst, mut samples, mut rejected) = ([0.0f64; 3], 0, 0);
    let mut transform = 0.0f64;
    while samples < 100 {
        let x = SectionPoint::new(
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(-0.9..0.9),
            rng.gen_range(-0.9..0.9),
        );
        for s in Symmetry::ALL {
            transform = transform.max(apply_symmetry(&apply_symmetry(&x, s), s).distance(&x));
        }
        let composed = apply_symmetry(&apply_symmetry(&x, Symmetry::S1), Symmetry::I1);
        transform = transform.max(composed.distance(&apply_symmetry(&x, Symmetry::I2)));
        match m.symmetry_defects(&x) {
            Ok(d) => {
                samples += 1;
                for (w, v) in worst.iter_mut().zip(d) {
                    *w = w.max(v);
                }
            }
            Err(_) => rejected += 1,
        }
    }
    c.check(
        worst.iter().all(|&w| w < 1e-6),
        format!(
            "{samples} points ({rejected} outside the map domain): S1 {:.1e}, I1 {:.1e}, I2 {:.1e}",
            worst[0], worst[1], worst[2]
        ),
    );
    c.check(
        transform < 1e-15,
        format!("involutions and I2 = I1 S1 to {transform:.1e}"),
    );
}

fn criterion_8(c: &mut Checks, s752: &LyapunovSpectrum) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = StoneParams::default();
    let (mut ad_err, mut om_err) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let g_mom = rng.gen_range(0.1..50.0);
        let ad = AdState {
            l_mom: rng.gen_range(-0.99..0.99) * g_mom,
            h_mom: rng.gen_range(-0.99..0.99) * g_mom,
            g_mom,
            l_angle: rng.gen_range(0.0..std::f64::consts::TAU),
            g_angle: rng.gen_range(0.0..std::f64::consts::TAU),
        };
        let (mv, gamma) = ad_to_cartesian(&ad)?;
        let (m2, g2) = ad_to_cartesian(&cartesian_to_ad(&mv, &gamma)?)?;
        ad_err = ad_err
            .max((m2 - mv).norm() / g_mom)
            .max((g2 - gamma).norm());
        if gamma.z > 0.3 {
            let omega = Vector3::from_fn(|_, _| rng.gen_range(-20.0..20.0));
            let back = omega_from_momentum(
                &momentum_from_omega(&omega, &gamma, &params)?,
                &gamma,
                &params,
            )?;
            om_err = om_err.max((back - omega).norm() / omega.norm().max(1.0));
        }
    }
    c.check(ad_err < 1e-10, format!("chart round trips {ad_err:.1e}"));
    c.check(om_err < 1e-10, format!("omega/M inverse pair {om_err:.1e}"));

    let m = map(752.0);
    let fp = find_periodic_point(&m, &guess(), 1, &NewtonConfig::default())?;
    let j = |h: f64| jacobian_with_step(&fp.point, &m.cfg, &m.params, h);
    let (j1, j2, j3) = (j(4e-3)?, j(2e-3)?, j(1e-3)?);
    let order = ((j1 - j2).norm() / (j2 - j3).norm()).log2();
    c.check(
        (order - 2.0).abs() < 0.3,
        format!("Jacobian difference order {order:.2}"),
    );

    let gap = (s752.sum() - s752.mean_log_det).abs();
    c.check(
        gap < 1e-3,
        format!("Lyapunov sum minus mean log det {gap:.1e}"),
    );

    let coarse = ManifoldConfig {
        n_points: 400,
        ..ManifoldConfig::default()
    };
    let fine = ManifoldConfig {
        eps0: coarse.eps0 / 2.0,
        n_points: 1200,
        ..coarse
    };
    let a = trace_unstable_manifold(&m, &fp, Branch::Plus, &coarse)?;
    let b = trace_unstable_manifold(&m, &fp, Branch::Plus, &fine)?;
    let d = directed_hausdorff(&a.points, &b.points);
    c.check(
        d < coarse.spacing_max,
        format!("manifold under eps0 halving {d:.1e}"),
    );
    Ok(())
}

fn criterion_9(c: &mut Checks) -> Result<()> {
    let start = SVector::<f64, 3>::new(1.0, 1.0, 20.0);
    let mut values = Vec::new();
    for tol in [1e-9, 1e-11] {
        let cfg = IntegratorConfig {
            max_steps: 10_000_000,
            ..IntegratorConfig::default().with_tolerance(tol)
        };
        let v = lorenz_max_exponent(LorenzField::default(), start, 50.0, 1000.0, 1.0, &cfg)?;
        c.check(
            (v - 0.906).abs() <= 0.02,
            format!("tolerance {tol:e}: {v:.4}"),
        );
        values.push(v);
    }
    c.check(
        (values[0] - values[1]).abs() < 0.01,
        format!("agreement {:.1e}", (values[0] - values[1]).abs()),
    );
    Ok(())
}

fn report(n: usize, started: Instant, outcome: Result<Checks>) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (ok, details) = match outcome {
        Ok(c) => (c.passed(), c.items),
        Err(e) => (false, vec![(false, format!("error: {e}"))]),
    };
    println!(
        "criterion {n}: {} ({secs:.1} s)",
        if ok { "PASS" } else { "FAIL" }
    );
    for (item_ok, what) in details {
        println!("    [{}] {what}", if item_ok { "ok" } else { "FAIL" });
    }
    ok
}

fn run(f: impl FnOnce(&mut Checks) -> Result<()>) -> Result<Checks> {
    let mut c = Checks::new();
    f(&mut c)?;
    Ok(c)
}

fn main() -> ExitCode {
    let mut results = Vec::new();

    let t = Instant::now();
    results.push(report(1, t, run(criterion_1)));

    let t = Instant::now();
    let s752 = spectrum_near_fixed_point(752.0);
    results.push(report(
        2,
        t,
        s752.clone().map(|s| {
            let mut c = Checks::new();
            criterion_2(&mut c, &s);
            c
        }),
    ));

    let t = Instant::now();
    results.push(report(3, t, run(criterion_3)));

    let t = Instant::now();
    results.push(report(4, t, run(criterion_4)));

    let t = Instant::now();
    results.push(report(
        5,
        t,
        s752.clone().and_then(|s| run(|c| criterion_5(c, &s))),
    ));

    let t = Instant::now();
    results.push(report(6, t, run(criterion_6)));

    let t = Instant::now();
    results.push(report(
        7,
        t,
        run(|c| {
            criterion_7(c);
            Ok(())
        }),
    ));

    let t = Instant::now();
    results.push(report(8, t, s752.and_then(|s| run(|c| criterion_8(c, &s)))));

    let t = Instant::now();
    results.push(report(9, t, run(criterion_9)));

    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
