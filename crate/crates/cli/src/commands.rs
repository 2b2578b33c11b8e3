use std::path::PathBuf;
use std::time::Instant;

use celtic_stone::analysis::orbit::{continue_attractor, energy_path};
use celtic_stone::analysis::{
    bisect_separatrix_sign, classify_regime, cloud_diameter, detect_period, energy_scan,
    find_periodic_point, iterate_attractor, lyapunov_spectrum, trace_unstable_manifold, Branch,
    PeriodicPointResult,
};
use celtic_stone::integrator::{integrate, lorenz_max_exponent, IntegratorConfig, LorenzField};
use celtic_stone::physics::{integrals, BodyState, StoneFlow};
use celtic_stone::poincare::{PoincareMap, SectionPoint};
use celtic_stone::Error;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};
use crate::output;

pub enum Failure {
    Config(String),
    Numerical(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(Error::OrbitEscaped { .. }) => 4,
            Failure::Numerical(Error::InvalidParams(_)) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Config(m) => m.clone(),
            Failure::Numerical(e) => e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numerical(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("cannot write output: {e}"))
    }
}

/// What a command produced: result fields for the summary and written files.
pub struct Outcome {
    pub results: Value,
    pub artifacts: Vec<PathBuf>,
}

pub type CmdResult = Result<Outcome, Failure>;

#[derive(Debug, Clone, Copy)]
pub enum Which {
    Simulate,
    Attractor,
    Lyapunov,
    FixedPoint {
        period: usize,
    },
    Manifold {
        period: usize,
        branch: Option<Branch>,
    },
    Butterfly {
        from: f64,
        to: f64,
        branch: Branch,
    },
    Scan,
    SymmetryCheck,
    LorenzValidate,
}

pub fn run(cfg: &RunConfig, which: Which) -> CmdResult {
    match which {
        Which::Simulate => simulate(cfg),
        Which::Attractor => attractor(cfg),
        Which::Lyapunov => lyapunov(cfg),
        Which::FixedPoint { period } => fixed_point(cfg, period),
        Which::Manifold { period, branch } => manifold(cfg, period, branch),
        Which::Butterfly { from, to, branch } => butterfly(cfg, from, to, branch),
        Which::Scan => scan(cfg),
        Which::SymmetryCheck => symmetry_check(cfg),
        Which::LorenzValidate => lorenz_validate(cfg),
    }
}

fn map_of(cfg: &RunConfig) -> Result<PoincareMap, Failure> {
    Ok(PoincareMap::new(cfg.stone, cfg.map)?)
}

fn rng(cfg: &RunConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.random_seed)
}

/// The configured seed with its jitter applied.
fn seed_point(cfg: &RunConfig) -> SectionPoint {
    if cfg.jitter == 0.0 {
        return cfg.seed;
    }
    let mut r = rng(cfg);
    let j = cfg.jitter;
    let d = Vector3::from_fn(|_, _| r.gen_range(-j..=j));
    cfg.seed.offset(&d)
}

/// The seed, carried along the attractor from `analysis.follow_from` when that is set.
fn orbit_seed(cfg: &RunConfig, map: &PoincareMap) -> Result<SectionPoint, Failure> {
    let seed = seed_point(cfg);
    match cfg.analysis.follow_from {
        Some(e0) => {
            let mut path = vec![e0];
            path.extend(energy_path(e0, map.energy(), 1.0));
            path.pop();
            Ok(continue_attractor(
                map,
                &seed,
                &path,
                cfg.analysis.settle,
                cfg.analysis.escape_radius,
            )?)
        }
        None => Ok(seed),
    }
}

fn meta(cfg: &RunConfig, command: &str) -> Vec<(&'static str, String)> {
    vec![
        ("command", command.to_string()),
        ("energy", cfg.map.energy.to_string()),
        ("g0", cfg.map.g0.to_string()),
        (
            "crossing_direction",
            cfg.map.crossing_direction.as_str().to_string(),
        ),
        ("rel_tol", format!("{:e}", cfg.map.integrator.rel_tol)),
        ("abs_tol", format!("{:e}", cfg.map.integrator.abs_tol)),
        ("delta", cfg.stone.delta.to_string()),
    ]
}

fn periodic_json(fp: &PeriodicPointResult) -> Value {
    let mut v = json!({
        "point": [fp.point.l, fp.point.eta, fp.point.xi],
        "period": fp.period,
        "multipliers": fp.multipliers.iter().map(|m| json!({"re": m.re, "im": m.im, "abs": m.norm()})).collect::<Vec<_>>(),
        "residual": fp.residual,
        "newton_iterations": fp.iterations,
    });
    if let Some((l1, l2, m3)) = fp.saddle_multipliers() {
        v["saddle"] = json!({
            "lambda1": l1,
            "lambda2": l2,
            "mult3": m3,
            "ordering": l2.abs() < l1.abs() && l1.abs() < 1.0 && 1.0 < m3.abs(),
            "lambda1_mult3_expanding": (l1 * m3).abs() > 1.0,
        });
    }
    v
}

fn simulate(cfg: &RunConfig) -> CmdResult {
    let map = map_of(cfg)?;
    let start = map.lift(&seed_point(cfg))?;
    let flow = StoneFlow::new(&cfg.stone);
    let traj = integrate(
        &flow,
        start.to_vector(),
        (0.0, cfg.t_end),
        &cfg.map.integrator,
    )?;
    let samples: Vec<(f64, BodyState)> = traj
        .samples()
        .map(|(t, y)| (t, BodyState::from_slice(y.as_slice())))
        .collect();
    let e0 = integrals(&start, &cfg.stone)?.energy;
    let (mut drift, mut norm_err) = (0.0f64, 0.0f64);
    for (_, s) in &samples {
        let i = integrals(s, &cfg.stone)?;
        drift = drift.max(((i.energy - e0) / e0).abs());
        norm_err = norm_err.max((i.gamma_norm_sq - 1.0).abs());
    }
    let dir = cfg.output_dir();
    let path = output::write_trajectory(&dir, &meta(cfg, "simulate"), &samples, &cfg.stone)?;
    Ok(Outcome {
        results: json!({
            "steps": traj.steps.len(),
            "t_end": cfg.t_end,
            "initial_energy": e0,
            "max_relative_energy_drift": drift,
            "max_gamma_norm_error": norm_err,
        }),
        artifacts: vec![path],
    })
}

fn attractor(cfg: &RunConfig) -> CmdResult {
    let map = map_of(cfg)?;
    let a = &cfg.analysis;
    let seed = orbit_seed(cfg, &map)?;
    let cloud = iterate_attractor(&map, &seed, a.n_transient, a.n_keep, a.escape_radius)?;
    let dir = cfg.output_dir();
    let path =
        output::write_section_points(&dir, "attractor.csv", &meta(cfg, "attractor"), &cloud)?;
    let start = *cloud.last().unwrap_or(&seed);
    let spectrum = lyapunov_spectrum(&map, &start, 0, a.n_iter, a.escape_radius)?;
    let class = classify_regime(&spectrum, a.zero_tol);
    Ok(Outcome {
        results: json!({
            "points": cloud.len(),
            "diameter": cloud_diameter(&cloud),
            "period": detect_period(&cloud, 64, 1e-6),
            "spectrum": spectrum,
            "regime": class.regime.as_str(),
            "pseudo_hyperbolic_candidate": class.pseudo_hyperbolic,
            "classification": class.to_string(),
        }),
        artifacts: vec![path],
    })
}

fn lyapunov(cfg: &RunConfig) -> CmdResult {
    let map = map_of(cfg)?;
    let a = &cfg.analysis;
    let seed = orbit_seed(cfg, &map)?;
    let spectrum = lyapunov_spectrum(&map, &seed, a.n_transient, a.n_iter, a.escape_radius)?;
    let class = classify_regime(&spectrum, a.zero_tol);
    Ok(Outcome {
        results: json!({
            "spectrum": spectrum,
            "per_unit_time": spectrum.per_unit_time(),
            "sum": spectrum.sum(),
            "regime": class.regime.as_str(),
            "pseudo_hyperbolic_candidate": class.pseudo_hyperbolic,
            "classification": class.to_string(),
        }),
        artifacts: vec![],
    })
}

fn fixed_point(cfg: &RunConfig, period: usize) -> CmdResult {
    let map = map_of(cfg)?;
    let fp = find_periodic_point(&map, &seed_point(cfg), period, &cfg.analysis.newton)?;
    Ok(Outcome {
        results: periodic_json(&fp),
        artifacts: vec![],
    })
}

fn manifold(cfg: &RunConfig, period: usize, branch: Option<Branch>) -> CmdResult {
    let map = map_of(cfg)?;
    let fp = find_periodic_point(&map, &seed_point(cfg), period, &cfg.analysis.newton)?;
    let branches = match branch {
        Some(b) => vec![b],
        None => vec![Branch::Plus, Branch::Minus],
    };
    let lines = branches
        .iter()
        .map(|&b| trace_unstable_manifold(&map, &fp, b, &cfg.analysis.manifold))
        .collect::<Result<Vec<_>, _>>()?;
    let dir = cfg.output_dir();
    let mut m = meta(cfg, "manifold");
    m.push(("eps0", cfg.analysis.manifold.eps0.to_string()));
    m.push(("spacing_max", cfg.analysis.manifold.spacing_max.to_string()));
    let path = output::write_manifold(&dir, &m, &lines)?;
    Ok(Outcome {
        results: json!({
            "saddle": periodic_json(&fp),
            "points_per_branch": lines.iter().map(|l| l.points.len()).collect::<Vec<_>>(),
        }),
        artifacts: vec![path],
    })
}

fn butterfly(cfg: &RunConfig, from: f64, to: f64, branch: Branch) -> CmdResult {
    let map = map_of(cfg)?;
    let a = &cfg.analysis;
    let found = bisect_separatrix_sign(
        &map,
        &seed_point(cfg),
        from,
        to,
        branch,
        &a.manifold,
        a.rho,
        &a.newton,
        cfg.scan.bisect_tol,
    )?;
    Ok(Outcome {
        results: json!({
            "energy": found.energy,
            "bracket": [found.bracket.0, found.bracket.1],
            "lower": found.lower,
            "upper": found.upper,
            "rho": a.rho,
            "branch": branch.as_str(),
        }),
        artifacts: vec![],
    })
}

fn scan(cfg: &RunConfig) -> CmdResult {
    let map = map_of(cfg)?;
    let report = energy_scan(&map, &cfg.scan_config())?;
    let dir = cfg.output_dir();
    let path = output::write_scan(&dir, &meta(cfg, "scan"), &report.records)?;
    let lambda1: Vec<Option<f64>> = report
        .records
        .iter()
        .map(|r| r.spectrum.map(|s| s.lambda1))
        .collect();
    let failed = report.records.iter().filter(|r| r.error.is_some()).count();
    Ok(Outcome {
        results: json!({
            "records": report.records.len(),
            "failed_records": failed,
            "lambda1": lambda1,
            "all_lambda1_positive": lambda1.iter().all(|l| l.is_some_and(|v| v > 0.0)),
            "bifurcations": report.bifurcations,
        }),
        artifacts: vec![path],
    })
}

fn symmetry_check(cfg: &RunConfig) -> CmdResult {
    let map = map_of(cfg)?;
    let mut r = rng(cfg);
    let mut worst = [0.0f64; 3];
    let mut rows = Vec::new();
    let mut rejected = 0usize;
    while rows.len() < cfg.n_samples {
        let x = SectionPoint::new(
            r.gen_range(0.0..std::f64::consts::TAU),
            r.gen_range(-0.9..0.9),
            r.gen_range(-0.9..0.9),
        );
        match map.symmetry_defects(&x) {
            Ok(d) => {
                for (w, v) in worst.iter_mut().zip(d) {
                    *w = w.max(v);
                }
                rows.push((x, d));
            }
            Err(_) => {
                rejected += 1;
                if rejected > 100 * cfg.n_samples.max(1) {
                    return Err(Failure::Numerical(Error::NoReturn));
                }
            }
        }
    }
    let dir = cfg.output_dir();
    let mut out = output::CsvOut::create(
        &dir,
        "symmetry.csv",
        &meta(cfg, "symmetry-check"),
        &["l", "eta", "xi", "s1_defect", "i1_defect", "i2_defect"],
    )?;
    for (x, d) in &rows {
        out.row([x.l, x.eta, x.xi, d[0], d[1], d[2]].map(|v| format!("{v:.17e}")))?;
    }
    let path = out.finish()?;
    Ok(Outcome {
        results: json!({
            "samples": rows.len(),
            "rejected": rejected,
            "max_defect": {"S1": worst[0], "I1": worst[1], "I2": worst[2]},
        }),
        artifacts: vec![path],
    })
}

fn lorenz_validate(cfg: &RunConfig) -> CmdResult {
    let field = LorenzField::default();
    let start = nalgebra::SVector::<f64, 3>::new(1.0, 1.0, 20.0);
    let tols = [1e-9, 1e-11];
    let mut values = Vec::new();
    for tol in tols {
        let icfg = IntegratorConfig {
            max_steps: 10_000_000,
            ..cfg.map.integrator.with_tolerance(tol)
        };
        values.push(lorenz_max_exponent(field, start, 50.0, 1000.0, 1.0, &icfg)?);
    }
    let agree = (values[0] - values[1]).abs() < 0.01;
    Ok(Outcome {
        results: json!({
            "tolerances": tols,
            "max_exponent": values,
            "agree": agree,
            "reference": 0.906,
        }),
        artifacts: vec![],
    })
}

/// Summary record written next to the artifacts and printed on stdout.
pub fn summary(
    command: &str,
    cfg: &RunConfig,
    outcome: &Result<Outcome, Failure>,
    started: Instant,
) -> Value {
    let mut v = json!({
        "command": command,
        "config": cfg,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
    });
    match outcome {
        Ok(o) => {
            v["status"] = json!("ok");
            v["exit_code"] = json!(0);
            v["results"] = o.results.clone();
            v["artifacts"] = json!(o.artifacts);
        }
        Err(f) => {
            v["status"] = json!("error");
            v["exit_code"] = json!(f.exit_code());
            v["error"] = json!(f.message());
        }
    }
    v
}
