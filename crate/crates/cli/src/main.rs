//! Command-line front end of the `celtic-stone` library.
//!
//! Every command writes `<command>-summary.json` into the output directory, prints the same
//! JSON on stdout and exits with 0 on success, 2 on bad configuration or IO, 3 on a
//! numerical failure and 4 when an orbit escapes.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use celtic_stone::analysis::Branch;
use celtic_stone::integrator::CrossingDirection;
use celtic_stone::poincare::SectionPoint;
use clap::{Args, Parser, Subcommand};

use commands::{Failure, Which};
use config::{ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "celtic-stone",
    version,
    about = "Celtic stone dynamics and its discrete Lorenz attractor"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration file. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $CELTIC_STONE_OUT or ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Energy level of the section.
    #[arg(long = "E", alias = "energy", global = true)]
    energy: Option<f64>,
    /// Seed point `l,eta,xi`.
    #[arg(long, global = true, value_parser = parse_point, allow_hyphen_values = true)]
    seed: Option<SectionPoint>,
    /// Relative and absolute integrator tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Section crossing direction: + or -.
    #[arg(long, global = true, value_parser = parse_direction)]
    direction: Option<CrossingDirection>,
    /// Transient iterations.
    #[arg(long, global = true)]
    transient: Option<usize>,
    /// Random seed of jitter and sampling.
    #[arg(long, global = true)]
    random_seed: Option<u64>,
    /// Uniform jitter added to the seed point.
    #[arg(long, global = true)]
    jitter: Option<f64>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Integrate the flow from the lifted seed and write trajectory.csv.
    Simulate {
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Iterate the map, write attractor.csv and classify the regime.
    Attractor {
        /// Iterates kept after the transient.
        #[arg(long)]
        iters: Option<usize>,
        /// Carry the orbit along the attractor from this energy.
        #[arg(long)]
        follow_from: Option<f64>,
    },
    /// Lyapunov spectrum of the map.
    Lyapunov {
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        follow_from: Option<f64>,
    },
    /// Newton search for a periodic point near the seed.
    FixedPoint {
        #[arg(long, default_value_t = 1)]
        period: usize,
    },
    /// Trace the one-dimensional unstable manifold of the periodic point near the seed.
    Manifold {
        #[arg(long, default_value_t = 1)]
        period: usize,
        /// + or -; both branches when omitted.
        #[arg(long, allow_hyphen_values = true)]
        branch: Option<Branch>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        eps0: Option<f64>,
        #[arg(long)]
        spacing_max: Option<f64>,
    },
    /// Locate the energy where the unstable branch returns onto the stable manifold.
    Butterfly {
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value = "+", allow_hyphen_values = true)]
        branch: Branch,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Energy scan with regime classification and bifurcation detection.
    Scan {
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        no_spectra: bool,
        #[arg(long)]
        track_cycle: bool,
    },
    /// Check the map symmetries on random section points.
    SymmetryCheck {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Largest Lyapunov exponent of the classical Lorenz system at two tolerances.
    LorenzValidate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Attractor { .. } => "attractor",
            Command::Lyapunov { .. } => "lyapunov",
            Command::FixedPoint { .. } => "fixed-point",
            Command::Manifold { .. } => "manifold",
            Command::Butterfly { .. } => "butterfly",
            Command::Scan { .. } => "scan",
            Command::SymmetryCheck { .. } => "symmetry-check",
            Command::LorenzValidate => "lorenz-validate",
        }
    }
}

fn parse_point(s: &str) -> Result<SectionPoint, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [l, eta, xi] => Ok(SectionPoint::new(l, eta, xi)),
        _ => Err("expected three comma-separated numbers l,eta,xi".into()),
    }
}

fn parse_direction(s: &str) -> Result<CrossingDirection, String> {
    match s {
        "+" | "positive" => Ok(CrossingDirection::Positive),
        "-" | "negative" => Ok(CrossingDirection::Negative),
        _ => Err(format!("unknown direction {s:?}, expected + or -")),
    }
}

fn build_config(common: &Common, command: &Command) -> Result<(RunConfig, Which), ConfigError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &common.out {
        cfg.output_dir = Some(p.clone());
    }
    if let Some(e) = common.energy {
        cfg.map.energy = e;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.tol {
        cfg.map.integrator = cfg.map.integrator.with_tolerance(t);
    }
    if let Some(d) = common.direction {
        cfg.map.crossing_direction = d;
    }
    if let Some(n) = common.transient {
        cfg.analysis.n_transient = n;
    }
    if let Some(r) = common.random_seed {
        cfg.random_seed = r;
    }
    if let Some(j) = common.jitter {
        cfg.jitter = j;
    }

    let which = match *command {
        Command::Simulate { t_end } => {
            cfg.t_end = t_end.unwrap_or(cfg.t_end);
            Which::Simulate
        }
        Command::Attractor { iters, follow_from } => {
            cfg.analysis.n_keep = iters.unwrap_or(cfg.analysis.n_keep);
            cfg.analysis.follow_from = follow_from.or(cfg.analysis.follow_from);
            Which::Attractor
        }
        Command::Lyapunov { iters, follow_from } => {
            cfg.analysis.n_iter = iters.unwrap_or(cfg.analysis.n_iter);
            cfg.analysis.follow_from = follow_from.or(cfg.analysis.follow_from);
            Which::Lyapunov
        }
        Command::FixedPoint { period } => Which::FixedPoint { period },
        Command::Manifold {
            period,
            branch,
            points,
            eps0,
            spacing_max,
        } => {
            let m = &mut cfg.analysis.manifold;
            m.n_points = points.unwrap_or(m.n_points);
            m.eps0 = eps0.unwrap_or(m.eps0);
            m.spacing_max = spacing_max.unwrap_or(m.spacing_max);
            Which::Manifold { period, branch }
        }
        Command::Butterfly {
            from,
            to,
            branch,
            rho,
        } => {
            cfg.analysis.rho = rho.unwrap_or(cfg.analysis.rho);
            Which::Butterfly { from, to, branch }
        }
        Command::Scan {
            from,
            to,
            step,
            iters,
            workers,
            no_spectra,
            track_cycle,
        } => {
            let w = &mut cfg.scan;
            w.e_min = from.unwrap_or(w.e_min);
            w.e_max = to.unwrap_or(w.e_max);
            w.e_step = step.unwrap_or(w.e_step);
            w.workers = workers.unwrap_or(w.workers);
            w.spectra &= !no_spectra;
            w.track_cycle |= track_cycle;
            cfg.analysis.n_iter = iters.unwrap_or(cfg.analysis.n_iter);
            Which::Scan
        }
        Command::SymmetryCheck { samples } => {
            cfg.n_samples = samples.unwrap_or(cfg.n_samples);
            Which::SymmetryCheck
        }
        Command::LorenzValidate => Which::LorenzValidate,
    };
    if let Which::FixedPoint { period } | Which::Manifold { period, .. } = which {
        if period == 0 {
            return Err(ConfigError("period must be positive".into()));
        }
    }
    cfg.validate()?;
    Ok((cfg, which))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let name = cli.command.name();
    let (cfg, outcome) = match build_config(&cli.common, &cli.command) {
        Ok((cfg, which)) => {
            let outcome = commands::run(&cfg, which);
            (cfg, outcome)
        }
        Err(e) => {
            let cfg = RunConfig {
                output_dir: cli.common.out.clone(),
                ..RunConfig::default()
            };
            (cfg, Err(Failure::from(e)))
        }
    };
    let mut summary = commands::summary(name, &cfg, &outcome, started);
    let mut code = match &outcome {
        Ok(_) => 0,
        Err(f) => f.exit_code(),
    };
    match output::write_json(&cfg.output_dir(), &format!("{name}-summary.json"), &summary) {
        Ok(_) => {}
        Err(e) => {
            eprintln!("error: cannot write summary: {e}");
            if code == 0 {
                code = 2;
                summary["status"] = "error".into();
                summary["exit_code"] = 2.into();
            }
        }
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).unwrap_or_default()
    );
    if let Err(f) = &outcome {
        eprintln!("error: {}", f.message());
    }
    ExitCode::from(code as u8)
}
