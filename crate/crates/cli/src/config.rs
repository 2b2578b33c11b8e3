use std::fs;
use std::path::{Path, PathBuf};

use celtic_stone::analysis::lyapunov::DEFAULT_ZERO_TOL;
use celtic_stone::analysis::manifold::DEFAULT_RHO;
use celtic_stone::analysis::orbit::DEFAULT_ESCAPE_RADIUS;
use celtic_stone::analysis::{ManifoldConfig, NewtonConfig, ScanConfig};
use celtic_stone::physics::StoneParams;
use celtic_stone::poincare::{MapConfig, SectionPoint};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CELTIC_STONE_OUT";

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Knobs of the analysis routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub n_transient: usize,
    pub n_iter: usize,
    pub n_keep: usize,
    pub zero_tol: f64,
    pub escape_radius: f64,
    pub rho: f64,
    pub newton: NewtonConfig,
    pub manifold: ManifoldConfig,
    /// Energy at which orbit commands start; the orbit is then carried along the
    /// attractor to the target energy.
    pub follow_from: Option<f64>,
    /// Iterations per energy step while carrying an orbit along.
    pub settle: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            n_transient: 1000,
            n_iter: 10_000,
            n_keep: 10_000,
            zero_tol: DEFAULT_ZERO_TOL,
            escape_radius: DEFAULT_ESCAPE_RADIUS,
            rho: DEFAULT_RHO,
            newton: NewtonConfig::default(),
            manifold: ManifoldConfig::default(),
            follow_from: None,
            settle: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanWindow {
    pub e_min: f64,
    pub e_max: f64,
    pub e_step: f64,
    pub spectra: bool,
    pub track_cycle: bool,
    pub bisect_tol: f64,
    /// 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for ScanWindow {
    fn default() -> Self {
        Self {
            e_min: 752.0,
            e_max: 752.01,
            e_step: 1e-3,
            spectra: true,
            track_cycle: false,
            bisect_tol: 1e-3,
            workers: 0,
        }
    }
}

/// Everything a command needs. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub stone: StoneParams,
    pub map: MapConfig,
    pub analysis: AnalysisConfig,
    pub scan: ScanWindow,
    /// Seed point of orbits and initial guess of periodic point searches.
    pub seed: SectionPoint,
    /// Uniform jitter applied to the seed, drawn from `random_seed`.
    pub jitter: f64,
    pub random_seed: u64,
    /// Flow time of `simulate`.
    pub t_end: f64,
    /// Random section points of `symmetry-check`.
    pub n_samples: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            stone: StoneParams::default(),
            map: MapConfig::default(),
            analysis: AnalysisConfig::default(),
            scan: ScanWindow::default(),
            seed: SectionPoint::new(3.65, 0.67, -0.38),
            jitter: 0.0,
            random_seed: 0,
            t_end: 100.0,
            n_samples: 100,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |e: celtic_stone::Error| ConfigError(e.to_string());
        self.stone.validate().map_err(err)?;
        self.map.validate().map_err(err)?;
        self.scan_config().validate().map_err(err)?;
        let a = &self.analysis;
        let checks = [
            (a.n_iter > 0, "analysis.n_iter must be positive"),
            (a.zero_tol >= 0.0, "analysis.zero_tol must be non-negative"),
            (
                a.escape_radius > 0.0,
                "analysis.escape_radius must be positive",
            ),
            (a.rho > 0.0, "analysis.rho must be positive"),
            (a.newton.tol > 0.0, "analysis.newton.tol must be positive"),
            (
                a.newton.max_iter > 0,
                "analysis.newton.max_iter must be positive",
            ),
            (
                a.manifold.eps0 > 0.0,
                "analysis.manifold.eps0 must be positive",
            ),
            (
                a.manifold.spacing_max > 0.0,
                "analysis.manifold.spacing_max must be positive",
            ),
            (
                a.manifold.n_points >= 2,
                "analysis.manifold.n_points must be at least 2",
            ),
            (
                a.follow_from.is_none_or(f64::is_finite),
                "analysis.follow_from must be finite",
            ),
            (self.jitter >= 0.0, "jitter must be non-negative"),
            (self.t_end.is_finite(), "t_end must be finite"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(ConfigError(msg.into()));
            }
        }
        Ok(())
    }

    pub fn scan_config(&self) -> ScanConfig {
        let w = &self.scan;
        ScanConfig {
            e_min: w.e_min,
            e_max: w.e_max,
            e_step: w.e_step,
            seed: self.seed,
            newton: self.analysis.newton,
            spectra: w.spectra,
            n_transient: self.analysis.n_transient,
            n_iter: self.analysis.n_iter,
            zero_tol: self.analysis.zero_tol,
            escape_radius: self.analysis.escape_radius,
            track_cycle: w.track_cycle,
            bisect_tol: w.bisect_tol,
            workers: w.workers,
            ..ScanConfig::default()
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}
