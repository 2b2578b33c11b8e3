//! The analysis pipeline on top of the return map: attractor clouds, Lyapunov spectra
//! and regime tags, periodic points and their multipliers, unstable manifolds of saddles,
//! and energy scans with bifurcation localisation.

pub mod lyapunov;
pub mod manifold;
pub mod orbit;
pub mod periodic;
pub mod scan;

pub use lyapunov::{classify_regime, lyapunov_spectrum, Classification, LyapunovSpectrum, Regime};
pub use manifold::{
    bisect_separatrix_sign, separatrix_return, separatrix_return_sign, trace_unstable_manifold,
    Branch, HomoclinicBracket, ManifoldConfig, ManifoldPolyline, SeparatrixReturn,
};
pub use orbit::{cloud_diameter, detect_period, iterate_attractor, EscapeGuard};
pub use periodic::{find_periodic_point, NewtonConfig, PeriodicPointResult};
pub use scan::{energy_scan, Bifurcation, BifurcationKind, ScanConfig, ScanRecord, ScanReport};
