use thiserror::Error;

/// Errors raised by the stone model, its coordinate charts and the map machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate contact: gamma3 = {gamma3:e} is not above the admissibility threshold")]
    DegenerateContact { gamma3: f64 },

    #[error("singular Andoyer-Deprit chart: L/G = {eta}, H/G = {xi}")]
    SingularChart { eta: f64, xi: f64 },

    #[error("angular momentum magnitude {norm:e} is below the floor")]
    ZeroMomentum { norm: f64 },

    #[error("energy {energy} does not exceed the potential {potential} of the section point")]
    EnergyBelowPotential { energy: f64, potential: f64 },

    #[error("integration exceeded {max_steps} steps")]
    StepCountExceeded { max_steps: usize },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("no section crossing found within {steps} steps")]
    NoCrossingFound { steps: usize },

    #[error(
        "Newton iteration failed to converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Newton matrix is singular")]
    SingularNewtonMatrix,

    #[error("orbit escaped the domain at iteration {iteration}")]
    OrbitEscaped { iteration: usize },

    #[error("periodic point is not a saddle with one real unstable multiplier")]
    NotASaddle,

    #[error("unstable branch never returned to the saddle neighbourhood")]
    NoReturn,
}

pub type Result<T> = std::result::Result<T, Error>;
