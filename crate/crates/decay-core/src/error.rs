use thiserror::Error;

/// Errors produced by the numerical routines and the CLI front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature tolerance not reached at t = {t}: achieved {achieved:.3e}, requested {requested:.3e}")]
    ToleranceNotReached { t: f64, achieved: f64, requested: f64 },

    #[error("derivative diverges at t = 0: density has no finite first moment")]
    DivergentFirstMoment,

    #[error("|a(t)| = {amplitude:.3e} is below twice its error estimate {error:.3e} at t = {t}")]
    DivisionHazard { t: f64, amplitude: f64, error: f64 },

    #[error("no crossing of |a_exp| and |a_non| inside the bracket ({lo:.6e}, {hi:.6e})")]
    NoCrossing { lo: f64, hi: f64 },

    #[error("ill-conditioned fit: condition estimate {0:.3e} exceeds 1e8")]
    IllConditionedFit(f64),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("sigma evaluated at eps = {0} colliding with a reservoir eigenvalue at eta = 0")]
    SigmaSingularity(f64),

    #[error("amplitude matrix singular at t = {t} (condition estimate {cond:.3e})")]
    SingularAmplitude { t: f64, cond: f64 },

    #[error("degenerate two-level spectrum (kappa = 0); use v_parallel_inf instead")]
    DegenerateTwoLevel,

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
