use alloc::string::String;

pub type Result<T> = core::result::Result<T, CoreError>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("fields live on different grids ({left} vs {right} interior nodes)")]
    GridMismatch { left: usize, right: usize },

    #[error("Lp norm needs p >= 2, got {0}")]
    InvalidExponent(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fast equation is not dissipative: margin 2*lambda1 - 2*L_B2 - L_G2^2 = {margin}")]
    NonDissipative { margin: f64 },

    #[error("implicit solve did not converge: residual {residual:e} after {iterations} iterations")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("non-finite values produced in {0}")]
    NonFinite(&'static str),

    #[error("trajectories or schedules do not match: {0}")]
    ScheduleMismatch(String),

    #[error("block length {delta} is not an integer multiple of the macro step {dt_macro}")]
    Misaligned { delta: f64, dt_macro: f64 },

    #[error("model is not an Ornstein-Uhlenbeck configuration: {0}")]
    NotOuModel(&'static str),

    #[error("log-log fit needs at least 3 points, got {0}")]
    InsufficientPoints(usize),

    #[error("log-log fit needs strictly positive data, got ({x}, {y})")]
    NonpositiveValue { x: f64, y: f64 },

    #[error("malformed noise path: {0}")]
    NoisePathFormat(String),
}
