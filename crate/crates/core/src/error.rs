use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The input document is structurally invalid (unsorted breakpoints,
    /// negative densities, bad measure parameters, unknown keys).
    #[error("malformed environment: {0}")]
    MalformedSpec(String),

    #[error("time {t} is outside the horizon [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("integral of {kernel} against {measure} diverges")]
    DivergentIntegral {
        kernel: &'static str,
        measure: &'static str,
    },

    #[error("linear coefficient has a jump of {jump} <= -1 at t = {time}")]
    JumpAtMinusOne { time: f64, jump: f64 },

    #[error("first moments of the jump measure are infinite on [0, {horizon}]")]
    FirstMomentInfinite { horizon: f64 },

    #[error("large-jump mass m((0,t] x (1,inf)) is infinite")]
    InfiniteLargeJumpMass,

    #[error("parameters are not admissible: bottlenecks at {bottlenecks:?}")]
    NotAdmissible { bottlenecks: Vec<f64> },

    #[error("parameters are not weakly admissible: {0}")]
    WeaklyMalformed(String),

    #[error("solver tolerance not met: {0}")]
    ToleranceNotMet(String),

    #[error("lambda ladder did not converge below cap; limit lies in [{lower}, {upper}]")]
    NoConvergenceBelowCap { lower: f64, upper: f64 },

    #[error("argument {arg} outside solved lambda range [{lo}, {hi}]")]
    ArgumentOutOfSolvedRange { arg: f64, lo: f64, hi: f64 },

    #[error("coupled paths lost their ordering on path {path} at t = {time}")]
    ComparisonViolated { path: usize, time: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input files or arguments rather than
    /// by the model.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::MalformedSpec(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::InvalidArgument(_)
                | Error::OutOfHorizon { .. }
        )
    }
}
