use thiserror::Error;

/// Failures raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot estimate the growth order of the exponent from the probes ({0})")]
    IndeterminateTail(String),

    #[error("model has no increment sampler")]
    NoSampler,

    #[error("quadrature did not reach tolerance: estimate {estimate}, error {error:e}, target {target:e}")]
    QuadratureDivergence {
        estimate: f64,
        error: f64,
        target: f64,
    },

    #[error("integrand is not integrable at the origin (local exponent {exponent:.3})")]
    SingularOrigin { exponent: f64 },

    #[error("linear system is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("hitting probability {value:e} at index {index} is negative beyond the clamp band")]
    NegativeProbability { index: usize, value: f64 },

    #[error("{count} of {total} paths were not absorbed before the horizon {horizon}")]
    NonAbsorbed {
        count: usize,
        total: usize,
        horizon: f64,
    },

    #[error("lattice series does not converge (fitted decay exponent {exponent:.3})")]
    TailNotConvergent { exponent: f64 },

    #[error("harmonic function vanishes at the starting point ({value:e})")]
    ZeroDenominator { value: f64 },

    #[error("grid too coarse: last two trajectory values differ by {relative_change:.3}")]
    GridTooCoarse { relative_change: f64 },
}

impl Error {
    /// True for failures of the numerics (quadrature, solver, series), as
    /// opposed to rejected inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IndeterminateTail(_)
                | Error::QuadratureDivergence { .. }
                | Error::SingularOrigin { .. }
                | Error::IllConditioned { .. }
                | Error::NegativeProbability { .. }
                | Error::NonAbsorbed { .. }
                | Error::TailNotConvergent { .. }
                | Error::GridTooCoarse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
