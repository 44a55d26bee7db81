//! Numerical runtime: matrix functions, Brownian paths with iterated
//! integrals, and the explicit ν-stage exponential integrator.

mod matfun;
mod paths;
mod problem;
mod stepper;

use thiserror::Error;

use crate::bseries::MethodError;

pub use matfun::{expm, phi1};
pub use paths::{
    sample_iterated, sample_iterated_grouped, BrownianGrid, BrownianPath, CompiledPoly, WordTable,
    DEFAULT_MAX_WORD_LEN, DEFAULT_N_SUB,
};
pub use problem::{ExactSolution, SDEProblem, VectorField};
pub use stepper::{integrate, CoeffKey, CoefficientEvaluation, Integrator, StepOptions};

#[derive(Debug, Error)]
pub enum NumError {
    #[error("matrix function overflowed")]
    Overflow,
    #[error("singular Padé denominator")]
    Singular,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("word of length {len} exceeds the sampling bound {max}")]
    WordTooLong { len: usize, max: usize },
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error("method uses {method} noises but the problem has {problem}")]
    Noises { method: u32, problem: u32 },
    #[error(transparent)]
    Method(#[from] MethodError),
}
