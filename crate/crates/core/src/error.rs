//! Crate-level error type.

use thiserror::Error;

use crate::antichain::BuildError;
use crate::dims::DimsError;
use crate::model::ModelError;
use crate::quantizer::QuantError;
use crate::solver::SolveError;
use crate::words::{AntichainError, WordError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Antichain(#[from] AntichainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Dims(#[from] DimsError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Quant(#[from] QuantError),
}

pub type Result<T> = std::result::Result<T, Error>;
