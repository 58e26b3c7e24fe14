use thiserror::Error;

use crate::corr::CorrError;
use crate::efa::EfaError;
use crate::findex::FindexError;
use crate::ingest::IngestError;
use crate::regress::RegressError;
use crate::rotate::RotateError;
use crate::scores::ScoresError;
use crate::synth::SynthError;

/// Any failure raised by the pipeline, qualified by the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("findex: {0}")]
    Findex(#[from] FindexError),
    #[error("corr: {0}")]
    Corr(#[from] CorrError),
    #[error("efa: {0}")]
    Efa(#[from] EfaError),
    #[error("rotate: {0}")]
    Rotate(#[from] RotateError),
    #[error("scores: {0}")]
    Scores(#[from] ScoresError),
    #[error("regress: {0}")]
    Regress(#[from] RegressError),
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
}

impl Error {
    /// True when the failure stems from invalid user input (files, flags,
    /// schemas) rather than from a numerical or I/O problem at run time.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Ingest(e) => !matches!(e, IngestError::Io { .. }),
            Error::Synth(SynthError::Spec(_)) => true,
            Error::Regress(RegressError::InsufficientData { .. }) => true,
            _ => false,
        }
    }
}
