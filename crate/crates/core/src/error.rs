use thiserror::Error;

use crate::model::{RegimeVerdict, SectorLabel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coupling g = 0: recurrence coefficients are undefined (use the oracle path)")]
    CouplingZero,

    #[error("sector {sector} does not belong to this model family")]
    BlockMismatch { sector: SectorLabel },

    #[error("no quadratic characteristic equation for k = {k}; use the asymptotic exponents instead")]
    NoCharacteristicEquation { k: u32 },

    #[error("minimal solution unavailable in regime {verdict}")]
    MinimalSolutionUnavailable { verdict: RegimeVerdict },

    #[error("regime {verdict} unsupported: {reason}")]
    RegimeUnsupported {
        verdict: RegimeVerdict,
        reason: &'static str,
    },

    #[error("divergence report requested for a normalizable regime")]
    RegimeMismatch,

    #[error("sign change near E = {energy} is a continued-fraction pole (Pincherle residual {residual:e})")]
    PoleArtifact { energy: f64, residual: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("ratio test needs at least {needed} terms, got {got}")]
    TooFewTerms { needed: usize, got: usize },
}

impl Error {
    /// Regime-related failures, as opposed to bad input or numerical trouble.
    pub fn is_regime(&self) -> bool {
        matches!(
            self,
            Error::NoCharacteristicEquation { .. }
                | Error::MinimalSolutionUnavailable { .. }
                | Error::RegimeUnsupported { .. }
                | Error::RegimeMismatch
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PoleArtifact { .. } | Error::NoConvergence { .. } | Error::TooFewTerms { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
