//! Spectra of the two-mode and k-photon Rabi models from three-term
//! recurrences in the Bargmann representation.
//!
//! * [`model`]: parameters, invariant-subspace labels, regime classification.
//! * [`recurrence`]: coefficient sequences (forward, minimal, polynomial).
//! * [`contfrac`]: continued fractions and the spectral function F(E).
//! * [`spectrum`]: root bracketing, refinement and Pincherle confirmation.
//! * [`oracle`]: truncated Fock-basis matrices and eigensolvers.
//! * [`bargmann`]: norm series, ratio tests, divergence diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bargmann;
pub mod contfrac;
pub mod error;
pub mod model;
pub mod oracle;
pub mod recurrence;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::{
    BlockLabel, Family, ModelParams, Parity, RegimeClass, RegimeVerdict, SectorLabel,
};
