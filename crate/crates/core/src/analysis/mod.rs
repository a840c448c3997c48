//! Harnesses: exhaustive correctness, the recurrent-state census of pure
//! GDN decoders, the pure-GA parity probe and model-dimension scaling.

mod census;
mod scaling;
mod verify;

pub use census::{
    confirm_witness, state_census, CensusReport, CollisionClass, Witness, WitnessCheck,
    MAX_CENSUS_N,
};
pub use scaling::{dimension_scaling, ScalingPoint, ScalingReport, FIT_TOLERANCE};
pub use verify::{
    attention_audit, attention_selection, exhaustive_verify, ga_parity_probe, AttentionAudit,
    Failure, Observed, VerificationReport,
};

use thiserror::Error;

use crate::construct::ConstructError;
use crate::nn::NnError;
use crate::pcr::PcrError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Pcr(#[from] PcrError),
    #[error("decoder context {max} is shorter than the required {needed}")]
    ContextTooShort { needed: usize, max: usize },
    #[error("the census needs a pure GDN decoder")]
    NotPureGdn,
    #[error("the parity probe needs a pure GA decoder")]
    NotPureGa,
    #[error("table size {0} is outside the enumerable range")]
    TableSize(usize),
    #[error("{0}")]
    Unsupported(String),
}
