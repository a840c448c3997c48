//! Explicit weights: the two-dimensional DeltaNet parity cell and the
//! three-layer hybrid decoder for Parity-Conditioned Retrieval.

mod cell;
mod hybrid;

pub use cell::{
    apply_macro_update, build_parity_cell, rounding_identities, CellPorts, MacroKind, MacroUpdate,
    ParityCellParams, RoundingIdentity,
};
pub use hybrid::{
    build_hybrid_decoder, build_hybrid_with_code, build_parity_only_decoder, prompt_ids, token_id,
    vocabulary, EmbeddingLayout, CONTEXT_HEADROOM, SYMBOLS, TOKEN_BLANK, TOKEN_MARK, TOKEN_NO,
    TOKEN_ONE, TOKEN_SCRATCH, TOKEN_YES, TOKEN_ZERO,
};

use thiserror::Error;

use crate::codes::CodeError;
use crate::nn::NnError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstructError {
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("table size must be at least 1")]
    EmptyTable,
    #[error("table size {n} does not match the code's table size {code_n}")]
    CodeMismatch { n: usize, code_n: usize },
}
