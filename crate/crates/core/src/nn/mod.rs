//! Gated Attention and Gated DeltaNet blocks, the decoder stack, and greedy
//! decoding under a scratch budget. All arithmetic goes through
//! [`crate::fixed`].

mod decode;
mod decoder;
mod layers;
mod params;

pub use decode::{greedy_decode, Answer, DecodeOutcome, StepRecord, Transcript};
pub use decoder::{
    decoder_forward, forward_from_state, forward_trace, scan_prefix, ForwardTrace, GdnState,
};
pub use layers::{ga_layer_forward, gdn_layer_step, GaLayerOutput};
pub(crate) use layers::gdn_head_update;
pub use params::{
    Activation, DecoderSpec, Embedding, GaHeadParams, GdnHeadParams, LayerKind, LayerSpec,
    MlpParams, Mixer, PairEmbedding, SparseAffine, SparseVec, Vocabulary, DECODER_FORMAT,
    DECODER_FORMAT_VERSION,
};

use thiserror::Error;

use crate::fixed::FixedError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error(transparent)]
    Fixed(#[from] FixedError),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("sequence of length {len} exceeds the context bound {max}")]
    ContextOverflow { len: usize, max: usize },
    #[error("empty token sequence")]
    EmptyPrompt,
    #[error("unknown token {0}")]
    UnknownToken(String),
    #[error("model emitted {0}, which is neither a scratch nor an answer token")]
    NonScratchNonAnswerEmission(String),
    #[error("operation requires a pure GDN decoder")]
    NotPureGdn,
    #[error("operation requires a pure GA decoder")]
    NotPureGa,
    #[error("layer {index} is not a {expected:?} layer")]
    WrongLayerKind { index: usize, expected: LayerKind },
    #[error("invalid decoder spec: {0}")]
    InvalidSpec(String),
    #[error("decoder JSON: {0}")]
    Json(String),
}

impl NnError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        NnError::InvalidSpec(msg.into())
    }
}
