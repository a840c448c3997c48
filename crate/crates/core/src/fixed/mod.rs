//! Constant-precision number system.
//!
//! Every persisted quantity is a [`FixedScalar`]: a numerator `k` over `2^s`
//! with `|k| ≤ 2^{2s} − 1`. Scalar arithmetic rounds once per operation to
//! the nearest grid point (ties toward the smaller magnitude) and saturates.
//! The designated reductions (RMS, QK dot products, softmax denominators)
//! accumulate exactly in [`Exact`] and round only their output.

mod certified;
mod ops;
mod scalar;
mod vector;

pub use certified::{exp_s, sigmoid_s, INITIAL_WORKING_BITS, MAX_WORKING_BITS};
pub use ops::{
    dot_acc, dot_strict, l2norm_s, rmsnorm_s, round_rational, round_sqrt_quotient, score_s,
    softmax_s, sum_acc, sum_strict, Exact,
};
pub use scalar::{FixedScalar, Precision};
pub use vector::{FixedMatrix, FixedVector};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixedError {
    #[error("precision s={0} is outside the supported range 2..=16")]
    UnsupportedPrecision(u32),
    #[error("numerator {raw} is outside the s={s} grid")]
    OutOfRange { raw: i64, s: u32 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("empty input to {0}")]
    EmptyInput(&'static str),
    #[error("rounding of {op}({input}) is not certified within the working-precision cap")]
    AmbiguousRounding { op: &'static str, input: String },
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("accumulator overflow")]
    AccumulatorOverflow,
}
