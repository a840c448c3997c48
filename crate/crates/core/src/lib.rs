//! Bit-exact simulation of constant-precision hybrid decoders built from
//! Gated Attention and Gated DeltaNet layers.

pub mod fixed;
pub mod nn;
pub mod codes;
pub mod pcr;
pub mod construct;
pub mod analysis;
