//! Linearized sparse tensor toolkit.
//!
//! Nonzeros of an order-N sparse tensor are stored as a single bit-interleaved
//! line position plus a value ([`AltoTensor`]). The line is split into
//! equal-count segments ([`partition`]) that drive the parallel MTTKRP and
//! CP-APR model-update kernels ([`kernels`]), which pick between a buffered
//! linear-order traversal and an output-ordered traversal depending on fiber
//! reuse. [`cpd`] builds CP-ALS and CP-APR (multiplicative update) on top.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiations.

pub mod cpd;
pub mod encoding;
mod error;
pub mod kernels;
pub mod partition;
mod scalar;
pub mod tensor;
#[cfg(test)]
mod test_util;

pub use encoding::{AltoLayout, PositionWidth, PositionWord, TensorShape};
pub use error::{Error, Result};
pub use kernels::{FactorMatrix, Strategy, Workers};
pub use partition::{ModeOrderedView, Segment, SegmentSet};
pub use scalar::Scalar;
pub use tensor::{AltoTensor, CooTensor, DynAltoTensor, TensorStats};

/// Compression ratios and other exact quantities.
pub type Rational = num_rational::Ratio<u64>;

pub type CooTensorF64 = CooTensor<f64>;
pub type AltoTensorF64 = AltoTensor<f64, u64>;
pub type WideAltoTensorF64 = AltoTensor<f64, u128>;
pub type DynAltoTensorF64 = DynAltoTensor<f64>;
pub type FactorMatrixF64 = FactorMatrix<f64>;
pub type KruskalModelF64 = cpd::KruskalModel<f64>;


pub type CooTensorF32 = CooTensor<f32>;
pub type AltoTensorF32 = AltoTensor<f32, u64>;
pub type FactorMatrixF32 = FactorMatrix<f32>;
pub type KruskalModelF32 = cpd::KruskalModel<f32>;

