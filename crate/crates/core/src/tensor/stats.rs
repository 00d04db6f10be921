use serde::Serialize;

use crate::encoding::{alto_metadata_bits, coo_compression_ratio, sfc_metadata_bits};
use crate::{Rational, TensorShape};

/// Average nonzeros per output row of a mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReuseClass {
    Limited,
    Medium,
    High,
}

impl ReuseClass {
    /// Limited below 5, medium from 5 to 8 inclusive, high above 8.
    pub fn of(reuse: f64) -> Self {
        if reuse < 5.0 {
            Self::Limited
        } else if reuse <= 8.0 {
            Self::Medium
        } else {
            Self::High
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TensorStats {
    pub dims: Vec<usize>,
    pub nnz: u64,
    pub density: f64,
    pub fiber_reuse: Vec<f64>,
    pub reuse_class: Vec<ReuseClass>,
    /// Class of the mode with the least reuse.
    pub overall_class: ReuseClass,
    pub word_bits: u32,
    pub alto_bits_per_nnz: u32,
    pub sfc_bits_per_nnz: u32,
    /// Per-mode indices, each padded to whole words.
    pub s_coo_bits: u128,
    pub s_alto_bits: u128,
    pub s_sfc_bits: u128,
    #[serde(serialize_with = "ratio_as_f64")]
    pub compression_ratio: Rational,
}

fn ratio_as_f64<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(*r.numer() as f64 / *r.denom() as f64)
}

impl TensorStats {
    pub fn mode_reuse(&self, mode: usize) -> f64 {
        self.fiber_reuse[mode]
    }

    pub fn min_reuse(&self) -> f64 {
        self.fiber_reuse.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Density, per-mode fiber reuse and storage sizes of a tensor with `nnz`
/// nonzeros, for indices stored in words of `word_bits` bits.
pub fn compute_stats(shape: &TensorShape, nnz: u64, word_bits: u32) -> TensorStats {
    let m = nnz as f64;
    let fiber_reuse: Vec<f64> = shape.dims().iter().map(|&d| m / d as f64).collect();
    let reuse_class: Vec<ReuseClass> = fiber_reuse.iter().map(|&r| ReuseClass::of(r)).collect();
    let min_reuse = fiber_reuse.iter().copied().fold(f64::INFINITY, f64::min);

    let coo_words: u128 = (0..shape.order())
        .map(|n| shape.mode_bits(n).div_ceil(word_bits) as u128)
        .sum();
    let alto_bits = alto_metadata_bits(shape);
    let sfc_bits = sfc_metadata_bits(shape);
    TensorStats {
        dims: shape.dims().to_vec(),
        nnz,
        density: m / shape.cells(),
        fiber_reuse,
        reuse_class,
        overall_class: ReuseClass::of(min_reuse),
        word_bits,
        alto_bits_per_nnz: alto_bits,
        sfc_bits_per_nnz: sfc_bits,
        s_coo_bits: nnz as u128 * coo_words * word_bits as u128,
        s_alto_bits: nnz as u128 * alto_bits as u128,
        s_sfc_bits: nnz as u128 * sfc_bits as u128,
        compression_ratio: coo_compression_ratio(shape, word_bits),
    }
}
