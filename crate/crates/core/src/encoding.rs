//! Adaptive bit-interleaved linearization of tensor coordinates.
//!
//! A layout assigns every index bit of every mode to one bit of a line
//! position. Bits are laid out in groups from the least-significant end:
//! group `g` holds bit `g` of each mode that still has bits left, ordered
//! shortest mode first. The most significant line bits therefore split the
//! longest modes, and every prefix of the line spans a box whose sides are
//! powers of two.

use std::fmt::Debug;
use std::hash::Hash;

use num_traits::{PrimInt, Unsigned};
use serde::Serialize;

use crate::{Error, Rational, Result};

/// Number of index bits needed for a mode of length `len`, i.e. `ceil(log2(len))`.
pub fn ceil_log2(len: usize) -> u32 {
    if len <= 1 {
        0
    } else {
        usize::BITS - (len - 1).leading_zeros()
    }
}

/// Mode lengths of an order-N tensor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct TensorShape {
    dims: Vec<usize>,
}

impl TensorShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("a tensor needs at least one mode".into()));
        }
        if let Some(n) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidShape(format!("mode {n} has length 0")));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn mode_bits(&self, mode: usize) -> u32 {
        ceil_log2(self.dims[mode])
    }

    pub fn total_bits(&self) -> u32 {
        (0..self.order()).map(|n| self.mode_bits(n)).sum()
    }

    /// Number of cells of the dense tensor, as a float (may exceed any integer type).
    pub fn cells(&self) -> f64 {
        self.dims.iter().map(|&d| d as f64).product()
    }

    pub fn contains(&self, coords: &[usize]) -> Result<()> {
        if coords.len() != self.order() {
            return Err(Error::mismatch(format!(
                "expected {} coordinates, got {}",
                self.order(),
                coords.len()
            )));
        }
        for (mode, (&index, &len)) in coords.iter().zip(&self.dims).enumerate() {
            if index >= len {
                return Err(Error::OutOfBounds { mode, index, len });
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for TensorShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

/// Storage width of a line position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum PositionWidth {
    W64,
    W128,
}

impl PositionWidth {
    pub fn for_bits(total_bits: u32) -> Result<Self> {
        match total_bits {
            0..=64 => Ok(Self::W64),
            65..=128 => Ok(Self::W128),
            bits => Err(Error::UnsupportedShape { bits }),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            Self::W64 => 64,
            Self::W128 => 128,
        }
    }

    pub fn bytes(self) -> usize {
        self.bits() as usize / 8
    }
}

/// Unsigned integer word holding a line position.
pub trait PositionWord: PrimInt + Unsigned + Hash + Debug + Default + Send + Sync + 'static {
    const WIDTH: PositionWidth;

    fn from_u128(v: u128) -> Self;
    fn to_u128(self) -> u128;
    fn write_le(self, out: &mut Vec<u8>);
    /// Reads `WIDTH.bytes()` little-endian bytes.
    fn read_le(bytes: &[u8]) -> Self;
}

impl PositionWord for u64 {
    const WIDTH: PositionWidth = PositionWidth::W64;

    #[inline(always)]
    fn from_u128(v: u128) -> Self {
        v as u64
    }
    #[inline(always)]
    fn to_u128(self) -> u128 {
        self as u128
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
    }
}

impl PositionWord for u128 {
    const WIDTH: PositionWidth = PositionWidth::W128;

    #[inline(always)]
    fn from_u128(v: u128) -> Self {
        v
    }
    #[inline(always)]
    fn to_u128(self) -> u128 {
        self
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        u128::from_le_bytes(bytes[..16].try_into().expect("16 bytes"))
    }
}

/// One line bit: bit `rank` of mode `mode`'s index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ModeBit {
    pub mode: usize,
    pub rank: u32,
}

/// Maximal run of line bits that map to consecutive index bits of one mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct BitRun {
    line_shift: u32,
    coord_shift: u32,
    mask: u128,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AltoLayout {
    shape: TensorShape,
    /// Line bit `i` (LSB first) holds `schedule[i]`.
    schedule: Vec<ModeBit>,
    masks: Vec<u128>,
    runs: Vec<Vec<BitRun>>,
    width: PositionWidth,
}

impl AltoLayout {
    /// Builds the adaptive layout for `shape`.
    pub fn new(shape: TensorShape) -> Result<Self> {
        let width = PositionWidth::for_bits(shape.total_bits())?;
        let order = shape.order();
        let mut by_length: Vec<usize> = (0..order).collect();
        by_length.sort_by_key(|&n| (shape.dims()[n], n));

        let max_bits = (0..order).map(|n| shape.mode_bits(n)).max().unwrap_or(0);
        let mut modes = Vec::with_capacity(shape.total_bits() as usize);
        for group in 0..max_bits {
            modes.extend(by_length.iter().copied().filter(|&n| shape.mode_bits(n) > group));
        }
        debug_assert_eq!(modes.len() as u32, shape.total_bits());
        Self::assemble(shape, &modes, width)
    }

    /// Rebuilds a layout from an explicit LSB-first list of mode ids, one per
    /// line bit. Mode-local bit ranks are implied by order of appearance.
    pub fn from_schedule(shape: TensorShape, modes: &[usize]) -> Result<Self> {
        let width = PositionWidth::for_bits(shape.total_bits())?;
        let mut counts = vec![0u32; shape.order()];
        for &m in modes {
            if m >= shape.order() {
                return Err(Error::format(format!("schedule names mode {m} of an order-{} tensor", shape.order())));
            }
            counts[m] += 1;
        }
        for (n, &c) in counts.iter().enumerate() {
            if c != shape.mode_bits(n) {
                return Err(Error::format(format!(
                    "schedule gives mode {n} {c} bits, its length needs {}",
                    shape.mode_bits(n)
                )));
            }
        }
        Self::assemble(shape, modes, width)
    }

    fn assemble(shape: TensorShape, modes: &[usize], width: PositionWidth) -> Result<Self> {
        let order = shape.order();
        let mut next_rank = vec![0u32; order];
        let mut schedule = Vec::with_capacity(modes.len());
        let mut masks = vec![0u128; order];
        let mut runs: Vec<Vec<BitRun>> = vec![Vec::new(); order];
        for (line_bit, &mode) in modes.iter().enumerate() {
            let line_bit = line_bit as u32;
            let rank = next_rank[mode];
            next_rank[mode] += 1;
            schedule.push(ModeBit { mode, rank });
            masks[mode] |= 1u128 << line_bit;

            let mode_runs = &mut runs[mode];
            match mode_runs.last_mut() {
                Some(run) if {
                    let len = run.mask.count_ones();
                    run.line_shift + len == line_bit && run.coord_shift + len == rank
                } =>
                {
                    run.mask = (run.mask << 1) | 1;
                }
                _ => mode_runs.push(BitRun { line_shift: line_bit, coord_shift: rank, mask: 1 }),
            }
        }
        Ok(Self { shape, schedule, masks, runs, width })
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    /// LSB-first line bit assignment.
    pub fn schedule(&self) -> &[ModeBit] {
        &self.schedule
    }

    /// Mode ids of the line bits from most to least significant.
    pub fn schedule_msb_first(&self) -> Vec<usize> {
        self.schedule.iter().rev().map(|b| b.mode).collect()
    }

    /// Line bits owned by `mode`.
    pub fn mask(&self, mode: usize) -> u128 {
        self.masks[mode]
    }

    pub fn masks(&self) -> &[u128] {
        &self.masks
    }

    pub fn total_bits(&self) -> u32 {
        self.schedule.len() as u32
    }

    pub fn width(&self) -> PositionWidth {
        self.width
    }

    /// Bit-level gather of `coords` into a line position.
    pub fn linearize<P: PositionWord>(&self, coords: &[usize]) -> Result<P> {
        self.shape.contains(coords)?;
        if self.total_bits() > P::WIDTH.bits() {
            return Err(Error::InvalidArgument(format!(
                "{} index bits do not fit a {}-bit position",
                self.total_bits(),
                P::WIDTH.bits()
            )));
        }
        Ok(self.linearize_unchecked(coords))
    }

    /// As [`linearize`](Self::linearize) without bounds or width checks.
    #[inline]
    pub fn linearize_unchecked<P: PositionWord>(&self, coords: &[usize]) -> P {
        let mut pos = P::zero();
        for (runs, &c) in self.runs.iter().zip(coords) {
            let c = c as u128;
            for run in runs {
                pos = pos | P::from_u128(((c >> run.coord_shift) & run.mask) << run.line_shift);
            }
        }
        pos
    }

    /// Bit-level scatter of a line position into `out` (one entry per mode).
    #[inline]
    pub fn delinearize<P: PositionWord>(&self, pos: P, out: &mut [usize]) {
        for (runs, slot) in self.runs.iter().zip(out.iter_mut()) {
            *slot = Self::gather(runs, pos);
        }
    }

    pub fn delinearize_vec<P: PositionWord>(&self, pos: P) -> Vec<usize> {
        let mut out = vec![0; self.order()];
        self.delinearize(pos, &mut out);
        out
    }

    /// Index of `mode` only.
    #[inline]
    pub fn extract<P: PositionWord>(&self, pos: P, mode: usize) -> usize {
        Self::gather(&self.runs[mode], pos)
    }

    #[inline(always)]
    fn gather<P: PositionWord>(runs: &[BitRun], pos: P) -> usize {
        let mut c = 0usize;
        for run in runs {
            let bits = (pos >> run.line_shift as usize) & P::from_u128(run.mask);
            c |= (bits.to_u128() as usize) << run.coord_shift;
        }
        c
    }
}

/// Builds the adaptive layout for `shape`.
pub fn build_layout(shape: &TensorShape) -> Result<AltoLayout> {
    AltoLayout::new(shape.clone())
}

/// Index bits per nonzero of the linearized format (multiply by nnz for the total).
pub fn alto_metadata_bits(shape: &TensorShape) -> u32 {
    shape.total_bits()
}

/// Metadata size ratio of per-mode word-aligned coordinates over a single
/// word-aligned line position, for words of `word_bits` bits.
///
/// Panics if `word_bits` is zero.
pub fn coo_compression_ratio(shape: &TensorShape, word_bits: u32) -> Rational {
    assert!(word_bits > 0, "word size must be positive");
    let coo_words: u64 = (0..shape.order())
        .map(|n| shape.mode_bits(n).div_ceil(word_bits) as u64)
        .sum();
    let alto_words = shape.total_bits().div_ceil(word_bits) as u64;
    if alto_words == 0 {
        return Rational::from_integer(1);
    }
    Rational::new(coo_words, alto_words)
}

/// Per-nonzero index bits of a Z-Morton style encoding: every mode padded to the longest.
pub fn sfc_metadata_bits(shape: &TensorShape) -> u32 {
    let widest = (0..shape.order()).map(|n| shape.mode_bits(n)).max().unwrap_or(0);
    shape.order() as u32 * widest
}
