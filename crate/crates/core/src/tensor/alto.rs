use std::time::{Duration, Instant};

use rayon::slice::ParallelSliceMut;

use super::CooTensor;
use crate::{AltoLayout, Error, PositionWidth, PositionWord, Result, Scalar, TensorShape};

/// Nonzeros ordered by their line position under an [`AltoLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct AltoTensor<T, P = u64> {
    layout: AltoLayout,
    positions: Vec<P>,
    values: Vec<T>,
}

/// Wall time of the two construction stages.
#[derive(Clone, Copy, Debug, Default)]
pub struct GenerationTiming {
    pub linearize: Duration,
    pub sort: Duration,
}

impl<T: Scalar, P: PositionWord> AltoTensor<T, P> {
    pub fn from_coo(coo: &CooTensor<T>) -> Result<Self> {
        Self::from_coo_timed(coo).map(|(t, _)| t)
    }

    /// Linearizes every nonzero, then sorts by position. Entries that collide
    /// (a non-canonical input) are summed.
    pub fn from_coo_timed(coo: &CooTensor<T>) -> Result<(Self, GenerationTiming)> {
        let layout = AltoLayout::new(coo.shape().clone())?;
        Self::check_width(&layout)?;

        let start = Instant::now();
        let mut pairs: Vec<(P, T)> =
            coo.entries().map(|(c, v)| (layout.linearize_unchecked::<P>(c), v)).collect();
        let linearize = start.elapsed();

        let start = Instant::now();
        pairs.par_sort_unstable_by_key(|&(p, _)| p);
        let sort = start.elapsed();

        let mut positions: Vec<P> = Vec::with_capacity(pairs.len());
        let mut values: Vec<T> = Vec::with_capacity(pairs.len());
        for (p, v) in pairs {
            if positions.last() == Some(&p) {
                *values.last_mut().expect("parallel arrays") += v;
            } else {
                positions.push(p);
                values.push(v);
            }
        }
        Ok((Self { layout, positions, values }, GenerationTiming { linearize, sort }))
    }

    /// Assembles a tensor from already-linearized parts, checking every invariant.
    pub fn from_parts(layout: AltoLayout, positions: Vec<P>, values: Vec<T>) -> Result<Self> {
        Self::check_width(&layout)?;
        if positions.len() != values.len() {
            return Err(Error::mismatch(format!(
                "{} positions but {} values",
                positions.len(),
                values.len()
            )));
        }
        if let Some(w) = positions.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::format(format!("positions not strictly increasing at entry {}", w + 1)));
        }
        let mut coords = vec![0; layout.order()];
        let limit = layout.total_bits();
        for &p in &positions {
            if limit < P::WIDTH.bits() && p >> limit as usize != P::zero() {
                return Err(Error::format(format!("position {p:?} exceeds {limit} index bits")));
            }
            layout.delinearize(p, &mut coords);
            layout.shape().contains(&coords)?;
        }
        Ok(Self { layout, positions, values })
    }

    fn check_width(layout: &AltoLayout) -> Result<()> {
        if layout.total_bits() > P::WIDTH.bits() {
            return Err(Error::InvalidArgument(format!(
                "{} index bits do not fit {}-bit positions",
                layout.total_bits(),
                P::WIDTH.bits()
            )));
        }
        Ok(())
    }

    pub fn to_coo(&self) -> CooTensor<T> {
        let n = self.order();
        let mut coords = vec![0; self.nnz() * n];
        for (p, c) in self.positions.iter().zip(coords.chunks_exact_mut(n)) {
            self.layout.delinearize(*p, c);
        }
        CooTensor::new(self.shape().clone(), coords, self.values.clone())
            .expect("decoded coordinates are in range")
    }

    pub fn layout(&self) -> &AltoLayout {
        &self.layout
    }

    pub fn shape(&self) -> &TensorShape {
        self.layout.shape()
    }

    pub fn order(&self) -> usize {
        self.layout.order()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn positions(&self) -> &[P] {
        &self.positions
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Decodes the coordinates of nonzero `x` into `out`.
    #[inline]
    pub fn coords(&self, x: usize, out: &mut [usize]) {
        self.layout.delinearize(self.positions[x], out);
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }
}

/// Builds the linearized tensor using 64-bit positions.
pub fn alto_from_coo<T: Scalar>(coo: &CooTensor<T>) -> Result<AltoTensor<T, u64>> {
    AltoTensor::from_coo(coo)
}

pub fn alto_to_coo<T: Scalar, P: PositionWord>(alto: &AltoTensor<T, P>) -> CooTensor<T> {
    alto.to_coo()
}

/// Linearized tensor with the position width its shape requires.
#[derive(Clone, Debug, PartialEq)]
pub enum DynAltoTensor<T> {
    Narrow(AltoTensor<T, u64>),
    Wide(AltoTensor<T, u128>),
}

impl<T: Scalar> DynAltoTensor<T> {
    pub fn from_coo(coo: &CooTensor<T>) -> Result<Self> {
        Self::from_coo_timed(coo).map(|(t, _)| t)
    }

    pub fn from_coo_timed(coo: &CooTensor<T>) -> Result<(Self, GenerationTiming)> {
        match PositionWidth::for_bits(coo.shape().total_bits())? {
            PositionWidth::W64 => AltoTensor::from_coo_timed(coo).map(|(t, g)| (Self::Narrow(t), g)),
            PositionWidth::W128 => AltoTensor::from_coo_timed(coo).map(|(t, g)| (Self::Wide(t), g)),
        }
    }

    pub fn to_coo(&self) -> CooTensor<T> {
        match self {
            Self::Narrow(t) => t.to_coo(),
            Self::Wide(t) => t.to_coo(),
        }
    }

    pub fn layout(&self) -> &AltoLayout {
        match self {
            Self::Narrow(t) => t.layout(),
            Self::Wide(t) => t.layout(),
        }
    }

    pub fn shape(&self) -> &TensorShape {
        self.layout().shape()
    }

    pub fn nnz(&self) -> usize {
        match self {
            Self::Narrow(t) => t.nnz(),
            Self::Wide(t) => t.nnz(),
        }
    }

    pub fn width(&self) -> PositionWidth {
        match self {
            Self::Narrow(_) => PositionWidth::W64,
            Self::Wide(_) => PositionWidth::W128,
        }
    }
}
