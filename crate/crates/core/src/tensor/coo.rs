use crate::{Error, Result, Scalar, TensorShape};

/// Coordinate-list sparse tensor with zero-based coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CooTensor<T> {
    shape: TensorShape,
    /// Row-major `nnz x order` coordinates.
    coords: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CooTensor<T> {
    /// Validates coordinate ranges; does not merge duplicates.
    pub fn new(shape: TensorShape, coords: Vec<usize>, values: Vec<T>) -> Result<Self> {
        let order = shape.order();
        if coords.len() != values.len() * order {
            return Err(Error::mismatch(format!(
                "{} coordinates for {} values of an order-{order} tensor",
                coords.len(),
                values.len()
            )));
        }
        for c in coords.chunks_exact(order) {
            shape.contains(c)?;
        }
        Ok(Self { shape, coords, values })
    }

    pub fn from_entries<I, C>(shape: TensorShape, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (C, T)>,
        C: AsRef<[usize]>,
    {
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for (c, v) in entries {
            coords.extend_from_slice(c.as_ref());
            values.push(v);
        }
        Self::new(shape, coords, values)
    }

    /// Sorts entries lexicographically, sums duplicates and drops exact zeros.
    pub fn canonicalize(self) -> Self {
        let order = self.shape.order();
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_unstable_by(|&a, &b| {
            self.coords[a * order..(a + 1) * order].cmp(&self.coords[b * order..(b + 1) * order])
        });
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut values: Vec<T> = Vec::with_capacity(self.values.len());
        let mut last: Option<usize> = None;
        for &i in &idx {
            let c = &self.coords[i * order..(i + 1) * order];
            match last {
                Some(prev) if &coords[prev * order..(prev + 1) * order] == c => {
                    values[prev] += self.values[i];
                }
                _ => {
                    coords.extend_from_slice(c);
                    values.push(self.values[i]);
                    last = Some(values.len() - 1);
                }
            }
        }
        let mut out = Self { shape: self.shape, coords: Vec::new(), values: Vec::new() };
        for (c, &v) in coords.chunks_exact(order).zip(&values) {
            if v != T::zero() {
                out.coords.extend_from_slice(c);
                out.values.push(v);
            }
        }
        out
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn coords(&self, entry: usize) -> &[usize] {
        let n = self.order();
        &self.coords[entry * n..(entry + 1) * n]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[usize], T)> + '_ {
        self.coords.chunks_exact(self.order()).zip(self.values.iter().copied())
    }

    /// Entries in lexicographic coordinate order, for set comparisons.
    pub fn sorted_entries(&self) -> Vec<(Vec<usize>, T)> {
        let mut v: Vec<(Vec<usize>, T)> = self.entries().map(|(c, v)| (c.to_vec(), v)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }

    /// Replaces the shape, e.g. with an explicit one wider than the inferred extent.
    pub fn with_shape(self, shape: TensorShape) -> Result<Self> {
        Self::new(shape, self.coords, self.values)
    }
}
