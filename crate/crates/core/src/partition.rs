//! Equal-count line segments over a sorted linearized tensor.
//!
//! Every segment carries the per-mode bounding box of its nonzeros. Boxes of
//! different segments may overlap even though the segments themselves are
//! disjoint; overlapping rows are the ones that need a reduction or an atomic
//! update when several workers write the same output.

use rayon::prelude::*;
use serde::Serialize;

use crate::{AltoTensor, Error, PositionWord, Result, Scalar};

/// Closed coordinate range `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ModeInterval {
    pub start: usize,
    pub end: usize,
}

impl ModeInterval {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn width(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start <= end).then(|| Self { start, end })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Segment {
    /// First nonzero index.
    pub start: usize,
    /// One past the last nonzero index.
    pub end: usize,
    pub first_position: u128,
    pub last_position: u128,
    /// Per-mode bounding box of the segment's nonzeros.
    pub intervals: Vec<ModeInterval>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn interval(&self, mode: usize) -> ModeInterval {
        self.intervals[mode]
    }
}

/// Intersection of two segments' intervals along `mode`.
pub fn overlap(a: &Segment, b: &Segment, mode: usize) -> Option<ModeInterval> {
    a.intervals[mode].intersect(&b.intervals[mode])
}

/// Start offsets of `parts` contiguous chunks of `len` items whose sizes differ by at most one.
pub(crate) fn balanced_bounds(len: usize, parts: usize) -> Vec<usize> {
    let base = len / parts;
    let extra = len % parts;
    let mut bounds = Vec::with_capacity(parts + 1);
    let mut at = 0;
    bounds.push(0);
    for l in 0..parts {
        at += base + usize::from(l < extra);
        bounds.push(at);
    }
    bounds
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SegmentSet {
    segments: Vec<Segment>,
    /// Per mode, sorted rows whose nonzeros fall in two or more segments.
    boundary_rows: Vec<Vec<usize>>,
}

impl SegmentSet {
    /// Splits `tensor` into `parts` segments. `parts` larger than the nonzero
    /// count is clamped so that no segment is empty.
    pub fn new<T: Scalar, P: PositionWord>(tensor: &AltoTensor<T, P>, parts: usize) -> Result<Self> {
        if parts == 0 {
            return Err(Error::InvalidArgument("number of segments must be at least 1".into()));
        }
        if tensor.nnz() == 0 {
            return Err(Error::EmptyTensor);
        }
        let parts = parts.min(tensor.nnz());
        let order = tensor.order();
        let bounds = balanced_bounds(tensor.nnz(), parts);

        let segments: Vec<Segment> = bounds
            .par_windows(2)
            .map(|w| {
                let (start, end) = (w[0], w[1]);
                let mut coords = vec![0; order];
                let mut lo = vec![usize::MAX; order];
                let mut hi = vec![0; order];
                for x in start..end {
                    tensor.coords(x, &mut coords);
                    for n in 0..order {
                        lo[n] = lo[n].min(coords[n]);
                        hi[n] = hi[n].max(coords[n]);
                    }
                }
                Segment {
                    start,
                    end,
                    first_position: tensor.positions()[start].to_u128(),
                    last_position: tensor.positions()[end - 1].to_u128(),
                    intervals: lo.into_iter().zip(hi).map(|(s, e)| ModeInterval::new(s, e)).collect(),
                }
            })
            .collect();

        let boundary_rows = (0..order)
            .into_par_iter()
            .map(|mode| {
                let len = tensor.shape().dims()[mode];
                let mut owner = vec![usize::MAX; len];
                let mut shared = vec![false; len];
                for (l, seg) in segments.iter().enumerate() {
                    for x in seg.start..seg.end {
                        let row = tensor.layout().extract(tensor.positions()[x], mode);
                        match owner[row] {
                            usize::MAX => owner[row] = l,
                            o if o != l => shared[row] = true,
                            _ => {}
                        }
                    }
                }
                shared.iter().enumerate().filter(|(_, &s)| s).map(|(r, _)| r).collect()
            })
            .collect();

        Ok(Self { segments, boundary_rows })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn boundary_rows(&self, mode: usize) -> &[usize] {
        &self.boundary_rows[mode]
    }

    pub fn is_boundary(&self, mode: usize, row: usize) -> bool {
        self.boundary_rows[mode].binary_search(&row).is_ok()
    }

    /// Scratch rows needed by buffered accumulation along `mode`.
    pub fn buffer_rows(&self, mode: usize) -> usize {
        self.segments.iter().map(|s| s.intervals[mode].width()).sum()
    }
}

/// Splits `tensor` into `parts` balanced line segments.
pub fn make_segments<T: Scalar, P: PositionWord>(tensor: &AltoTensor<T, P>, parts: usize) -> Result<SegmentSet> {
    SegmentSet::new(tensor, parts)
}

/// Copy of the nonzeros reordered by one mode's index, split into balanced segments.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOrderedView<T, P = u64> {
    mode: usize,
    positions: Vec<P>,
    values: Vec<T>,
    /// Index of each entry in the linearized order.
    source: Vec<usize>,
    bounds: Vec<usize>,
    boundary_rows: Vec<usize>,
}

impl<T: Scalar, P: PositionWord> ModeOrderedView<T, P> {
    pub fn new(tensor: &AltoTensor<T, P>, mode: usize, parts: usize) -> Result<Self> {
        if mode >= tensor.order() {
            return Err(Error::InvalidArgument(format!(
                "mode {mode} out of range for an order-{} tensor",
                tensor.order()
            )));
        }
        if parts == 0 {
            return Err(Error::InvalidArgument("number of segments must be at least 1".into()));
        }
        if tensor.nnz() == 0 {
            return Err(Error::EmptyTensor);
        }
        let layout = tensor.layout();
        let mut keys: Vec<(usize, usize)> = tensor
            .positions()
            .par_iter()
            .enumerate()
            .map(|(x, &p)| (layout.extract(p, mode), x))
            .collect();
        // Keys are unique, so an unstable sort keeps linearized order within a row.
        keys.par_sort_unstable();

        let positions = keys.iter().map(|&(_, x)| tensor.positions()[x]).collect();
        let values = keys.iter().map(|&(_, x)| tensor.values()[x]).collect();
        let source = keys.iter().map(|&(_, x)| x).collect();
        let bounds = balanced_bounds(tensor.nnz(), parts.min(tensor.nnz()));
        let mut boundary_rows: Vec<usize> = bounds[1..bounds.len() - 1]
            .iter()
            .filter(|&&c| keys[c - 1].0 == keys[c].0)
            .map(|&c| keys[c].0)
            .collect();
        boundary_rows.dedup();
        Ok(Self { mode, positions, values, source, bounds, boundary_rows })
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn positions(&self) -> &[P] {
        &self.positions
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn source(&self) -> &[usize] {
        &self.source
    }

    pub fn num_segments(&self) -> usize {
        self.bounds.len() - 1
    }

    /// Entry range of segment `l`.
    pub fn segment(&self, l: usize) -> std::ops::Range<usize> {
        self.bounds[l]..self.bounds[l + 1]
    }

    /// Sorted rows split across a segment border.
    pub fn boundary_rows(&self) -> &[usize] {
        &self.boundary_rows
    }

    pub fn is_boundary(&self, row: usize) -> bool {
        self.boundary_rows.binary_search(&row).is_ok()
    }
}

pub fn make_mode_ordered_view<T: Scalar, P: PositionWord>(
    tensor: &AltoTensor<T, P>,
    mode: usize,
    parts: usize,
) -> Result<ModeOrderedView<T, P>> {
    ModeOrderedView::new(tensor, mode, parts)
}
