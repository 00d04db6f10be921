use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;

use super::{select_strategy, FactorMatrix, Strategy, StrategyDecision, Workers};
use crate::partition::{ModeOrderedView, SegmentSet};
use crate::tensor::{compute_stats, TensorStats};
use crate::{AltoTensor, PositionWord, Result, Scalar};

pub const DEFAULT_TEMP_BUDGET_BYTES: u64 = 1 << 30;

/// Per-nonzero contribution to one output row.
pub(crate) trait NonzeroUpdate<T>: Sync {
    /// Adds the contribution of nonzero `x` (its index in linearized order)
    /// to `out`, the accumulator of output row `coords[mode]`. `scratch` has
    /// the same length as `out`; its contents on entry are unspecified.
    fn apply(&self, x: usize, coords: &[usize], value: T, scratch: &mut [T], out: &mut [T]);
}

pub(crate) fn accumulate_seq<T, P, U>(tensor: &AltoTensor<T, P>, mode: usize, rank: usize, update: &U) -> FactorMatrix<T>
where
    T: Scalar,
    P: PositionWord,
    U: NonzeroUpdate<T>,
{
    let mut out = FactorMatrix::zeros(tensor.shape().dims()[mode], rank);
    let mut coords = vec![0; tensor.order()];
    let mut scratch = vec![T::zero(); rank];
    for (x, (&p, &v)) in tensor.positions().iter().zip(tensor.values()).enumerate() {
        tensor.layout().delinearize(p, &mut coords);
        update.apply(x, &coords, v, &mut scratch, out.row_mut(coords[mode]));
    }
    out
}

/// Each segment accumulates into a private buffer covering its mode interval;
/// every output row then pulls from the buffers whose interval covers it, in
/// ascending segment order. The result does not depend on the worker count.
pub(crate) fn accumulate_recursive<T, P, U>(
    tensor: &AltoTensor<T, P>,
    segments: &SegmentSet,
    mode: usize,
    rank: usize,
    update: &U,
    workers: &Workers,
) -> FactorMatrix<T>
where
    T: Scalar,
    P: PositionWord,
    U: NonzeroUpdate<T>,
{
    let rows = tensor.shape().dims()[mode];
    let order = tensor.order();
    workers.install(|| {
        let buffers: Vec<Vec<T>> = segments
            .segments()
            .par_iter()
            .map(|seg| {
                let base = seg.intervals[mode].start;
                let mut buf = vec![T::zero(); seg.intervals[mode].width() * rank];
                let mut coords = vec![0; order];
                let mut scratch = vec![T::zero(); rank];
                for x in seg.start..seg.end {
                    tensor.coords(x, &mut coords);
                    let r = coords[mode] - base;
                    update.apply(x, &coords, tensor.values()[x], &mut scratch, &mut buf[r * rank..(r + 1) * rank]);
                }
                buf
            })
            .collect();

        let mut out = FactorMatrix::zeros(rows, rank);
        if rank == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(rank)
            .with_min_len(64)
            .enumerate()
            .for_each(|(b, row)| {
                for (seg, buf) in segments.segments().iter().zip(&buffers) {
                    let iv = seg.intervals[mode];
                    if iv.contains(b) {
                        let off = (b - iv.start) * rank;
                        for (o, &t) in row.iter_mut().zip(&buf[off..off + rank]) {
                            *o += t;
                        }
                    }
                }
            });
        out
    })
}

struct RowWriter<T> {
    ptr: *mut T,
    cols: usize,
}

// SAFETY: callers of `add` guarantee exclusive access to the row they touch.
unsafe impl<T: Send> Send for RowWriter<T> {}
unsafe impl<T: Send> Sync for RowWriter<T> {}

impl<T: Scalar> RowWriter<T> {
    /// # Safety
    /// `row` must be in bounds and no other thread may access it during the call.
    unsafe fn add(&self, row: usize, src: &[T]) {
        let dst = std::slice::from_raw_parts_mut(self.ptr.add(row * self.cols), self.cols);
        for (d, &s) in dst.iter_mut().zip(src) {
            *d += s;
        }
    }
}

/// Segments of the mode-sorted view run in parallel. Rows owned by a single
/// segment are written directly; rows split across a segment border are
/// added under a per-row lock.
pub(crate) fn accumulate_output<T, P, U>(
    tensor: &AltoTensor<T, P>,
    view: &ModeOrderedView<T, P>,
    rank: usize,
    update: &U,
    workers: &Workers,
) -> FactorMatrix<T>
where
    T: Scalar,
    P: PositionWord,
    U: NonzeroUpdate<T>,
{
    let mode = view.mode();
    let order = tensor.order();
    let layout = tensor.layout();
    let mut out = FactorMatrix::zeros(tensor.shape().dims()[mode], rank);
    let locks: Vec<Mutex<()>> = view.boundary_rows().iter().map(|_| Mutex::new(())).collect();
    let writer = RowWriter { ptr: out.as_mut_slice().as_mut_ptr(), cols: rank };

    let flush = |row: usize, acc: &[T]| match view.boundary_rows().binary_search(&row) {
        Ok(k) => {
            let _guard = locks[k].lock().unwrap_or_else(|e| e.into_inner());
            // SAFETY: every writer of a boundary row holds its lock.
            unsafe { writer.add(row, acc) }
        }
        // SAFETY: a non-boundary row occurs in exactly one segment, and each
        // segment flushes a given row once since the view is sorted by row.
        Err(_) => unsafe { writer.add(row, acc) },
    };

    workers.install(|| {
        (0..view.num_segments()).into_par_iter().for_each(|l| {
            let mut coords = vec![0; order];
            let mut scratch = vec![T::zero(); rank];
            let mut acc = vec![T::zero(); rank];
            let mut current: Option<usize> = None;
            for e in view.segment(l) {
                layout.delinearize(view.positions()[e], &mut coords);
                let row = coords[mode];
                if current != Some(row) {
                    if let Some(prev) = current {
                        flush(prev, &acc);
                    }
                    acc.iter_mut().for_each(|a| *a = T::zero());
                    current = Some(row);
                }
                update.apply(view.source()[e], &coords, view.values()[e], &mut scratch, &mut acc);
            }
            if let Some(prev) = current {
                flush(prev, &acc);
            }
        });
    });
    drop(writer);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutorConfig {
    /// Number of line segments; defaults to the worker count.
    pub partitions: Option<usize>,
    /// Fixed strategy instead of the reuse heuristic.
    pub strategy: Option<Strategy>,
    pub temp_budget_bytes: u64,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self { partitions: None, strategy: None, temp_budget_bytes: DEFAULT_TEMP_BUDGET_BYTES }
    }
}

/// A tensor bound to a worker pool and its segmentation. Mode-sorted views are
/// built on first use and cached.
pub struct Executor<'a, T, P = u64> {
    tensor: &'a AltoTensor<T, P>,
    workers: Workers,
    segments: SegmentSet,
    stats: TensorStats,
    views: Vec<OnceLock<ModeOrderedView<T, P>>>,
    config: ExecutorConfig,
}

impl<'a, T: Scalar, P: PositionWord> Executor<'a, T, P> {
    pub fn new(tensor: &'a AltoTensor<T, P>, workers: Workers, config: ExecutorConfig) -> Result<Self> {
        let parts = config.partitions.unwrap_or(workers.count());
        let segments = workers.install(|| SegmentSet::new(tensor, parts))?;
        let stats = compute_stats(tensor.shape(), tensor.nnz() as u64, 64);
        let views = (0..tensor.order()).map(|_| OnceLock::new()).collect();
        Ok(Self { tensor, workers, segments, stats, views, config })
    }

    pub fn tensor(&self) -> &'a AltoTensor<T, P> {
        self.tensor
    }

    pub fn workers(&self) -> &Workers {
        &self.workers
    }

    pub fn segments(&self) -> &SegmentSet {
        &self.segments
    }

    pub fn stats(&self) -> &TensorStats {
        &self.stats
    }

    pub fn config(&self) -> &ExecutorConfig {
        &self.config
    }

    pub fn view(&self, mode: usize) -> &ModeOrderedView<T, P> {
        self.views[mode].get_or_init(|| {
            self.workers
                .install(|| ModeOrderedView::new(self.tensor, mode, self.segments.len()))
                .expect("mode and segment count validated at construction")
        })
    }

    /// Strategy for updating `mode` with `rank` columns.
    pub fn decide(&self, mode: usize, rank: usize) -> StrategyDecision {
        let buffer_bytes = (self.segments.buffer_rows(mode) * rank * std::mem::size_of::<T>()) as u64;
        let mut decision = select_strategy(
            &self.stats,
            mode,
            self.workers.count(),
            buffer_bytes,
            self.config.temp_budget_bytes,
        );
        if let Some(fixed) = self.config.strategy {
            decision.strategy = fixed;
            decision.forced = true;
            decision.reason = "requested".into();
        }
        decision
    }

    pub(crate) fn run<U: NonzeroUpdate<T>>(&self, strategy: Strategy, mode: usize, rank: usize, update: &U) -> FactorMatrix<T> {
        match strategy {
            Strategy::Sequential => accumulate_seq(self.tensor, mode, rank, update),
            Strategy::RecursiveBuffered => {
                accumulate_recursive(self.tensor, &self.segments, mode, rank, update, &self.workers)
            }
            Strategy::OutputOriented => {
                accumulate_output(self.tensor, self.view(mode), rank, update, &self.workers)
            }
        }
    }
}
