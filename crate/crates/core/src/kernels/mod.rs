//! MTTKRP over linearized tensors and the traversal machinery it shares with
//! the CP-APR model-update kernel.

mod engine;
mod mttkrp;

use std::sync::Arc;

use serde::Serialize;

use crate::{Error, Result, Scalar, TensorStats};

pub use engine::{Executor, ExecutorConfig, DEFAULT_TEMP_BUDGET_BYTES};
pub(crate) use engine::NonzeroUpdate;
pub use mttkrp::{mttkrp, mttkrp_output_oriented, mttkrp_recursive, mttkrp_seq, mttkrp_flops};

/// Dense row-major `rows x cols` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> FactorMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::mismatch(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Fixed-size worker pool handed explicitly to every parallel kernel.
#[derive(Clone)]
pub struct Workers {
    count: usize,
    pool: Arc<rayon::ThreadPool>,
}

impl Workers {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidArgument("worker count must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .thread_name(|i| format!("alto-worker-{i}"))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {count} workers: {e}")))?;
        Ok(Self { count, pool: Arc::new(pool) })
    }

    pub fn sequential() -> Self {
        Self::new(1).expect("single worker pool")
    }

    /// Hardware parallelism, or 1 when it cannot be queried.
    pub fn available() -> usize {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workers").field("count", &self.count).finish()
    }
}

/// How concurrent updates of one output row are resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Sequential,
    /// Linearized-order traversal into per-segment buffers, then a pull reduction.
    RecursiveBuffered,
    /// Mode-sorted traversal; only rows split across segments synchronize.
    OutputOriented,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seq" | "sequential" => Ok(Self::Sequential),
            "recursive" | "recursive_buffered" => Ok(Self::RecursiveBuffered),
            "output" | "output_oriented" => Ok(Self::OutputOriented),
            other => Err(Error::InvalidArgument(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Chosen strategy plus the inputs that led to it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyDecision {
    pub mode: usize,
    pub strategy: Strategy,
    pub fiber_reuse: f64,
    pub buffer_bytes: u64,
    pub temp_budget_bytes: u64,
    pub workers: usize,
    pub forced: bool,
    pub reason: String,
}

/// Buffered accumulation in the worst case costs four memory operations per
/// update; it pays off only when rows are reused more often than that.
pub const REUSE_THRESHOLD: f64 = 4.0;

/// Picks the conflict-resolution strategy for updating mode `mode`.
///
/// `buffer_bytes` is the total size of the per-segment scratch buffers the
/// buffered strategy would allocate.
pub fn select_strategy(
    stats: &TensorStats,
    mode: usize,
    workers: usize,
    buffer_bytes: u64,
    temp_budget_bytes: u64,
) -> StrategyDecision {
    let reuse = stats.mode_reuse(mode);
    let (strategy, reason) = if workers <= 1 {
        (Strategy::Sequential, "single worker".to_string())
    } else if reuse <= REUSE_THRESHOLD {
        (Strategy::OutputOriented, format!("fiber reuse {reuse:.3} <= {REUSE_THRESHOLD}"))
    } else if buffer_bytes > temp_budget_bytes {
        (
            Strategy::OutputOriented,
            format!("buffers need {buffer_bytes} bytes, budget is {temp_budget_bytes}"),
        )
    } else {
        (Strategy::RecursiveBuffered, format!("fiber reuse {reuse:.3} > {REUSE_THRESHOLD}"))
    };
    StrategyDecision {
        mode,
        strategy,
        fiber_reuse: reuse,
        buffer_bytes,
        temp_budget_bytes,
        workers,
        forced: false,
        reason,
    }
}

/// Checks that `factors` has one `I_n x rank` matrix per mode and returns the rank.
pub(crate) fn check_factors<T: Scalar>(dims: &[usize], factors: &[FactorMatrix<T>]) -> Result<usize> {
    if factors.len() != dims.len() {
        return Err(Error::mismatch(format!("{} factor matrices for {} modes", factors.len(), dims.len())));
    }
    let rank = factors[0].cols();
    for (n, (f, &d)) in factors.iter().zip(dims).enumerate() {
        if f.rows() != d || f.cols() != rank {
            return Err(Error::mismatch(format!(
                "factor {n} is {}x{}, expected {d}x{rank}",
                f.rows(),
                f.cols()
            )));
        }
        if !f.is_finite() {
            return Err(Error::Numerical(format!("factor {n} has non-finite entries")));
        }
    }
    Ok(rank)
}
