use super::engine::{accumulate_output, accumulate_recursive, accumulate_seq, Executor, NonzeroUpdate};
use super::{check_factors, FactorMatrix, StrategyDecision, Workers};
use crate::partition::{ModeOrderedView, SegmentSet};
use crate::{AltoTensor, Error, PositionWord, Result, Scalar};

/// `out += value * (elementwise product of the other modes' factor rows)`.
pub(crate) struct KhatriRaoRow<'f, T> {
    pub factors: &'f [FactorMatrix<T>],
    pub mode: usize,
}

impl<T: Scalar> NonzeroUpdate<T> for KhatriRaoRow<'_, T> {
    #[inline]
    fn apply(&self, _x: usize, coords: &[usize], value: T, scratch: &mut [T], out: &mut [T]) {
        scratch.iter_mut().for_each(|s| *s = value);
        for (m, f) in self.factors.iter().enumerate() {
            if m != self.mode {
                for (s, &a) in scratch.iter_mut().zip(f.row(coords[m])) {
                    *s *= a;
                }
            }
        }
        for (o, &s) in out.iter_mut().zip(scratch.iter()) {
            *o += s;
        }
    }
}

fn check<T: Scalar, P: PositionWord>(tensor: &AltoTensor<T, P>, factors: &[FactorMatrix<T>], mode: usize) -> Result<usize> {
    if mode >= tensor.order() {
        return Err(Error::InvalidArgument(format!("mode {mode} out of range for order {}", tensor.order())));
    }
    check_factors(tensor.shape().dims(), factors)
}

/// Reference single-threaded MTTKRP in linearized order.
pub fn mttkrp_seq<T: Scalar, P: PositionWord>(
    tensor: &AltoTensor<T, P>,
    factors: &[FactorMatrix<T>],
    mode: usize,
) -> Result<FactorMatrix<T>> {
    let rank = check(tensor, factors, mode)?;
    Ok(accumulate_seq(tensor, mode, rank, &KhatriRaoRow { factors, mode }))
}

/// Buffered MTTKRP over `segments` with a pull-based reduction.
pub fn mttkrp_recursive<T: Scalar, P: PositionWord>(
    tensor: &AltoTensor<T, P>,
    segments: &SegmentSet,
    factors: &[FactorMatrix<T>],
    mode: usize,
    workers: &Workers,
) -> Result<FactorMatrix<T>> {
    let rank = check(tensor, factors, mode)?;
    if segments.segments().last().map(|s| s.end) != Some(tensor.nnz()) {
        return Err(Error::mismatch("segments were built for a different tensor"));
    }
    Ok(accumulate_recursive(tensor, segments, mode, rank, &KhatriRaoRow { factors, mode }, workers))
}

/// Output-oriented MTTKRP over a view sorted by `mode`.
pub fn mttkrp_output_oriented<T: Scalar, P: PositionWord>(
    tensor: &AltoTensor<T, P>,
    view: &ModeOrderedView<T, P>,
    factors: &[FactorMatrix<T>],
    mode: usize,
    workers: &Workers,
) -> Result<FactorMatrix<T>> {
    let rank = check(tensor, factors, mode)?;
    if view.mode() != mode || view.positions().len() != tensor.nnz() {
        return Err(Error::mismatch(format!("view of mode {} used for mode {mode}", view.mode())));
    }
    Ok(accumulate_output(tensor, view, rank, &KhatriRaoRow { factors, mode }, workers))
}

/// MTTKRP with the strategy picked by fiber reuse, using one segment per worker.
pub fn mttkrp<T: Scalar, P: PositionWord>(
    tensor: &AltoTensor<T, P>,
    factors: &[FactorMatrix<T>],
    mode: usize,
    workers: &Workers,
) -> Result<(FactorMatrix<T>, StrategyDecision)> {
    Executor::new(tensor, workers.clone(), Default::default())?.mttkrp(factors, mode)
}

impl<T: Scalar, P: PositionWord> Executor<'_, T, P> {
    pub fn mttkrp(&self, factors: &[FactorMatrix<T>], mode: usize) -> Result<(FactorMatrix<T>, StrategyDecision)> {
        let rank = check(self.tensor(), factors, mode)?;
        let decision = self.decide(mode, rank);
        let out = self.run(decision.strategy, mode, rank, &KhatriRaoRow { factors, mode });
        Ok((out, decision))
    }
}

/// Floating-point operations per MTTKRP, counting `2R(N-1) + R` per nonzero.
pub fn mttkrp_flops(nnz: usize, order: usize, rank: usize) -> u64 {
    nnz as u64 * (2 * rank * order.saturating_sub(1) + rank) as u64
}
