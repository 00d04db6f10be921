//! Canonical polyadic decompositions: least squares (CP-ALS) and Poisson
//! (CP-APR with multiplicative updates).

mod als;
mod apr;
pub mod linalg;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{Error, FactorMatrix, Result, Scalar, TensorShape};

pub use als::{cp_als, cp_als_observed, CpAlsConfig, CpAlsResult, CpAlsTrace};
pub use apr::{
    cp_apr_mu, cp_apr_mu_observed, kkt_stat, phi_kernel, pi_precompute, poisson_log_likelihood, select_memory_mode,
    CpAprConfig, CpAprResult, CpAprTrace, InnerStep, MemoryDecision, MemoryMode, DEFAULT_FAST_MEMORY_BYTES,
};
pub use linalg::{gram, hadamard_chain, solve_pseudo};

/// `sum_r lambda_r a^(1)_r o ... o a^(N)_r`.
#[derive(Clone, Debug, PartialEq)]
pub struct KruskalModel<T> {
    pub lambda: Vec<T>,
    pub factors: Vec<FactorMatrix<T>>,
}

impl<T: Scalar> KruskalModel<T> {
    pub fn new(lambda: Vec<T>, factors: Vec<FactorMatrix<T>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::mismatch("a model needs at least one factor matrix"));
        }
        if factors.iter().any(|f| f.cols() != lambda.len()) {
            return Err(Error::mismatch(format!("factor column counts differ from rank {}", lambda.len())));
        }
        Ok(Self { lambda, factors })
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(FactorMatrix::rows).collect()
    }

    /// Model entry at `coords`.
    pub fn value_at(&self, coords: &[usize]) -> T {
        (0..self.rank())
            .map(|r| self.factors.iter().zip(coords).fold(self.lambda[r], |acc, (f, &i)| acc * f.get(i, r)))
            .sum()
    }

    /// Squared Frobenius norm, `lambda^T (hadamard of all Grams) lambda`.
    pub fn norm_sq(&self) -> T {
        let grams: Vec<_> = self.factors.iter().map(gram).collect();
        let v = hadamard_chain(self.rank(), &grams);
        quad_form(&v, &self.lambda)
    }

    /// Rescales every column to unit 2-norm, moving the scale into `lambda`.
    pub fn normalize_2(&mut self) {
        for f in &mut self.factors {
            let norms = column_norms_2(f);
            scale_columns_inv(f, &norms);
            for (l, n) in self.lambda.iter_mut().zip(norms) {
                *l *= n;
            }
        }
    }

    /// Rescales every column to unit 1-norm, moving the scale into `lambda`.
    pub fn normalize_1(&mut self) {
        for f in &mut self.factors {
            let sums = column_sums(f);
            scale_columns_inv(f, &sums);
            for (l, s) in self.lambda.iter_mut().zip(sums) {
                *l *= s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lambda.iter().all(|l| l.is_finite()) && self.factors.iter().all(FactorMatrix::is_finite)
    }

    pub fn report<Tr: Serialize>(&self, trace: Tr) -> ModelReport<Tr> {
        ModelReport {
            shape: self.dims(),
            rank: self.rank(),
            lambda: self.lambda.iter().map(|l| l.as_f64()).collect(),
            factors: self.factors.iter().map(|f| f.as_slice().iter().map(|v| v.as_f64()).collect()).collect(),
            trace,
        }
    }
}

/// Serializable model with factors stored row-major.
#[derive(Clone, Debug, Serialize)]
pub struct ModelReport<Tr> {
    pub shape: Vec<usize>,
    pub rank: usize,
    pub lambda: Vec<f64>,
    pub factors: Vec<Vec<f64>>,
    pub trace: Tr,
}

/// Seeded random factors with unit weights. Entries are uniform on `[0, 1)`,
/// or on `(0, 1]` when `positive` is set. Modes are drawn in order, each one
/// row-major, from a single ChaCha8 stream.
pub fn init_factors<T: Scalar>(shape: &TensorShape, rank: usize, seed: u64, positive: bool) -> Result<KruskalModel<T>> {
    if rank == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = shape
        .dims()
        .iter()
        .map(|&d| {
            FactorMatrix::from_fn(d, rank, |_, _| {
                let u: f64 = rng.random();
                T::from_f64_lossy(if positive { 1.0 - u } else { u })
            })
        })
        .collect();
    KruskalModel::new(vec![T::one(); rank], factors)
}

pub(crate) fn strategies_only<S: serde::Serializer>(
    decisions: &[crate::kernels::StrategyDecision],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(decisions.iter().map(|d| d.strategy))
}

pub(crate) fn quad_form<T: Scalar>(v: &FactorMatrix<T>, x: &[T]) -> T {
    (0..x.len()).map(|p| x[p] * (0..x.len()).map(|q| v.get(p, q) * x[q]).sum::<T>()).sum()
}

pub(crate) fn column_norms_2<T: Scalar>(a: &FactorMatrix<T>) -> Vec<T> {
    let mut s = vec![T::zero(); a.cols()];
    for i in 0..a.rows() {
        for (acc, &v) in s.iter_mut().zip(a.row(i)) {
            *acc += v * v;
        }
    }
    s.into_iter().map(T::sqrt).collect()
}

pub(crate) fn column_sums<T: Scalar>(a: &FactorMatrix<T>) -> Vec<T> {
    let mut s = vec![T::zero(); a.cols()];
    for i in 0..a.rows() {
        for (acc, &v) in s.iter_mut().zip(a.row(i)) {
            *acc += v;
        }
    }
    s
}

/// Divides column `r` by `scale[r]`; zero columns stay zero.
pub(crate) fn scale_columns_inv<T: Scalar>(a: &mut FactorMatrix<T>, scale: &[T]) {
    let inv: Vec<T> = scale.iter().map(|&s| if s == T::zero() { T::zero() } else { T::one() / s }).collect();
    for i in 0..a.rows() {
        for (v, &k) in a.row_mut(i).iter_mut().zip(&inv) {
            *v *= k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(d: &[usize]) -> TensorShape {
        TensorShape::new(d.to_vec()).unwrap()
    }

    #[test]
    fn init_is_reproducible() {
        let a: KruskalModel<f64> = init_factors(&shape(&[4, 8, 2]), 2, 42, false).unwrap();
        let b: KruskalModel<f64> = init_factors(&shape(&[4, 8, 2]), 2, 42, false).unwrap();
        let c: KruskalModel<f64> = init_factors(&shape(&[4, 8, 2]), 2, 43, false).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.dims(), vec![4, 8, 2]);
        assert_eq!(a.lambda, vec![1.0, 1.0]);
        assert!(a.factors.iter().all(|f| f.as_slice().iter().all(|&v| (0.0..1.0).contains(&v))));
    }

    #[test]
    fn positive_init_mirrors_the_stream() {
        let a: KruskalModel<f64> = init_factors(&shape(&[5, 3]), 3, 7, false).unwrap();
        let p: KruskalModel<f64> = init_factors(&shape(&[5, 3]), 3, 7, true).unwrap();
        for (fa, fp) in a.factors.iter().zip(&p.factors) {
            for (&u, &v) in fa.as_slice().iter().zip(fp.as_slice()) {
                assert_eq!(v, 1.0 - u);
                assert!(v > 0.0 && v <= 1.0);
            }
        }
    }

    #[test]
    fn init_rejects_rank_zero() {
        assert!(init_factors::<f64>(&shape(&[2, 2]), 0, 1, false).is_err());
    }

    #[test]
    fn norm_matches_dense_sum() {
        let mut m: KruskalModel<f64> = init_factors(&shape(&[3, 4, 2]), 3, 5, false).unwrap();
        m.lambda = vec![0.5, 2.0, -1.0];
        let mut dense = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..2 {
                    dense += m.value_at(&[i, j, k]).powi(2);
                }
            }
        }
        assert!((m.norm_sq() - dense).abs() < 1e-12 * dense);
    }

    #[test]
    fn normalization_preserves_entries() {
        let m: KruskalModel<f64> = init_factors(&shape(&[3, 4, 2]), 2, 9, true).unwrap();
        for norm1 in [false, true] {
            let mut n = m.clone();
            if norm1 {
                n.normalize_1();
                for f in &n.factors {
                    for s in column_sums(f) {
                        assert!((s - 1.0).abs() < 1e-14);
                    }
                }
            } else {
                n.normalize_2();
                for f in &n.factors {
                    for s in column_norms_2(f) {
                        assert!((s - 1.0).abs() < 1e-14);
                    }
                }
            }
            for idx in [[0, 0, 0], [2, 3, 1], [1, 2, 0]] {
                assert!((m.value_at(&idx) - n.value_at(&idx)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn report_is_row_major() {
        let f = FactorMatrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = KruskalModel::new(vec![1.0f64, 2.0], vec![f.clone(), f]).unwrap();
        let r = m.report(());
        assert_eq!(r.shape, vec![2, 2]);
        assert_eq!(r.factors[0], vec![1.0, 2.0, 3.0, 4.0]);
        assert!(KruskalModel::new(vec![1.0f64], vec![FactorMatrix::zeros(2, 2)]).is_err());
    }
}
