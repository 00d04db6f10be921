use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{column_sums, init_factors, scale_columns_inv, KruskalModel};
use crate::kernels::{check_factors, Executor, ExecutorConfig, NonzeroUpdate, StrategyDecision};
use crate::tensor::{ReuseClass, TensorStats};
use crate::{AltoTensor, Error, FactorMatrix, PositionWord, Result, Scalar, Workers};

/// Where the Khatri-Rao rows used by the model update come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryMode {
    /// Choose from the reuse class and the factor footprint.
    Auto,
    /// Materialize one row per nonzero before each mode's inner loop.
    Pre,
    /// Recompute rows from the factors on every inner iteration.
    Otf,
}

impl std::str::FromStr for MemoryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "pre" => Ok(Self::Pre),
            "otf" => Ok(Self::Otf),
            other => Err(Error::InvalidArgument(format!("unknown memory mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemoryDecision {
    /// Either `Pre` or `Otf`.
    pub mode: MemoryMode,
    pub forced: bool,
    pub overall_class: ReuseClass,
    pub factor_bytes: u64,
    pub fast_memory_bytes: u64,
    pub reason: String,
}

pub const DEFAULT_FAST_MEMORY_BYTES: u64 = 100 << 20;

/// Precomputes only when every mode has limited reuse and the factor
/// matrices, at 8 bytes per entry, exceed `fast_memory_bytes`.
pub fn select_memory_mode(stats: &TensorStats, rank: usize, fast_memory_bytes: u64) -> MemoryDecision {
    let factor_bytes: u64 = stats.dims.iter().map(|&d| d as u64 * rank as u64 * 8).sum();
    let limited = stats.overall_class == ReuseClass::Limited;
    let (mode, reason) = if limited && factor_bytes > fast_memory_bytes {
        (MemoryMode::Pre, format!("limited reuse and factors of {factor_bytes} bytes exceed {fast_memory_bytes}"))
    } else if !limited {
        (MemoryMode::Otf, format!("{:?} reuse", stats.overall_class).to_lowercase())
    } else {
        (MemoryMode::Otf, format!("factors of {factor_bytes} bytes fit in {fast_memory_bytes}"))
    };
    MemoryDecision {
        mode,
        forced: false,
        overall_class: stats.overall_class,
        factor_bytes,
        fast_memory_bytes,
        reason,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CpAprConfig {
    pub rank: usize,
    pub max_outer: usize,
    pub max_inner: usize,
    /// KKT tolerance.
    pub tau: f64,
    /// Scooch amount.
    pub kappa: f64,
    /// Scooch threshold.
    pub kappa_tol: f64,
    /// Denominator floor.
    pub epsilon: f64,
    pub memory: MemoryMode,
    pub fast_memory_bytes: u64,
    pub seed: u64,
    #[serde(skip)]
    pub executor: ExecutorConfig,
}

impl Default for CpAprConfig {
    fn default() -> Self {
        Self {
            rank: 16,
            max_outer: 200,
            max_inner: 10,
            tau: 1e-4,
            kappa: 1e-2,
            kappa_tol: 1e-10,
            epsilon: 1e-10,
            memory: MemoryMode::Auto,
            fast_memory_bytes: DEFAULT_FAST_MEMORY_BYTES,
            seed: 0,
            executor: ExecutorConfig::default(),
        }
    }
}

impl CpAprConfig {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.rank == 0 {
            return bad("rank must be at least 1");
        }
        if self.max_inner == 0 {
            return bad("at least one inner iteration is required");
        }
        if !(self.tau > 0.0) || !(self.epsilon > 0.0) {
            return bad("tau and epsilon must be positive");
        }
        if !(self.kappa >= 0.0) || !(self.kappa_tol >= 0.0) {
            return bad("kappa and kappa_tol must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CpAprTrace {
    /// KKT violation per outer iteration and mode, at the first inner iteration.
    pub kkt: Vec<Vec<f64>>,
    /// Inner iterations per outer iteration and mode.
    pub inner_iterations: Vec<Vec<usize>>,
    /// Log-likelihood (without the data-only constant) after each outer iteration.
    pub log_likelihood: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub memory: MemoryDecision,
    /// Strategy decision for each mode; serialized as the strategy names only.
    #[serde(rename = "strategies", serialize_with = "super::strategies_only")]
    pub decisions: Vec<StrategyDecision>,
    pub non_integer_values: bool,
    pub pi_time_s: f64,
    pub phi_time_s: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct CpAprResult<T> {
    pub model: KruskalModel<T>,
    pub trace: CpAprTrace,
}

/// State handed to the observer of [`cp_apr_mu_observed`]: `b` is the
/// unnormalized factor for `mode` after `inner` multiplicative updates.
pub struct InnerStep<'a, T> {
    pub outer: usize,
    pub mode: usize,
    pub inner: usize,
    pub b: &'a FactorMatrix<T>,
    pub factors: &'a [FactorMatrix<T>],
}

#[inline]
fn krp_row<T: Scalar>(factors: &[FactorMatrix<T>], mode: usize, coords: &[usize], out: &mut [T]) {
    out.iter_mut().for_each(|o| *o = T::one());
    for (m, f) in factors.iter().enumerate() {
        if m != mode {
            for (o, &a) in out.iter_mut().zip(f.row(coords[m])) {
                *o *= a;
            }
        }
    }
}

/// Khatri-Rao rows of the other modes, one per nonzero in linearized order.
pub fn pi_precompute<T: Scalar, P: PositionWord>(
    tensor: &AltoTensor<T, P>,
    factors: &[FactorMatrix<T>],
    mode: usize,
    workers: &Workers,
) -> Result<FactorMatrix<T>> {
    let rank = check_factors(tensor.shape().dims(), factors)?;
    let mut pi = FactorMatrix::zeros(tensor.nnz(), rank);
    if rank == 0 {
        return Ok(pi);
    }
    workers.install(|| {
        pi.as_mut_slice().par_chunks_mut(rank).with_min_len(256).enumerate().for_each_init(
            || vec![0; tensor.order()],
            |coords, (x, row)| {
                tensor.coords(x, coords);
                krp_row(factors, mode, coords, row);
            },
        )
    });
    Ok(pi)
}

enum KrpSource<'a, T> {
    Pre(&'a FactorMatrix<T>),
    Otf(&'a [FactorMatrix<T>]),
}

/// `out += v / max(<b_i, pi_x>, eps) * pi_x`.
struct PhiUpdate<'a, T> {
    b: &'a FactorMatrix<T>,
    mode: usize,
    eps: T,
    krp: KrpSource<'a, T>,
}

impl<T: Scalar> NonzeroUpdate<T> for PhiUpdate<'_, T> {
    #[inline]
    fn apply(&self, x: usize, coords: &[usize], value: T, scratch: &mut [T], out: &mut [T]) {
        match self.krp {
            KrpSource::Pre(pi) => scratch.copy_from_slice(pi.row(x)),
            KrpSource::Otf(factors) => krp_row(factors, self.mode, coords, scratch),
        }
        let dot: T = self.b.row(coords[self.mode]).iter().zip(scratch.iter()).map(|(&b, &k)| b * k).sum();
        let s = value / dot.max(self.eps);
        for (o, &k) in out.iter_mut().zip(scratch.iter()) {
            *o += s * k;
        }
    }
}

/// Model-update matrix `Phi` for `mode`, using `pi` when given and
/// recomputing Khatri-Rao rows from `factors` otherwise.
pub fn phi_kernel<T: Scalar, P: PositionWord>(
    exec: &Executor<'_, T, P>,
    b: &FactorMatrix<T>,
    factors: &[FactorMatrix<T>],
    pi: Option<&FactorMatrix<T>>,
    mode: usize,
    eps: T,
) -> Result<(FactorMatrix<T>, StrategyDecision)> {
    let tensor = exec.tensor();
    if mode >= tensor.order() {
        return Err(Error::InvalidArgument(format!("mode {mode} out of range for order {}", tensor.order())));
    }
    let rank = check_factors(tensor.shape().dims(), factors)?;
    if b.rows() != tensor.shape().dims()[mode] || b.cols() != rank {
        return Err(Error::mismatch(format!("B is {}x{}, expected {}x{rank}", b.rows(), b.cols(), tensor.shape().dims()[mode])));
    }
    let krp = match pi {
        Some(pi) => {
            if pi.rows() != tensor.nnz() || pi.cols() != rank {
                return Err(Error::mismatch(format!("Pi is {}x{}, expected {}x{rank}", pi.rows(), pi.cols(), tensor.nnz())));
            }
            KrpSource::Pre(pi)
        }
        None => KrpSource::Otf(factors),
    };
    let decision = exec.decide(mode, rank);
    let out = exec.run(decision.strategy, mode, rank, &PhiUpdate { b, mode, eps, krp });
    Ok((out, decision))
}

/// `max |min(B, 1 - Phi)|`.
pub fn kkt_stat<T: Scalar>(b: &FactorMatrix<T>, phi: &FactorMatrix<T>) -> T {
    b.as_slice()
        .iter()
        .zip(phi.as_slice())
        .map(|(&x, &p)| x.min(T::one() - p).abs())
        .fold(T::zero(), T::max)
}

/// `(A + S) diag(lambda)`, where `S` adds `kappa` to entries below
/// `kappa_tol` whose `Phi` exceeds 1, from the second outer iteration on.
pub(crate) fn scooched_b<T: Scalar>(
    a: &FactorMatrix<T>,
    lambda: &[T],
    phi: &FactorMatrix<T>,
    outer: usize,
    kappa: T,
    kappa_tol: T,
) -> FactorMatrix<T> {
    FactorMatrix::from_fn(a.rows(), a.cols(), |i, r| {
        let mut v = a.get(i, r);
        if outer > 0 && v < kappa_tol && phi.get(i, r) > T::one() {
            v += kappa;
        }
        v * lambda[r]
    })
}

/// `sum_x v_x log(m_x) - sum of all model entries`.
pub fn poisson_log_likelihood<T: Scalar, P: PositionWord>(tensor: &AltoTensor<T, P>, model: &KruskalModel<T>) -> f64 {
    let mut coords = vec![0; tensor.order()];
    let mut ll = 0.0;
    for x in 0..tensor.nnz() {
        tensor.coords(x, &mut coords);
        let v = tensor.values()[x].as_f64();
        ll += v * model.value_at(&coords).as_f64().ln();
    }
    let sums: Vec<Vec<T>> = model.factors.iter().map(column_sums).collect();
    let total: f64 = (0..model.rank())
        .map(|r| sums.iter().fold(model.lambda[r], |acc, s| acc * s[r]).as_f64())
        .sum();
    ll - total
}

/// Poisson CP decomposition by multiplicative updates.
pub fn cp_apr_mu<T: Scalar, P: PositionWord>(
    tensor: &AltoTensor<T, P>,
    config: &CpAprConfig,
    workers: &Workers,
) -> Result<CpAprResult<T>> {
    cp_apr_mu_observed(tensor, config, workers, |_| {})
}

/// [`cp_apr_mu`] calling `observer` when each mode's inner loop starts and
/// after every multiplicative update.
pub fn cp_apr_mu_observed<T: Scalar, P: PositionWord>(
    tensor: &AltoTensor<T, P>,
    config: &CpAprConfig,
    workers: &Workers,
    mut observer: impl FnMut(&InnerStep<'_, T>),
) -> Result<CpAprResult<T>> {
    let start = Instant::now();
    config.validate()?;
    if let Some(v) = tensor.values().iter().find(|v| **v < T::zero()) {
        return Err(Error::InvalidArgument(format!("Poisson decomposition needs non-negative values; found {v}")));
    }
    let non_integer_values = tensor.values().iter().any(|v| v.fract() != T::zero());
    if non_integer_values {
        log::warn!("tensor has non-integer values; treating them as Poisson counts");
    }
    let exec = Executor::new(tensor, workers.clone(), config.executor.clone())?;
    let order = tensor.order();
    let rank = config.rank;
    let eps = T::from_f64_lossy(config.epsilon);
    let kappa = T::from_f64_lossy(config.kappa);
    let kappa_tol = T::from_f64_lossy(config.kappa_tol);

    let mut memory = select_memory_mode(exec.stats(), rank, config.fast_memory_bytes);
    if config.memory != MemoryMode::Auto {
        memory.mode = config.memory;
        memory.forced = true;
        memory.reason = "requested".into();
    }
    let precompute = memory.mode == MemoryMode::Pre;

    let mut model: KruskalModel<T> = init_factors(tensor.shape(), rank, config.seed, true)?;
    model.normalize_1();
    let mut phis: Vec<FactorMatrix<T>> =
        tensor.shape().dims().iter().map(|&d| FactorMatrix::zeros(d, rank)).collect();

    let mut trace = CpAprTrace {
        kkt: Vec::new(),
        inner_iterations: Vec::new(),
        log_likelihood: Vec::new(),
        outer_iterations: 0,
        converged: false,
        memory,
        decisions: Vec::new(),
        non_integer_values,
        pi_time_s: 0.0,
        phi_time_s: 0.0,
        wall_time_s: 0.0,
    };

    for outer in 0..config.max_outer {
        let mut converged = true;
        let mut kkts = Vec::with_capacity(order);
        let mut inners = Vec::with_capacity(order);
        for n in 0..order {
            let mut b = scooched_b(&model.factors[n], &model.lambda, &phis[n], outer, kappa, kappa_tol);
            let pi = if precompute {
                let t0 = Instant::now();
                let pi = pi_precompute(tensor, &model.factors, n, workers)?;
                trace.pi_time_s += t0.elapsed().as_secs_f64();
                Some(pi)
            } else {
                None
            };
            observer(&InnerStep { outer, mode: n, inner: 0, b: &b, factors: &model.factors });
            let mut inner = 0;
            while inner < config.max_inner {
                let t0 = Instant::now();
                let (phi, decision) = phi_kernel(&exec, &b, &model.factors, pi.as_ref(), n, eps)?;
                trace.phi_time_s += t0.elapsed().as_secs_f64();
                if outer == 0 && inner == 0 {
                    trace.decisions.push(decision);
                }
                inner += 1;
                let kkt = kkt_stat(&b, &phi);
                phis[n] = phi;
                if inner == 1 {
                    kkts.push(kkt.as_f64());
                }
                if kkt < T::from_f64_lossy(config.tau) {
                    break;
                }
                converged = false;
                for (x, &p) in b.as_mut_slice().iter_mut().zip(phis[n].as_slice()) {
                    *x *= p;
                }
                observer(&InnerStep { outer, mode: n, inner, b: &b, factors: &model.factors });
            }
            if !b.is_finite() {
                return Err(Error::Numerical(format!("non-finite factor at outer iteration {outer}, mode {n}")));
            }
            inners.push(inner);
            let lambda = column_sums(&b);
            scale_columns_inv(&mut b, &lambda);
            model.lambda = lambda;
            model.factors[n] = b;
        }
        trace.kkt.push(kkts);
        trace.inner_iterations.push(inners);
        trace.log_likelihood.push(poisson_log_likelihood(tensor, &model));
        trace.outer_iterations = outer + 1;
        if converged {
            trace.converged = true;
            break;
        }
    }
    trace.wall_time_s = start.elapsed().as_secs_f64();
    Ok(CpAprResult { model, trace })
}
