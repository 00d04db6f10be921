use std::time::Instant;

use serde::Serialize;

use super::linalg::{gram, hadamard_chain, solve_pseudo};
use super::{column_norms_2, init_factors, quad_form, scale_columns_inv, KruskalModel};
use crate::kernels::{Executor, ExecutorConfig, StrategyDecision};
use crate::{AltoTensor, Error, PositionWord, Result, Scalar, Workers};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CpAlsConfig {
    pub rank: usize,
    pub max_iters: usize,
    /// Stop once the fit improves by less than this.
    pub fit_tol: f64,
    pub seed: u64,
    #[serde(skip)]
    pub executor: ExecutorConfig,
}

impl Default for CpAlsConfig {
    fn default() -> Self {
        Self { rank: 16, max_iters: 50, fit_tol: 1e-5, seed: 0, executor: ExecutorConfig::default() }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CpAlsTrace {
    /// `1 - ||X - M|| / ||X||` after each iteration.
    pub fit: Vec<f64>,
    /// `||X - M||^2` after each iteration.
    pub residual_sq: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Strategy decision for each mode; serialized as the strategy names only.
    #[serde(rename = "strategies", serialize_with = "super::strategies_only")]
    pub decisions: Vec<StrategyDecision>,
    pub mttkrp_time_s: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct CpAlsResult<T> {
    pub model: KruskalModel<T>,
    pub trace: CpAlsTrace,
}

/// Least-squares CP decomposition by alternating least squares.
pub fn cp_als<T: Scalar, P: PositionWord>(
    tensor: &AltoTensor<T, P>,
    config: &CpAlsConfig,
    workers: &Workers,
) -> Result<CpAlsResult<T>> {
    cp_als_observed(tensor, config, workers, |_, _, _| {})
}

/// [`cp_als`] calling `observer(iteration, model, fit)` after every iteration.
pub fn cp_als_observed<T: Scalar, P: PositionWord>(
    tensor: &AltoTensor<T, P>,
    config: &CpAlsConfig,
    workers: &Workers,
    mut observer: impl FnMut(usize, &KruskalModel<T>, f64),
) -> Result<CpAlsResult<T>> {
    let start = Instant::now();
    if !(config.fit_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("fit tolerance {} must be non-negative", config.fit_tol)));
    }
    let exec = Executor::new(tensor, workers.clone(), config.executor.clone())?;
    let order = tensor.order();
    let rank = config.rank;
    let mut model: KruskalModel<T> = init_factors(tensor.shape(), rank, config.seed, false)?;
    let norm_x_sq = tensor.norm_sq();
    if !norm_x_sq.is_finite() {
        return Err(Error::Numerical("tensor norm is not finite".into()));
    }
    let norm_x = norm_x_sq.as_f64().sqrt();
    let mut trace = CpAlsTrace::default();
    let mut mttkrp_time = 0.0;

    let fit_of = |model: &KruskalModel<T>, grams: &[crate::FactorMatrix<T>], last_m: &crate::FactorMatrix<T>| {
        let a = &model.factors[order - 1];
        let inner: T = (0..rank)
            .map(|r| model.lambda[r] * (0..a.rows()).map(|i| a.get(i, r) * last_m.get(i, r)).sum::<T>())
            .sum();
        let model_sq = quad_form(&hadamard_chain(rank, grams), &model.lambda);
        let resid_sq = (norm_x_sq - (inner + inner) + model_sq).as_f64().max(0.0);
        let fit = if norm_x > 0.0 { 1.0 - resid_sq.sqrt() / norm_x } else { 0.0 };
        (fit, resid_sq)
    };

    if config.max_iters == 0 {
        model.normalize_2();
        let grams: Vec<_> = model.factors.iter().map(gram).collect();
        let (m, _) = exec.mttkrp(&model.factors, order - 1)?;
        let (fit, resid) = fit_of(&model, &grams, &m);
        trace.fit.push(fit);
        trace.residual_sq.push(resid);
        trace.wall_time_s = start.elapsed().as_secs_f64();
        return Ok(CpAlsResult { model, trace });
    }

    let mut grams: Vec<_> = model.factors.iter().map(gram).collect();
    let mut last_fit: Option<f64> = None;
    for iter in 0..config.max_iters {
        let mut last_m = None;
        for n in 0..order {
            let v = hadamard_chain(rank, grams.iter().enumerate().filter(|&(m, _)| m != n).map(|(_, g)| g));
            let t0 = Instant::now();
            let (m, decision) = exec.mttkrp(&model.factors, n)?;
            mttkrp_time += t0.elapsed().as_secs_f64();
            if iter == 0 {
                trace.decisions.push(decision);
            }
            let mut a = solve_pseudo(&m, &v)
                .map_err(|e| Error::Numerical(format!("iteration {iter}, mode {n}: {e}")))?;
            let norms = column_norms_2(&a);
            scale_columns_inv(&mut a, &norms);
            model.lambda = norms;
            grams[n] = gram(&a);
            model.factors[n] = a;
            if n == order - 1 {
                last_m = Some(m);
            }
        }
        let (fit, resid) = fit_of(&model, &grams, last_m.as_ref().expect("order >= 1"));
        if !fit.is_finite() || !model.is_finite() {
            return Err(Error::Numerical(format!("non-finite model after iteration {iter}")));
        }
        trace.fit.push(fit);
        trace.residual_sq.push(resid);
        trace.iterations = iter + 1;
        observer(iter, &model, fit);
        if let Some(prev) = last_fit {
            if fit - prev < config.fit_tol {
                trace.converged = true;
                break;
            }
        }
        last_fit = Some(fit);
    }
    trace.mttkrp_time_s = mttkrp_time;
    trace.wall_time_s = start.elapsed().as_secs_f64();
    Ok(CpAlsResult { model, trace })
}
