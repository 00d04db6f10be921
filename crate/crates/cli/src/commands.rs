use std::path::Path;
use std::time::Instant;

use alto_core::cpd::{self, CpAlsConfig, CpAprConfig, MemoryMode};
use alto_core::kernels::{mttkrp_flops, Executor, ExecutorConfig};
use alto_core::partition::{overlap, SegmentSet};
use alto_core::tensor::{write_alto_binary, write_frostt};
use alto_core::{DynAltoTensor, Workers};
use serde_json::{json, Value};

use crate::io::{load, write_atomic};
use crate::report::{RunReport, TensorSummary};
use crate::{BenchArgs, ConvertArgs, CpAlsArgs, CpAprArgs, ExecArgs, Failure, Format, MemArg, StatsArgs};

/// Runs `$body` with `$t` bound to the concrete tensor inside a [`DynAltoTensor`].
macro_rules! dispatch {
    ($dyn:expr, $t:ident => $body:expr) => {
        match $dyn {
            DynAltoTensor::Narrow($t) => $body,
            DynAltoTensor::Wide($t) => $body,
        }
    };
}

struct Resolved {
    workers: Workers,
    config: ExecutorConfig,
}

fn resolve(exec: &ExecArgs) -> Result<Resolved, Failure> {
    let threads = exec.threads.map(|t| t as usize).unwrap_or_else(Workers::available);
    let workers = Workers::new(threads)?;
    let config = ExecutorConfig {
        partitions: Some(exec.partitions.map(|p| p as usize).unwrap_or(threads)),
        strategy: exec.strategy.resolve(),
        temp_budget_bytes: exec.temp_budget_bytes,
    };
    Ok(Resolved { workers, config })
}

fn exec_echo(r: &Resolved, exec: &ExecArgs) -> Value {
    json!({
        "threads": r.workers.count(),
        "partitions": r.config.partitions,
        "strategy": format!("{:?}", exec.strategy).to_lowercase(),
        "temp_budget_bytes": r.config.temp_budget_bytes,
    })
}

fn dims_arg(d: &Option<crate::Dims>) -> Option<&[usize]> {
    d.as_ref().map(|d| d.0.as_slice())
}

pub fn convert(a: ConvertArgs) -> Result<(), Failure> {
    let loaded = load(&a.input.input, dims_arg(&a.input.dims))?;
    let format = a.format.unwrap_or_else(|| {
        if a.output.extension().is_some_and(|e| e == "tns") {
            Format::Tns
        } else {
            Format::Alto
        }
    });
    let t0 = Instant::now();
    write_atomic(&a.output, |w| {
        match format {
            Format::Alto => dispatch!(&loaded.tensor, t => write_alto_binary(t, w)?),
            Format::Tns => write_frostt(&loaded.tensor.to_coo(), w)?,
        }
        Ok(())
    })?;
    let format_name = match format {
        Format::Alto => "alto",
        Format::Tns => "tns",
    };
    let mut report = RunReport::new("convert", &a.input.input, TensorSummary::new(&loaded.tensor, loaded.format, 64));
    report.timing_s = loaded.timing;
    report.timing_s.insert("write_s".into(), t0.elapsed().as_secs_f64());
    report.config = json!({ "output": a.output.display().to_string(), "format": format_name, "dims": dims_arg(&a.input.dims) });
    report.decisions = json!({ "format": if a.format.is_some() { "requested" } else { "from output extension" } });
    report.result = json!({
        "output": a.output.display().to_string(),
        "format": format_name,
        "nnz": loaded.tensor.nnz(),
        "position_bits": loaded.tensor.width().bits(),
    });
    report.emit(&[("output".into(), format!("{} ({format_name})", a.output.display()))])
}

pub fn stats(a: StatsArgs) -> Result<(), Failure> {
    let loaded = load(&a.input.input, dims_arg(&a.input.dims))?;
    let summary = TensorSummary::new(&loaded.tensor, loaded.format, a.word_bits);
    let mut rows = vec![
        ("density".to_string(), format!("{:.3e}", summary.stats.density)),
        (
            "fiber reuse".to_string(),
            summary.stats.fiber_reuse.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" "),
        ),
        ("reuse class".to_string(), format!("{:?}", summary.stats.overall_class).to_lowercase()),
        (format!("ratio at W={}", a.word_bits), summary.stats.compression_ratio.to_string()),
    ];
    let ratio = summary.stats.compression_ratio.to_string();
    let mut result = json!({ "compression_ratio_exact": ratio });
    let mut timing = loaded.timing;
    if let Some(parts) = a.partitions {
        let t0 = Instant::now();
        let segs: SegmentSet = dispatch!(&loaded.tensor, t => SegmentSet::new(t, parts as usize)?);
        timing.insert("partition_s".into(), t0.elapsed().as_secs_f64());
        let order = loaded.tensor.shape().order();
        let mut overlaps = Vec::new();
        for (i, x) in segs.segments().iter().enumerate() {
            for (j, y) in segs.segments().iter().enumerate().skip(i + 1) {
                for mode in 0..order {
                    if let Some(iv) = overlap(x, y, mode) {
                        overlaps.push(json!({ "segments": [i, j], "mode": mode, "start": iv.start, "end": iv.end }));
                    }
                }
            }
        }
        let boundary: Vec<usize> = (0..order).map(|m| segs.boundary_rows(m).len()).collect();
        rows.push(("segments".into(), segs.len().to_string()));
        result["segments"] = serde_json::to_value(segs.segments())?;
        result["overlaps"] = Value::Array(overlaps);
        result["boundary_rows"] = json!(boundary);
    }
    let mut report = RunReport::new("stats", &a.input.input, summary);
    report.timing_s = timing;
    report.config = json!({ "word_bits": a.word_bits, "partitions": a.partitions, "dims": dims_arg(&a.input.dims) });
    report.decisions = json!({ "partitions": a.partitions });
    report.result = result;
    report.emit(&rows)
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub fn bench_mttkrp(a: BenchArgs) -> Result<(), Failure> {
    let loaded = load(&a.input.input, dims_arg(&a.input.dims))?;
    let order = loaded.tensor.shape().order();
    let modes: Vec<usize> = if a.mode == "all" {
        (0..order).collect()
    } else {
        match a.mode.parse::<usize>() {
            Ok(m) if m < order => vec![m],
            _ => return Err(Failure::usage(format!("--mode must be `all` or below {order}, got {:?}", a.mode))),
        }
    };
    let r = resolve(&a.exec)?;
    let rank = a.rank as usize;
    let factors = cpd::init_factors::<f64>(loaded.tensor.shape(), rank, a.seed, false)?.factors;
    let mut timing = loaded.timing;
    let mut per_mode = Vec::new();
    let mut decisions = Vec::new();
    let mut rows = Vec::new();
    dispatch!(&loaded.tensor, t => {
        let t0 = Instant::now();
        let exec = Executor::new(t, r.workers.clone(), r.config.clone())?;
        timing.insert("partition_s".into(), t0.elapsed().as_secs_f64());
        for &mode in &modes {
            let t0 = Instant::now();
            let (_, decision) = exec.mttkrp(&factors, mode)?;
            let warmup = t0.elapsed().as_secs_f64();
            let mut times = Vec::with_capacity(a.iters as usize);
            for _ in 0..a.iters {
                let t0 = Instant::now();
                let out = exec.mttkrp(&factors, mode)?;
                times.push(t0.elapsed().as_secs_f64());
                std::hint::black_box(out);
            }
            let med = median(&mut times.clone());
            let flops = mttkrp_flops(t.nnz(), order, rank);
            rows.push((format!("mode {mode}"), format!("{:?} median {med:.6} s", decision.strategy)));
            per_mode.push(json!({
                "mode": mode,
                "strategy": decision.strategy,
                "warmup_s": warmup,
                "times_s": times,
                "median_s": med,
                "nnz_per_s": t.nnz() as f64 / med,
                "flops": flops,
                "gflops_per_s": flops as f64 / med / 1e9,
            }));
            decisions.push(decision);
        }
    });
    let mut report = RunReport::new("bench mttkrp", &a.input.input, TensorSummary::new(&loaded.tensor, loaded.format, 64));
    report.timing_s = timing;
    report.config = json!({
        "rank": rank,
        "modes": modes,
        "iters": a.iters,
        "seed": a.seed,
        "exec": exec_echo(&r, &a.exec),
        "dims": dims_arg(&a.input.dims),
    });
    report.decisions = json!({
        "threads": r.workers.count(),
        "partitions": r.config.partitions,
        "strategies": decisions,
    });
    report.result = json!({ "kernel": "mttkrp", "flops_per_nonzero": 2 * rank * (order - 1) + rank, "modes": per_mode });
    report.emit(&rows)
}

fn write_model(path: &Path, model: &Value) -> Result<(), Failure> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, model)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

pub fn cp_als(a: CpAlsArgs) -> Result<(), Failure> {
    let loaded = load(&a.input.input, dims_arg(&a.input.dims))?;
    let r = resolve(&a.exec)?;
    let config = CpAlsConfig {
        rank: a.rank as usize,
        max_iters: a.max_iters,
        fit_tol: a.tol,
        seed: a.seed,
        executor: r.config.clone(),
    };
    let t0 = Instant::now();
    let (model, trace) = dispatch!(&loaded.tensor, t => {
        let out = cpd::cp_als(t, &config, &r.workers)?;
        (serde_json::to_value(out.model.report(&out.trace))?, out.trace)
    });
    let mut timing = loaded.timing;
    timing.insert("decomposition_s".into(), t0.elapsed().as_secs_f64());
    timing.insert("mttkrp_s".into(), trace.mttkrp_time_s);
    if let Some(out) = &a.out {
        write_model(out, &model)?;
    }
    let final_fit = trace.fit.last().copied();
    let rows = vec![
        ("rank".to_string(), config.rank.to_string()),
        ("iterations".to_string(), trace.iterations.to_string()),
        ("final fit".to_string(), final_fit.map_or("-".into(), |f| format!("{f:.6}"))),
        ("strategies".to_string(), trace.decisions.iter().map(|d| format!("{:?}", d.strategy)).collect::<Vec<_>>().join(" ")),
    ];
    let mut report = RunReport::new("cp-als", &a.input.input, TensorSummary::new(&loaded.tensor, loaded.format, 64));
    report.timing_s = timing;
    report.config = json!({ "algorithm": &config, "exec": exec_echo(&r, &a.exec), "out": a.out.as_ref().map(|p| p.display().to_string()), "dims": dims_arg(&a.input.dims) });
    report.decisions = json!({ "threads": r.workers.count(), "partitions": r.config.partitions, "strategies": trace.decisions });
    report.result = json!({
        "final_fit": final_fit,
        "iterations": trace.iterations,
        "converged": trace.converged,
        "model_path": a.out.as_ref().map(|p| p.display().to_string()),
        "model": if a.out.is_some() { Value::Null } else { model },
    });
    report.emit(&rows)
}

pub fn cp_apr(a: CpAprArgs) -> Result<(), Failure> {
    let loaded = load(&a.input.input, dims_arg(&a.input.dims))?;
    let r = resolve(&a.exec)?;
    let config = CpAprConfig {
        rank: a.rank as usize,
        max_outer: a.max_outer,
        max_inner: a.max_inner as usize,
        tau: a.tau,
        kappa: a.kappa,
        kappa_tol: a.kappa_tol,
        epsilon: a.eps,
        memory: match a.mem {
            MemArg::Auto => MemoryMode::Auto,
            MemArg::Pre => MemoryMode::Pre,
            MemArg::Otf => MemoryMode::Otf,
        },
        fast_memory_bytes: a.fast_memory_bytes,
        seed: a.seed,
        executor: r.config.clone(),
    };
    let t0 = Instant::now();
    let (model, trace) = dispatch!(&loaded.tensor, t => {
        let out = cpd::cp_apr_mu(t, &config, &r.workers)?;
        (serde_json::to_value(out.model.report(&out.trace))?, out.trace)
    });
    let mut timing = loaded.timing;
    timing.insert("decomposition_s".into(), t0.elapsed().as_secs_f64());
    timing.insert("pi_s".into(), trace.pi_time_s);
    timing.insert("phi_s".into(), trace.phi_time_s);
    if let Some(out) = &a.out {
        write_model(out, &model)?;
    }
    let final_kkt = trace.kkt.last().map(|k| k.iter().copied().fold(0.0, f64::max));
    let rows = vec![
        ("rank".to_string(), config.rank.to_string()),
        ("outer iterations".to_string(), trace.outer_iterations.to_string()),
        ("converged".to_string(), trace.converged.to_string()),
        ("final kkt".to_string(), final_kkt.map_or("-".into(), |k| format!("{k:.3e}"))),
        ("memory mode".to_string(), format!("{:?} ({})", trace.memory.mode, trace.memory.reason)),
        ("strategies".to_string(), trace.decisions.iter().map(|d| format!("{:?}", d.strategy)).collect::<Vec<_>>().join(" ")),
    ];
    let mut report = RunReport::new("cp-apr", &a.input.input, TensorSummary::new(&loaded.tensor, loaded.format, 64));
    report.timing_s = timing;
    report.config = json!({ "algorithm": &config, "exec": exec_echo(&r, &a.exec), "out": a.out.as_ref().map(|p| p.display().to_string()), "dims": dims_arg(&a.input.dims) });
    report.decisions = json!({
        "threads": r.workers.count(),
        "partitions": r.config.partitions,
        "strategies": trace.decisions,
        "memory": trace.memory,
    });
    report.result = json!({
        "final_kkt": final_kkt,
        "outer_iterations": trace.outer_iterations,
        "converged": trace.converged,
        "final_log_likelihood": trace.log_likelihood.last(),
        "non_integer_values": trace.non_integer_values,
        "model_path": a.out.as_ref().map(|p| p.display().to_string()),
        "model": if a.out.is_some() { Value::Null } else { model },
    });
    report.emit(&rows)
}
