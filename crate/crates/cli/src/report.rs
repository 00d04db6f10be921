use std::collections::BTreeMap;
use std::path::Path;

use alto_core::tensor::{compute_stats, TensorStats};
use alto_core::DynAltoTensorF64;
use serde::Serialize;
use serde_json::Value;

use crate::{Failure, EXIT_INPUT, EXIT_NUMERICAL, EXIT_USAGE};

#[derive(Serialize)]
pub struct TensorSummary {
    pub dims: Vec<usize>,
    pub nnz: usize,
    pub index_bits: u32,
    pub position_bits: u32,
    /// Mode owning each position bit, most significant first.
    pub bit_layout: Vec<usize>,
    pub source_format: &'static str,
    pub stats: TensorStats,
}

impl TensorSummary {
    pub fn new(t: &DynAltoTensorF64, source_format: &'static str, word_bits: u32) -> Self {
        let layout = t.layout();
        Self {
            dims: t.shape().dims().to_vec(),
            nnz: t.nnz(),
            index_bits: layout.total_bits(),
            position_bits: t.width().bits(),
            bit_layout: layout.schedule_msb_first(),
            source_format,
            stats: compute_stats(t.shape(), t.nnz() as u64, word_bits),
        }
    }
}

/// Everything a run did: what it read, how it was configured, which
/// heuristics fired, how long each stage took and what it produced.
#[derive(Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub input: String,
    pub tensor: TensorSummary,
    pub config: Value,
    pub decisions: Value,
    pub timing_s: BTreeMap<String, f64>,
    pub result: Value,
}

impl RunReport {
    pub fn new(command: &'static str, input: &Path, tensor: TensorSummary) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            input: input.display().to_string(),
            tensor,
            config: Value::Null,
            decisions: Value::Null,
            timing_s: BTreeMap::new(),
            result: Value::Null,
        }
    }

    /// JSON on standard output, a short table on standard error.
    pub fn emit(&self, rows: &[(String, String)]) -> Result<(), Failure> {
        println!("{}", serde_json::to_string_pretty(self)?);
        let mut table = vec![
            ("command".to_string(), self.command.to_string()),
            ("input".to_string(), self.input.clone()),
            ("shape".to_string(), dims_text(&self.tensor.dims)),
            ("nonzeros".to_string(), self.tensor.nnz.to_string()),
            ("position bits".to_string(), format!("{} of {}", self.tensor.index_bits, self.tensor.position_bits)),
        ];
        table.extend_from_slice(rows);
        for (k, v) in &self.timing_s {
            table.push((k.replace('_', " "), format!("{v:.6}")));
        }
        print_table(&table);
        Ok(())
    }
}

pub fn dims_text(dims: &[usize]) -> String {
    dims.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

pub fn print_table(rows: &[(String, String)]) {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        eprintln!("{k:<width$}  {v}");
    }
}

pub fn print_error(f: &Failure) {
    let kind = match f.code {
        EXIT_USAGE => "usage",
        EXIT_INPUT => "input",
        EXIT_NUMERICAL => "numerical",
        _ => "internal",
    };
    let message = format!("{:#}", f.error);
    let json = serde_json::json!({ "error": { "kind": kind, "message": message, "exit_code": f.code } });
    println!("{json}");
    eprintln!("error: {message}");
}
