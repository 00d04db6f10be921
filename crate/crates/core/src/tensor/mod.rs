//! COO and linearized tensors, their file formats, and summary statistics.

mod alto;
mod binary;
mod coo;
mod frostt;
mod stats;

pub use alto::{alto_from_coo, alto_to_coo, AltoTensor, DynAltoTensor, GenerationTiming};
pub use binary::{read_alto_binary, write_alto_binary, ALTO_MAGIC, ALTO_VERSION};
pub use coo::CooTensor;
pub use frostt::{parse_frostt, write_frostt};
pub use stats::{compute_stats, ReuseClass, TensorStats};
