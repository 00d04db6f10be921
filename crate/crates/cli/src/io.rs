use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use alto_core::tensor::{parse_frostt, read_alto_binary, ALTO_MAGIC};
use alto_core::{CooTensorF64, DynAltoTensorF64, Error};

use crate::Failure;

pub struct Loaded {
    pub tensor: DynAltoTensorF64,
    pub format: &'static str,
    pub timing: BTreeMap<String, f64>,
}

/// Reads a tensor, telling binary from text by the leading magic bytes.
pub fn load(path: &Path, dims: Option<&[usize]>) -> Result<Loaded, Failure> {
    let mut file = File::open(path).map_err(|e| anyhow::anyhow!("cannot open {}: {e}", path.display()))?;
    let mut head = [0u8; 4];
    let got = read_prefix(&mut file, &mut head)?;
    let file = File::open(path)?;
    let mut timing = BTreeMap::new();
    let t0 = Instant::now();
    if got == 4 && head == ALTO_MAGIC {
        let tensor: DynAltoTensorF64 = read_alto_binary(BufReader::new(file))
            .map_err(|e| anyhow::Error::new(e).context(format!("reading {}", path.display())))?;
        timing.insert("read_s".into(), t0.elapsed().as_secs_f64());
        if let Some(d) = dims {
            if d != tensor.shape().dims() {
                return Err(Error::DimensionMismatch(format!(
                    "--dims {d:?} disagree with the stored shape {}",
                    tensor.shape()
                ))
                .into());
            }
        }
        return Ok(Loaded { tensor, format: "alto", timing });
    }
    let coo: CooTensorF64 = parse_frostt(BufReader::new(file), dims)
        .map_err(|e| anyhow::Error::new(e).context(format!("parsing {}", path.display())))?;
    timing.insert("parse_s".into(), t0.elapsed().as_secs_f64());
    let (tensor, gen) = DynAltoTensorF64::from_coo_timed(&coo)?;
    timing.insert("linearize_s".into(), gen.linearize.as_secs_f64());
    timing.insert("sort_s".into(), gen.sort.as_secs_f64());
    Ok(Loaded { tensor, format: "tns", timing })
}

fn read_prefix(file: &mut File, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match file.read(&mut buf[got..])? {
            0 => break,
            n => got += n,
        }
    }
    Ok(got)
}

/// Writes through a temporary file in the destination directory, then renames
/// it into place; nothing is left behind on failure.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| anyhow::anyhow!("cannot create a file in {}: {e}", dir.display()))?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        write(&mut out)?;
        out.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| anyhow::anyhow!("cannot write {}: {}", path.display(), e.error))?;
    Ok(())
}
