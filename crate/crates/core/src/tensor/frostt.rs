//! FROSTT `.tns` text: one nonzero per line, one-based indices then the value.

use std::io::{BufRead, Write};

use super::CooTensor;
use crate::{Error, Result, Scalar, TensorShape};

/// Parses a FROSTT text tensor into a canonical [`CooTensor`].
///
/// Lines starting with `#` and blank lines are skipped. The mode count comes
/// from the first entry line. Without `dims` the shape is the per-mode maximum
/// index; with `dims` every index is checked against it.
pub fn parse_frostt<T: Scalar, R: BufRead>(reader: R, dims: Option<&[usize]>) -> Result<CooTensor<T>> {
    let mut order = dims.map(|d| d.len());
    let mut coords: Vec<usize> = Vec::new();
    let mut values: Vec<T> = Vec::new();
    let mut extent: Vec<usize> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let n = *order.get_or_insert(tokens.len().saturating_sub(1));
        if n == 0 || tokens.len() != n + 1 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {} indices and a value, found {} fields", n.max(1), tokens.len()),
            });
        }
        if extent.is_empty() {
            extent = vec![0; n];
        }
        for (mode, tok) in tokens[..n].iter().enumerate() {
            let index: usize = tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("index {tok:?} is not a non-negative integer"),
            })?;
            if index == 0 {
                return Err(Error::Parse { line: lineno, msg: "indices are one-based; found 0".into() });
            }
            if let Some(d) = dims {
                if index > d[mode] {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("index {index} exceeds mode {mode} length {}", d[mode]),
                    });
                }
            }
            extent[mode] = extent[mode].max(index);
            coords.push(index - 1);
        }
        let raw: f64 = tokens[n].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("value {:?} is not a number", tokens[n]),
        })?;
        if !raw.is_finite() {
            return Err(Error::Parse { line: lineno, msg: format!("value {raw} is not finite") });
        }
        values.push(T::from_f64_lossy(raw));
    }

    if values.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let shape = TensorShape::new(dims.map(<[usize]>::to_vec).unwrap_or(extent))?;
    let tensor = CooTensor::new(shape, coords, values)?.canonicalize();
    if tensor.nnz() == 0 {
        return Err(Error::EmptyTensor);
    }
    Ok(tensor)
}

/// Writes one line per nonzero with one-based indices; values use the
/// shortest representation that parses back to the same number.
pub fn write_frostt<T: Scalar, W: Write>(tensor: &CooTensor<T>, mut out: W) -> Result<()> {
    let mut line = String::new();
    for (coords, value) in tensor.entries() {
        line.clear();
        for c in coords {
            line.push_str(&(c + 1).to_string());
            line.push(' ');
        }
        line.push_str(&value.to_string());
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}
