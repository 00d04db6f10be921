//! Little-endian binary container for linearized tensors.
//!
//! ```text
//! "ALTO" | u32 version | u8 position bits | u8 order | u16 reserved (0)
//! order x u64 dims | u64 nnz | total_bits x u8 mode id (LSB first)
//! nnz x position word | nnz x f64 value
//! ```

use std::io::{Read, Write};

use super::{AltoTensor, DynAltoTensor};
use crate::{AltoLayout, Error, PositionWidth, PositionWord, Result, Scalar, TensorShape};

pub const ALTO_MAGIC: [u8; 4] = *b"ALTO";
pub const ALTO_VERSION: u32 = 1;

pub fn write_alto_binary<T: Scalar, P: PositionWord, W: Write>(
    tensor: &AltoTensor<T, P>,
    mut out: W,
) -> Result<()> {
    let layout = tensor.layout();
    let order = u8::try_from(layout.order())
        .map_err(|_| Error::InvalidArgument(format!("order {} exceeds 255", layout.order())))?;
    let nnz = tensor.nnz();
    let mut buf = Vec::with_capacity(32 + nnz * (P::WIDTH.bytes() + 8));
    buf.extend_from_slice(&ALTO_MAGIC);
    buf.extend_from_slice(&ALTO_VERSION.to_le_bytes());
    buf.push(P::WIDTH.bits() as u8);
    buf.push(order);
    buf.extend_from_slice(&0u16.to_le_bytes());
    for &d in layout.shape().dims() {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    buf.extend_from_slice(&(nnz as u64).to_le_bytes());
    buf.extend(layout.schedule().iter().map(|b| b.mode as u8));
    for &p in tensor.positions() {
        p.write_le(&mut buf);
    }
    for &v in tensor.values() {
        buf.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.at..end];
                self.at = end;
                Ok(s)
            }
            None => Err(Error::format(format!("truncated while reading {what}"))),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn read_alto_binary<T: Scalar, R: Read>(mut input: R) -> Result<DynAltoTensor<T>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, at: 0 };

    if cur.take(4, "magic")? != ALTO_MAGIC {
        return Err(Error::format("bad magic"));
    }
    let version = cur.u32("version")?;
    if version != ALTO_VERSION {
        return Err(Error::format(format!("unsupported version {version}")));
    }
    let width = match cur.u8("position width")? {
        64 => PositionWidth::W64,
        128 => PositionWidth::W128,
        w => return Err(Error::format(format!("position width {w} is not 64 or 128"))),
    };
    let order = cur.u8("order")? as usize;
    if cur.u16("reserved")? != 0 {
        return Err(Error::format("reserved header field is not zero"));
    }
    let mut dims = Vec::with_capacity(order);
    for _ in 0..order {
        let d = cur.u64("dims")?;
        dims.push(usize::try_from(d).map_err(|_| Error::format(format!("dimension {d} too large")))?);
    }
    let shape = TensorShape::new(dims).map_err(|e| Error::format(e.to_string()))?;
    let nnz = usize::try_from(cur.u64("nnz")?).map_err(|_| Error::format("nnz too large"))?;

    let expected = PositionWidth::for_bits(shape.total_bits())?;
    if expected != width {
        return Err(Error::format(format!(
            "{} index bits must use {}-bit positions, file declares {}",
            shape.total_bits(),
            expected.bits(),
            width.bits()
        )));
    }
    let modes: Vec<usize> =
        cur.take(shape.total_bits() as usize, "schedule")?.iter().map(|&m| m as usize).collect();
    let layout = AltoLayout::from_schedule(shape, &modes)?;

    let tensor = match width {
        PositionWidth::W64 => DynAltoTensor::Narrow(read_payload::<T, u64>(&mut cur, layout, nnz)?),
        PositionWidth::W128 => DynAltoTensor::Wide(read_payload::<T, u128>(&mut cur, layout, nnz)?),
    };
    if cur.at != bytes.len() {
        return Err(Error::format(format!("{} trailing bytes", bytes.len() - cur.at)));
    }
    Ok(tensor)
}

fn read_payload<T: Scalar, P: PositionWord>(
    cur: &mut Cursor<'_>,
    layout: AltoLayout,
    nnz: usize,
) -> Result<AltoTensor<T, P>> {
    let word = P::WIDTH.bytes();
    let pos_bytes = nnz.checked_mul(word).ok_or_else(|| Error::format("nnz too large"))?;
    let positions: Vec<P> = cur.take(pos_bytes, "positions")?.chunks_exact(word).map(P::read_le).collect();
    let val_bytes = nnz.checked_mul(8).ok_or_else(|| Error::format("nnz too large"))?;
    let values: Vec<T> = cur
        .take(val_bytes, "values")?
        .chunks_exact(8)
        .map(|b| T::from_f64_lossy(f64::from_le_bytes(b.try_into().expect("8 bytes"))))
        .collect();
    AltoTensor::from_parts(layout, positions, values).map_err(|e| match e {
        Error::Format(_) => e,
        other => Error::format(other.to_string()),
    })
}
