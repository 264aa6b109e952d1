//! `MPQT` tensor container.
//!
//! Layout, all little-endian: magic `MPQT`, u16 version, u8 nbits, u8 signed,
//! u8 rank, three reserved zero bytes, `rank` u32 dimensions, then the packed
//! u32 payload words.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{QuantError, QuantizedTensor, Result};

const MAGIC: &[u8; 4] = b"MPQT";
const VERSION: u16 = 1;

pub fn write_tensor_to<W: Write>(mut w: W, t: &QuantizedTensor) -> Result<()> {
    let rank = u8::try_from(t.shape.len()).map_err(|_| QuantError::BadFile("rank above 255".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[t.nbits as u8, t.signed as u8, rank, 0, 0, 0])?;
    for &d in &t.shape {
        let d = u32::try_from(d).map_err(|_| QuantError::BadFile(format!("dimension {d} too large")))?;
        w.write_all(&d.to_le_bytes())?;
    }
    for word in &t.data {
        w.write_all(&word.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor_from<R: Read>(mut r: R) -> Result<QuantizedTensor> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(QuantError::BadFile("missing MPQT magic".into()));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != VERSION {
        return Err(QuantError::BadFile(format!("unsupported version {version}")));
    }
    let nbits = u32::from(head[6]);
    if !matches!(nbits, 2 | 4 | 8 | 16) {
        return Err(QuantError::BadWidth(nbits));
    }
    let signed = match head[7] {
        0 => false,
        1 => true,
        v => return Err(QuantError::BadFile(format!("bad signed flag {v}"))),
    };
    let rank = head[8] as usize;
    let mut shape = Vec::with_capacity(rank);
    let mut buf = [0u8; 4];
    for _ in 0..rank {
        r.read_exact(&mut buf)?;
        shape.push(u32::from_le_bytes(buf) as usize);
    }
    let lanes: usize = shape.iter().product();
    let words = (lanes * nbits as usize).div_ceil(32);
    let mut data = Vec::with_capacity(words);
    for _ in 0..words {
        r.read_exact(&mut buf)?;
        data.push(u32::from_le_bytes(buf));
    }
    if r.read(&mut buf)? != 0 {
        return Err(QuantError::BadFile("trailing bytes after payload".into()));
    }
    let t = QuantizedTensor { shape, nbits, signed, data };
    let per = 32 / nbits as usize;
    if !lanes.is_multiple_of(per) {
        let used = (lanes % per) as u32 * nbits;
        if t.data.last().is_some_and(|&w| w >> used != 0) {
            return Err(QuantError::BadFile("non-zero padding lanes".into()));
        }
    }
    Ok(t)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &QuantizedTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor_to(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<QuantizedTensor> {
    read_tensor_from(BufReader::new(File::open(path)?))
}
