//! `EMB1` container: magic, u32 dim, u64 count, then per record two
//! u16-length-prefixed UTF-8 strings and `dim` little-endian `f32`s.

use super::{EmbeddingDataset, EmbeddingRecord};
use crate::error::{Error, Result};
use crate::Scalar;

pub(super) const MAGIC: &[u8; 4] = b"EMB1";

pub(super) fn encode<S: Scalar>(ds: &EmbeddingDataset<S>) -> Result<Vec<u8>> {
    let dim = u32::try_from(ds.dim()).map_err(|_| Error::invalid("dimension exceeds u32"))?;
    let per_record = 4 + 4 * ds.dim() + 32;
    let mut out = Vec::with_capacity(16 + ds.len() * per_record);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    for r in ds.records() {
        put_str(&mut out, &r.image_id)?;
        put_str(&mut out, &r.identity)?;
        for v in &r.vector {
            let narrow = v.to_f32().unwrap_or(f32::NAN);
            if !narrow.is_finite() {
                return Err(Error::NonFinite(format!("record `{}` does not fit in f32", r.image_id)));
            }
            out.extend_from_slice(&narrow.to_le_bytes());
        }
    }
    Ok(out)
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| Error::invalid(format!("string longer than 65535 bytes: `{s}`")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                format!("offset {}", self.pos),
                format!("truncated file while reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u16(what)? as usize;
        let at = self.pos;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::format(format!("offset {at}"), format!("{what} is not valid UTF-8")))
    }
}

pub(super) fn decode<S: Scalar>(bytes: &[u8]) -> Result<EmbeddingDataset<S>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::format("offset 0", "bad magic, expected `EMB1`"));
    }
    let dim = cur.u32("dimension")? as usize;
    if dim == 0 {
        return Err(Error::format("offset 4", "dimension must be positive"));
    }
    let count = cur.u64("record count")?;
    let mut ds = EmbeddingDataset::new(dim)?;
    for row in 0..count {
        let start = cur.pos;
        let at = || format!("record {} (offset {start})", row + 1);
        let image_id = cur.string("image id")?;
        let identity = cur.string("identity")?;
        let raw = cur.take(4 * dim, "vector")?;
        let vector: Vec<S> = raw
            .chunks_exact(4)
            .map(|c| S::from_f32_exact(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        ds.push(EmbeddingRecord::new(image_id, identity, vector))
            .map_err(|e| Error::format(at(), e.to_string()))?;
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(
            format!("offset {}", cur.pos),
            format!("{} trailing bytes after last record", bytes.len() - cur.pos),
        ));
    }
    Ok(ds)
}
