//! Wire frames carried by every transport.
//!
//! ```text
//! u32 len | u8 type | u64 tag | u32 seq | u8 rank | u64 dims[rank] | f64 payload
//! ```
//!
//! All integers little-endian; `len` counts the bytes after itself.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameKind {
    Contrib = 1,
    Result = 2,
}

impl FrameKind {
    fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(FrameKind::Contrib),
            2 => Ok(FrameKind::Result),
            other => Err(Error::ProtocolDesync(format!("unknown frame type {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub kind: FrameKind,
    pub tag: u64,
    pub seq: u32,
    pub tensor: Tensor,
}

impl Frame {
    /// Full encoding including the length prefix.
    pub fn encode(&self) -> Result<Vec<u8>> {
        let dims = self.tensor.dims();
        let rank = u8::try_from(dims.len())
            .map_err(|_| Error::Shape(format!("rank {} too large for a frame", dims.len())))?;
        let body_len = 1 + 8 + 4 + 1 + 8 * dims.len() + 8 * self.tensor.len();
        let len = u32::try_from(body_len)
            .map_err(|_| Error::Shape(format!("frame of {body_len} bytes too large")))?;
        let mut out = Vec::with_capacity(4 + body_len);
        out.extend_from_slice(&len.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.tag.to_le_bytes());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.push(rank);
        for &d in dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in self.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    /// Decodes a frame body (everything after the length prefix).
    pub fn decode(body: &[u8]) -> Result<Frame> {
        let mut cur = Cursor { buf: body, pos: 0 };
        let kind = FrameKind::from_code(cur.take(1)?[0])?;
        let tag = u64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes"));
        let seq = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
        let rank = cur.take(1)?[0] as usize;
        let dims = (0..rank)
            .map(|_| cur.take(8).map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")) as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let data = cur
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if cur.pos != body.len() {
            return Err(Error::ProtocolDesync(format!(
                "frame has {} trailing bytes",
                body.len() - cur.pos
            )));
        }
        let tensor = Tensor::new(dims, data).map_err(|e| Error::ProtocolDesync(e.to_string()))?;
        Ok(Frame {
            kind,
            tag,
            seq,
            tensor,
        })
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::ProtocolDesync(format!("frame truncated at byte {}", self.pos))
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}
