//! Per-party triple files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "FPT1" | u8 kind | u64 count | u64 gamma (IEEE-754 bits)
//! then per triple, per component in dealing order:
//!     u8 rank | u64 dims[rank] | f64 payload[prod(dims)]
//! ```

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::dealer::{TripleKind, TripleSpec};
use crate::beaver::BeaverTriple;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"FPT1";
const COUNT_OFFSET: u64 = 5;

/// Single-use queue of one party's triple shares of a single kind.
#[derive(Clone, Debug)]
pub struct TripleStore {
    kind: TripleKind,
    gamma: f64,
    triples: VecDeque<BeaverTriple>,
    consumed: u64,
}

impl TripleStore {
    pub fn new(kind: TripleKind, gamma: f64) -> Self {
        TripleStore {
            kind,
            gamma,
            triples: VecDeque::new(),
            consumed: 0,
        }
    }

    pub fn kind(&self) -> TripleKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn remaining(&self) -> usize {
        self.triples.len()
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn push(&mut self, triple: BeaverTriple) -> Result<()> {
        if triple.kind() != self.kind {
            return Err(Error::InvalidArgument(format!(
                "{} triple pushed into a {} store",
                triple.kind().name(),
                self.kind.name()
            )));
        }
        self.triples.push_back(triple);
        Ok(())
    }

    /// Removes the next triple; every triple leaves the store exactly once.
    pub fn take(&mut self) -> Result<BeaverTriple> {
        let t = self.triples.pop_front().ok_or(Error::TriplesExhausted {
            consumed: self.consumed,
        })?;
        self.consumed += 1;
        Ok(t)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = TripleStoreWriter::create(path, self.kind, self.gamma)?;
        for t in &self.triples {
            w.append(t)?;
        }
        w.finish()
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut r = TripleStoreReader::open(path)?;
        let mut store = TripleStore::new(r.kind(), r.gamma());
        while let Some(t) = r.next_any()? {
            store.push(t)?;
        }
        Ok(store)
    }
}

fn write_tensor(w: &mut impl Write, t: &Tensor) -> Result<()> {
    let rank = u8::try_from(t.dims().len())
        .map_err(|_| Error::Shape(format!("rank {} too large", t.dims().len())))?;
    w.write_all(&[rank])?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_or_format(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(None, format!("truncated triple file while reading {what}"))
        } else {
            Error::Io(e)
        }
    })
}

pub(crate) fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact_or_format(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_tensor(r: &mut impl Read) -> Result<Tensor> {
    let mut rank = [0u8; 1];
    read_exact_or_format(r, &mut rank, "rank")?;
    let dims = (0..rank[0])
        .map(|_| read_u64(r, "dims").map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let n: usize = dims.iter().product();
    let mut raw = vec![0u8; n * 8];
    read_exact_or_format(r, &mut raw, "payload")?;
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Tensor::new(dims, data).map_err(|e| Error::format(None, e.to_string()))
}

/// Streams triples to disk; the header count is patched in by [`finish`](Self::finish).
pub struct TripleStoreWriter {
    out: BufWriter<File>,
    kind: TripleKind,
    count: u64,
}

impl TripleStoreWriter {
    pub fn create(path: &Path, kind: TripleKind, gamma: f64) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&[kind.code()])?;
        out.write_all(&0u64.to_le_bytes())?;
        out.write_all(&gamma.to_bits().to_le_bytes())?;
        Ok(TripleStoreWriter {
            out,
            kind,
            count: 0,
        })
    }

    pub fn append(&mut self, triple: &BeaverTriple) -> Result<()> {
        if triple.kind() != self.kind {
            return Err(Error::InvalidArgument(format!(
                "cannot append {} triple to {} file",
                triple.kind().name(),
                self.kind.name()
            )));
        }
        for c in triple.components() {
            write_tensor(&mut self.out, c)?;
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        let mut file = self.out.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        file.seek(SeekFrom::Start(COUNT_OFFSET))?;
        file.write_all(&self.count.to_le_bytes())?;
        file.flush()?;
        Ok(())
    }
}

/// Sequential reader over a triple file; triples are handed out once each.
pub struct TripleStoreReader {
    input: BufReader<File>,
    kind: TripleKind,
    gamma: f64,
    count: u64,
    consumed: u64,
}

impl TripleStoreReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut input = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        read_exact_or_format(&mut input, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::format(None, "bad triple file magic"));
        }
        let mut kind = [0u8; 1];
        read_exact_or_format(&mut input, &mut kind, "kind")?;
        let kind = TripleKind::from_code(kind[0])?;
        let count = read_u64(&mut input, "count")?;
        let gamma = f64::from_bits(read_u64(&mut input, "gamma")?);
        Ok(TripleStoreReader {
            input,
            kind,
            gamma,
            count,
            consumed: 0,
        })
    }

    pub fn kind(&self) -> TripleKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    fn next_any(&mut self) -> Result<Option<BeaverTriple>> {
        if self.consumed == self.count {
            return Ok(None);
        }
        let comps = (0..self.kind.arity())
            .map(|_| read_tensor(&mut self.input))
            .collect::<Result<Vec<_>>>()?;
        self.consumed += 1;
        BeaverTriple::new(self.kind, comps).map(Some)
    }

    /// Next triple, checked against the shapes the caller expects.
    pub fn next_for(&mut self, spec: &TripleSpec) -> Result<BeaverTriple> {
        if spec.kind != self.kind {
            return Err(Error::InvalidArgument(format!(
                "requested a {} triple from a {} file",
                spec.kind.name(),
                self.kind.name()
            )));
        }
        let triple = self.next_any()?.ok_or(Error::TriplesExhausted {
            consumed: self.consumed,
        })?;
        let expected = spec.component_dims()?;
        for (c, d) in triple.components().iter().zip(&expected) {
            if c.dims() != d.as_slice() {
                return Err(Error::Shape(format!(
                    "stored triple {} has dims {:?}, protocol expects {d:?}",
                    self.consumed,
                    c.dims()
                )));
            }
        }
        Ok(triple)
    }
}
