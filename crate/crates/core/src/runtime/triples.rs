//! Sources of Beaver triples for a running party.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::beaver::BeaverTriple;
use crate::error::{Error, Result};
use crate::sharing::{Dealer, TripleKind, TripleSpec, TripleStore, TripleStoreReader, TripleStoreWriter};
use crate::tensor::RandomSource;

/// Hands out this party's share of the next triple matching `spec`.
pub trait TripleProvider: Send {
    fn next_triple(&mut self, spec: &TripleSpec) -> Result<BeaverTriple>;

    /// Flushes any persistent state.
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Per-party triple file name inside a dealing directory.
pub fn triple_file(dir: &Path, party: usize, kind: TripleKind) -> PathBuf {
    dir.join(format!("party{party}.{}.fpt", kind.name()))
}

/// Every party runs an identically seeded dealer in lockstep and keeps only
/// its own share. Stands in for a trusted dealer in simulations and tests;
/// optionally records the shares so a later run can replay them from files.
pub struct SeededDealer {
    party: usize,
    dealer: Dealer,
    tee: Option<BTreeMap<TripleKind, TripleStoreWriter>>,
}

impl SeededDealer {
    pub fn new(party: usize, n_parties: usize, rng: RandomSource) -> Result<Self> {
        Ok(SeededDealer {
            party,
            dealer: Dealer::new(n_parties, rng)?,
            tee: None,
        })
    }

    /// Also writes this party's shares to one file per kind under `dir`.
    pub fn with_tee(mut self, dir: &Path, gamma: f64) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let writers = TripleKind::ALL
            .into_iter()
            .map(|k| Ok((k, TripleStoreWriter::create(&triple_file(dir, self.party, k), k, gamma)?)))
            .collect::<Result<_>>()?;
        self.tee = Some(writers);
        Ok(self)
    }
}

impl TripleProvider for SeededDealer {
    fn next_triple(&mut self, spec: &TripleSpec) -> Result<BeaverTriple> {
        let triple = self.dealer.deal(spec)?.swap_remove(self.party);
        if let Some(tee) = self.tee.as_mut() {
            tee.get_mut(&spec.kind).expect("writer per kind").append(&triple)?;
        }
        Ok(triple)
    }

    fn finish(&mut self) -> Result<()> {
        if let Some(tee) = self.tee.take() {
            for w in tee.into_values() {
                w.finish()?;
            }
        }
        Ok(())
    }
}

/// Streams triples from the per-kind files of one party.
pub struct FileTriples {
    dir: PathBuf,
    party: usize,
    readers: BTreeMap<TripleKind, TripleStoreReader>,
}

impl FileTriples {
    pub fn new(dir: &Path, party: usize) -> Self {
        FileTriples {
            dir: dir.to_path_buf(),
            party,
            readers: BTreeMap::new(),
        }
    }
}

impl TripleProvider for FileTriples {
    fn next_triple(&mut self, spec: &TripleSpec) -> Result<BeaverTriple> {
        if !self.readers.contains_key(&spec.kind) {
            let path = triple_file(&self.dir, self.party, spec.kind);
            let reader = TripleStoreReader::open(&path).map_err(|e| match e {
                Error::Io(io) => Error::InvalidArgument(format!("triple file {}: {io}", path.display())),
                other => other,
            })?;
            self.readers.insert(spec.kind, reader);
        }
        self.readers.get_mut(&spec.kind).expect("inserted").next_for(spec)
    }
}

/// Serves triples from in-memory stores, checking shapes.
pub struct MemoryTriples {
    stores: BTreeMap<TripleKind, TripleStore>,
}

impl MemoryTriples {
    pub fn new(stores: impl IntoIterator<Item = TripleStore>) -> Self {
        MemoryTriples {
            stores: stores.into_iter().map(|s| (s.kind(), s)).collect(),
        }
    }
}

impl TripleProvider for MemoryTriples {
    fn next_triple(&mut self, spec: &TripleSpec) -> Result<BeaverTriple> {
        let store = self
            .stores
            .get_mut(&spec.kind)
            .ok_or(Error::TriplesExhausted { consumed: 0 })?;
        let triple = store.take()?;
        for (c, d) in triple.components().iter().zip(spec.component_dims()?) {
            if c.dims() != d.as_slice() {
                return Err(Error::Shape(format!(
                    "stored {} triple has dims {:?}, protocol expects {d:?}",
                    spec.kind.name(),
                    c.dims()
                )));
            }
        }
        Ok(triple)
    }
}
