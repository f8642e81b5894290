//! Party execution contexts and the drivers that run them.
//!
//! A [`PartyContext`] bundles one party's links, triple source, leakage
//! ledger and randomness. [`run_parties_simulated`] hosts every party on its
//! own thread over in-memory channels; [`run_party_tcp`] hosts a single party
//! over sockets. Given equal seeds the two produce identical bits.

pub mod collective;
pub mod frame;
pub mod transport;
pub mod triples;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use crate::beaver::{AllReduce, BeaverTriple};
use crate::error::{Error, Result};
use crate::leakage::{LeakageEvent, LeakageLedger};
use crate::sharing::{NoiseSpec, SecretTensor, TripleKind, TripleSpec};
use crate::tensor::{uniform, RandomSource, Tensor};

pub use collective::Collective;
pub use transport::{memory_mesh, tcp_connect, Endpoint, TcpServer};
pub use triples::{triple_file, FileTriples, MemoryTriples, SeededDealer, TripleProvider};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

const COMMON_STREAM: u64 = 1;
const DEALER_STREAM: u64 = 2;
const PARTY_STREAM_BASE: u64 = 16;

/// Where each party's triples come from.
#[derive(Clone, Debug, PartialEq)]
pub enum TripleSource {
    /// Lockstep seeded dealer (simulation and tests).
    Seeded,
    /// Seeded dealer that also records every party's shares under a directory.
    SeededTee(PathBuf),
    /// Pre-dealt per-party files in a directory.
    Files(PathBuf),
}

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub n_parties: usize,
    pub seed: u64,
    pub noise: NoiseSpec,
    pub timeout: Duration,
    pub triples: TripleSource,
}

impl SessionConfig {
    pub fn new(n_parties: usize, seed: u64, noise: NoiseSpec) -> Self {
        SessionConfig {
            n_parties,
            seed,
            noise,
            timeout: DEFAULT_TIMEOUT,
            triples: TripleSource::Seeded,
        }
    }

    fn provider(&self, party: usize) -> Result<Box<dyn TripleProvider>> {
        let rng = RandomSource::new(self.seed, DEALER_STREAM);
        Ok(match &self.triples {
            TripleSource::Seeded => Box::new(SeededDealer::new(party, self.n_parties, rng)?),
            TripleSource::SeededTee(dir) => Box::new(
                SeededDealer::new(party, self.n_parties, rng)?.with_tee(dir, self.noise.gamma())?,
            ),
            TripleSource::Files(dir) => Box::new(FileTriples::new(dir, party)),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n_parties < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 parties, got {}", self.n_parties)));
        }
        Ok(())
    }
}

/// One party's view of a running session.
pub struct PartyContext {
    net: Collective,
    triples: Box<dyn TripleProvider>,
    ledger: LeakageLedger,
    noise: NoiseSpec,
    session: u64,
    rng: RandomSource,
    common: RandomSource,
    used: BTreeMap<TripleKind, u64>,
}

impl PartyContext {
    pub fn new(ep: Endpoint, config: &SessionConfig, triples: Box<dyn TripleProvider>) -> Self {
        let party = ep.party();
        PartyContext {
            net: Collective::new(ep),
            triples,
            ledger: LeakageLedger::new(),
            noise: config.noise,
            session: config.seed,
            rng: RandomSource::new(config.seed, PARTY_STREAM_BASE + party as u64),
            common: RandomSource::new(config.seed, COMMON_STREAM),
            used: BTreeMap::new(),
        }
    }

    pub fn party_id(&self) -> usize {
        self.net.party()
    }

    pub fn n_parties(&self) -> usize {
        self.net.n_parties()
    }

    pub fn session(&self) -> u64 {
        self.session
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn ledger(&self) -> &LeakageLedger {
        &self.ledger
    }

    pub fn charge(&mut self, description: &str, event: LeakageEvent, count: u64) -> Result<()> {
        self.ledger.charge(description, event, count)
    }

    /// Randomness private to this party.
    pub fn rng(&mut self) -> &mut RandomSource {
        &mut self.rng
    }

    /// Randomness every party draws identically, for public choices such as
    /// minibatch permutations.
    pub fn common_rng(&mut self) -> &mut RandomSource {
        &mut self.common
    }

    pub fn frames_sent(&self) -> u64 {
        self.net.frames_sent()
    }

    pub fn rounds(&self) -> u64 {
        self.net.rounds()
    }

    pub fn triples_used(&self) -> &BTreeMap<TripleKind, u64> {
        &self.used
    }

    pub fn triple(&mut self, spec: &TripleSpec) -> Result<BeaverTriple> {
        let t = self.triples.next_triple(spec)?;
        *self.used.entry(spec.kind).or_default() += 1;
        Ok(t)
    }

    /// Shares a secret held by `owner`. Non-owners' shares are masks drawn
    /// from common randomness; the owner's share is `x` minus all masks.
    pub fn share_input(
        &mut self,
        owner: usize,
        x: Option<&Tensor>,
        dims: &[usize],
        beta: f64,
        label: &str,
    ) -> Result<SecretTensor> {
        let (me, n) = (self.party_id(), self.n_parties());
        if owner >= n {
            return Err(Error::InvalidArgument(format!("owner {owner} outside {n} parties")));
        }
        let noise = self.noise.with_beta(beta)?;
        let masks = (0..n)
            .filter(|&p| p != owner)
            .map(|p| Ok((p, uniform(dims, noise.gamma(), &mut self.common)?)))
            .collect::<Result<Vec<_>>>()?;
        let share = if me == owner {
            let x = x.ok_or_else(|| Error::InvalidArgument("owner must supply the secret".into()))?;
            if x.dims() != dims {
                return Err(Error::Shape(format!("secret dims {:?} vs declared {dims:?}", x.dims())));
            }
            let m = x.max_abs();
            if m > beta {
                return Err(Error::BoundViolation { value: m, bound: beta });
            }
            masks.iter().try_fold(x.clone(), |acc, (_, y)| acc.sub(y))?
        } else {
            masks
                .into_iter()
                .find(|(p, _)| *p == me)
                .map(|(_, y)| y)
                .expect("non-owner has a mask")
        };
        let entries: u64 = dims.iter().product::<usize>() as u64;
        self.charge(
            label,
            LeakageEvent::Masking {
                beta,
                gamma: noise.gamma(),
            },
            entries,
        )?;
        Ok(SecretTensor::new(share, me, self.session))
    }

    /// A public value in shared form: party 0 holds it, the others hold zeros.
    pub fn public(&self, x: &Tensor) -> SecretTensor {
        let share = if self.party_id() == 0 {
            x.clone()
        } else {
            Tensor::zeros(x.dims())
        };
        SecretTensor::new(share, self.party_id(), self.session)
    }

    /// Opens a shared value to every party.
    pub fn reveal(&mut self, x: &SecretTensor) -> Result<Tensor> {
        self.net.all_reduce(x.share())
    }

    pub fn finish(&mut self) -> Result<()> {
        self.triples.finish()
    }

    pub fn collective(&mut self) -> &mut Collective {
        &mut self.net
    }
}

impl AllReduce for PartyContext {
    fn party_id(&self) -> usize {
        self.net.party()
    }

    fn n_parties(&self) -> usize {
        self.net.n_parties()
    }

    fn all_reduce_many(&mut self, local: &[&Tensor]) -> Result<Vec<Tensor>> {
        self.net.all_reduce_many(local)
    }
}

/// Picks the error that explains a failed run: a peer vanishing is usually a
/// consequence of some other party's failure.
fn root_cause(errors: Vec<Error>) -> Error {
    let mut errors = errors.into_iter();
    let first = errors.next().expect("at least one error");
    if !matches!(first, Error::PeerUnreachable(_)) {
        return first;
    }
    errors
        .find(|e| !matches!(e, Error::PeerUnreachable(_)))
        .unwrap_or(first)
}

fn run_one<T>(
    ep: Endpoint,
    config: &SessionConfig,
    program: &(impl Fn(&mut PartyContext) -> Result<T> + Sync),
) -> Result<T> {
    let provider = config.provider(ep.party())?;
    let mut ctx = PartyContext::new(ep, config, provider);
    let out = program(&mut ctx)?;
    ctx.finish()?;
    Ok(out)
}

/// Runs `program` on every party in-process; outputs are indexed by party.
pub fn run_parties_simulated<T, F>(config: &SessionConfig, program: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut PartyContext) -> Result<T> + Sync,
{
    config.validate()?;
    let endpoints = memory_mesh(config.n_parties, config.timeout);
    let results: Vec<Result<T>> = std::thread::scope(|s| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .map(|ep| {
                let program = &program;
                s.spawn(move || run_one(ep, config, program))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::ProtocolDesync("party thread panicked".into()))))
            .collect()
    });
    let mut outs = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(v) => outs.push(v),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(outs)
    } else {
        Err(root_cause(errors))
    }
}

/// Runs `program` as party `party`; party 0 listens on `addr`, the others
/// connect to it.
pub fn run_party_tcp<T>(
    config: &SessionConfig,
    party: usize,
    addr: &str,
    program: impl Fn(&mut PartyContext) -> Result<T> + Sync,
) -> Result<T> {
    config.validate()?;
    let ep = if party == 0 {
        TcpServer::bind(addr)?.accept(config.n_parties, config.timeout)?
    } else {
        tcp_connect(addr, party, config.n_parties, config.timeout)?
    };
    run_one(ep, config, &program)
}

/// Like [`run_party_tcp`] for party 0, with an already-bound listener.
pub fn run_party_tcp_server<T>(
    config: &SessionConfig,
    server: TcpServer,
    program: impl Fn(&mut PartyContext) -> Result<T> + Sync,
) -> Result<T> {
    config.validate()?;
    let ep = server.accept(config.n_parties, config.timeout)?;
    run_one(ep, config, &program)
}
