//! Point-to-point links between parties.
//!
//! Both transports deliver encoded frames into a per-peer queue so that the
//! collective above them is transport-agnostic. The TCP transport uses a star:
//! party 0 listens and every other party connects to it.

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

const HELLO: &[u8; 4] = b"FPMH";
const RETRY: Duration = Duration::from_millis(25);

type Incoming = Receiver<Result<Vec<u8>>>;

enum Outgoing {
    Memory(Sender<Result<Vec<u8>>>),
    Tcp(BufWriter<TcpStream>),
}

/// One party's links to its peers.
pub struct Endpoint {
    party: usize,
    n_parties: usize,
    timeout: Duration,
    out: Vec<Option<Outgoing>>,
    inc: Vec<Option<Incoming>>,
    sockets: Vec<TcpStream>,
    readers: Vec<JoinHandle<()>>,
    frames_sent: u64,
}

impl Endpoint {
    fn empty(party: usize, n_parties: usize, timeout: Duration) -> Self {
        Endpoint {
            party,
            n_parties,
            timeout,
            out: (0..n_parties).map(|_| None).collect(),
            inc: (0..n_parties).map(|_| None).collect(),
            sockets: Vec::new(),
            readers: Vec::new(),
            frames_sent: 0,
        }
    }

    pub fn party(&self) -> usize {
        self.party
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn frames_sent(&self) -> u64 {
        self.frames_sent
    }

    /// Sends one encoded frame (length prefix included) to `to`.
    pub fn send(&mut self, to: usize, frame: &[u8]) -> Result<()> {
        let link = self
            .out
            .get_mut(to)
            .and_then(Option::as_mut)
            .ok_or_else(|| Error::ProtocolDesync(format!("party {} has no link to {to}", self.party)))?;
        match link {
            Outgoing::Memory(tx) => tx
                .send(Ok(frame[4..].to_vec()))
                .map_err(|_| Error::PeerUnreachable(format!("party {to} has gone away")))?,
            Outgoing::Tcp(w) => w
                .write_all(frame)
                .and_then(|_| w.flush())
                .map_err(|e| Error::PeerUnreachable(format!("send to party {to}: {e}")))?,
        }
        self.frames_sent += 1;
        Ok(())
    }

    /// Next frame body from `from`, waiting at most the configured timeout.
    pub fn recv(&mut self, from: usize) -> Result<Vec<u8>> {
        let rx = self
            .inc
            .get(from)
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::ProtocolDesync(format!("party {} has no link from {from}", self.party)))?;
        match rx.recv_timeout(self.timeout) {
            Ok(msg) => msg,
            Err(RecvTimeoutError::Timeout) => Err(Error::PeerUnreachable(format!(
                "no message from party {from} within {:?}",
                self.timeout
            ))),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::PeerUnreachable(format!("party {from} has gone away")))
            }
        }
    }

    fn attach_tcp(&mut self, peer: usize, stream: TcpStream) -> Result<()> {
        stream.set_nodelay(true)?;
        let (tx, rx) = mpsc::channel();
        let reader = stream.try_clone()?;
        self.sockets.push(stream.try_clone()?);
        self.readers.push(thread::spawn(move || read_frames(reader, peer, tx)));
        self.out[peer] = Some(Outgoing::Tcp(BufWriter::new(stream)));
        self.inc[peer] = Some(rx);
        Ok(())
    }
}

impl Drop for Endpoint {
    fn drop(&mut self) {
        for s in &self.sockets {
            let _ = s.shutdown(Shutdown::Both);
        }
        for h in self.readers.drain(..) {
            let _ = h.join();
        }
    }
}

fn read_frames(stream: TcpStream, peer: usize, tx: Sender<Result<Vec<u8>>>) {
    let mut r = BufReader::new(stream);
    loop {
        let mut len = [0u8; 4];
        let msg = r.read_exact(&mut len).and_then(|_| {
            let mut body = vec![0u8; u32::from_le_bytes(len) as usize];
            r.read_exact(&mut body).map(|_| body)
        });
        match msg {
            Ok(body) => {
                if tx.send(Ok(body)).is_err() {
                    return;
                }
            }
            Err(e) => {
                let _ = tx.send(Err(Error::PeerUnreachable(format!("connection to party {peer}: {e}"))));
                return;
            }
        }
    }
}

/// Fully connected in-process endpoints, indexed by party.
pub fn memory_mesh(n_parties: usize, timeout: Duration) -> Vec<Endpoint> {
    let mut eps: Vec<Endpoint> = (0..n_parties)
        .map(|p| Endpoint::empty(p, n_parties, timeout))
        .collect();
    for from in 0..n_parties {
        for to in 0..n_parties {
            if from != to {
                let (tx, rx) = mpsc::channel();
                eps[from].out[to] = Some(Outgoing::Memory(tx));
                eps[to].inc[from] = Some(rx);
            }
        }
    }
    eps
}

fn hello(party: usize, n_parties: usize) -> [u8; 12] {
    let mut b = [0u8; 12];
    b[..4].copy_from_slice(HELLO);
    b[4..8].copy_from_slice(&(party as u32).to_le_bytes());
    b[8..].copy_from_slice(&(n_parties as u32).to_le_bytes());
    b
}

fn read_hello(stream: &mut TcpStream) -> Result<(usize, usize)> {
    let mut b = [0u8; 12];
    stream
        .read_exact(&mut b)
        .map_err(|e| Error::PeerUnreachable(format!("handshake: {e}")))?;
    if &b[..4] != HELLO {
        return Err(Error::ProtocolDesync("bad handshake magic".into()));
    }
    let party = u32::from_le_bytes(b[4..8].try_into().expect("4 bytes")) as usize;
    let n = u32::from_le_bytes(b[8..].try_into().expect("4 bytes")) as usize;
    Ok((party, n))
}

/// Party 0's listening socket.
pub struct TcpServer {
    listener: TcpListener,
}

impl TcpServer {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self> {
        let listener = TcpListener::bind(addr)
            .map_err(|e| Error::PeerUnreachable(format!("cannot listen: {e}")))?;
        Ok(TcpServer { listener })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts one connection from each of parties `1..n`.
    pub fn accept(self, n_parties: usize, timeout: Duration) -> Result<Endpoint> {
        let deadline = Instant::now() + timeout;
        let mut ep = Endpoint::empty(0, n_parties, timeout);
        let mut joined = 1;
        self.listener.set_nonblocking(true)?;
        while joined < n_parties {
            match self.listener.accept() {
                Ok((mut stream, _)) => {
                    stream.set_nonblocking(false)?;
                    stream.set_read_timeout(Some(timeout))?;
                    let (peer, n) = read_hello(&mut stream)?;
                    if n != n_parties || peer == 0 || peer >= n_parties || ep.out[peer].is_some() {
                        return Err(Error::ProtocolDesync(format!(
                            "unexpected hello from party {peer} of {n}"
                        )));
                    }
                    stream.write_all(&hello(0, n_parties))?;
                    stream.set_read_timeout(None)?;
                    ep.attach_tcp(peer, stream)?;
                    joined += 1;
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(Error::PeerUnreachable(format!(
                            "only {joined} of {n_parties} parties joined within {timeout:?}"
                        )));
                    }
                    thread::sleep(RETRY);
                }
                Err(e) => return Err(Error::PeerUnreachable(format!("accept: {e}"))),
            }
        }
        Ok(ep)
    }
}

/// Connects party `party` to party 0 at `addr`, retrying until `timeout`.
pub fn tcp_connect(addr: &str, party: usize, n_parties: usize, timeout: Duration) -> Result<Endpoint> {
    if party == 0 || party >= n_parties {
        return Err(Error::InvalidArgument(format!("party {party} cannot connect in a {n_parties}-party session")));
    }
    let deadline = Instant::now() + timeout;
    let mut stream = loop {
        match TcpStream::connect(addr) {
            Ok(s) => break s,
            Err(e) => {
                if Instant::now() >= deadline {
                    return Err(Error::PeerUnreachable(format!("connect to {addr}: {e}")));
                }
                thread::sleep(RETRY);
            }
        }
    };
    stream.set_read_timeout(Some(timeout))?;
    stream.write_all(&hello(party, n_parties))?;
    let (peer, n) = read_hello(&mut stream)?;
    if peer != 0 || n != n_parties {
        return Err(Error::ProtocolDesync(format!("unexpected hello from party {peer} of {n}")));
    }
    stream.set_read_timeout(None)?;
    let mut ep = Endpoint::empty(party, n_parties, timeout);
    ep.attach_tcp(0, stream)?;
    Ok(ep)
}
