//! The all-reduce rendezvous.
//!
//! Two parties simply exchange contributions. With more parties everyone
//! sends to party 0, which sums and broadcasts the result. Sums are always
//! taken in ascending party order so every party sees identical bits.

use super::frame::{Frame, FrameKind};
use super::transport::Endpoint;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub struct Collective {
    ep: Endpoint,
    next_tag: u64,
    send_seq: Vec<u32>,
    recv_seq: Vec<u32>,
}

impl Collective {
    pub fn new(ep: Endpoint) -> Self {
        let n = ep.n_parties();
        Collective {
            ep,
            next_tag: 0,
            send_seq: vec![0; n],
            recv_seq: vec![0; n],
        }
    }

    pub fn party(&self) -> usize {
        self.ep.party()
    }

    pub fn n_parties(&self) -> usize {
        self.ep.n_parties()
    }

    pub fn frames_sent(&self) -> u64 {
        self.ep.frames_sent()
    }

    /// Number of all-reduces completed so far.
    pub fn rounds(&self) -> u64 {
        self.next_tag
    }

    fn send(&mut self, to: usize, kind: FrameKind, tag: u64, tensor: &Tensor) -> Result<()> {
        let frame = Frame {
            kind,
            tag,
            seq: self.send_seq[to],
            tensor: tensor.clone(),
        };
        self.send_seq[to] = self.send_seq[to].wrapping_add(1);
        self.ep.send(to, &frame.encode()?)
    }

    fn recv(&mut self, from: usize, kind: FrameKind, tag: u64, dims: &[usize]) -> Result<Tensor> {
        let frame = Frame::decode(&self.ep.recv(from)?)?;
        let expected = self.recv_seq[from];
        self.recv_seq[from] = expected.wrapping_add(1);
        if frame.seq != expected {
            return Err(Error::ProtocolDesync(format!(
                "party {from} sent sequence {}, expected {expected}",
                frame.seq
            )));
        }
        if frame.kind != kind || frame.tag != tag {
            return Err(Error::ProtocolDesync(format!(
                "party {from} sent {:?} tag {}, expected {kind:?} tag {tag}",
                frame.kind, frame.tag
            )));
        }
        if frame.tensor.dims() != dims {
            return Err(Error::ProtocolDesync(format!(
                "party {from} contributed dims {:?}, expected {dims:?}",
                frame.tensor.dims()
            )));
        }
        Ok(frame.tensor)
    }

    /// All-reduce under an explicit tag; every party must pass the same tag.
    pub fn all_reduce_tagged(&mut self, local: &Tensor, tag: u64) -> Result<Tensor> {
        self.next_tag = self.next_tag.max(tag + 1);
        let (me, n) = (self.party(), self.n_parties());
        let dims = local.dims().to_vec();
        if n == 2 {
            let peer = 1 - me;
            self.send(peer, FrameKind::Contrib, tag, local)?;
            let other = self.recv(peer, FrameKind::Contrib, tag, &dims)?;
            return if me == 0 { local.add(&other) } else { other.add(local) };
        }
        if me == 0 {
            let mut acc = local.clone();
            for from in 1..n {
                acc = acc.add(&self.recv(from, FrameKind::Contrib, tag, &dims)?)?;
            }
            for to in 1..n {
                self.send(to, FrameKind::Result, tag, &acc)?;
            }
            Ok(acc)
        } else {
            self.send(0, FrameKind::Contrib, tag, local)?;
            self.recv(0, FrameKind::Result, tag, &dims)
        }
    }

    /// All-reduce under the next tag in this party's sequence.
    pub fn all_reduce(&mut self, local: &Tensor) -> Result<Tensor> {
        let tag = self.next_tag;
        self.all_reduce_tagged(local, tag)
    }

    /// Several tensors in one round, sent as a single flat contribution.
    pub fn all_reduce_many(&mut self, local: &[&Tensor]) -> Result<Vec<Tensor>> {
        if let [one] = local {
            return Ok(vec![self.all_reduce(one)?]);
        }
        let flat: Vec<f64> = local.iter().flat_map(|t| t.data().iter().copied()).collect();
        let sum = self.all_reduce(&Tensor::new(vec![flat.len()], flat)?)?;
        let mut out = Vec::with_capacity(local.len());
        let mut at = 0;
        for t in local {
            let n = t.len();
            out.push(Tensor::new(t.dims().to_vec(), sum.data()[at..at + n].to_vec())?);
            at += n;
        }
        Ok(out)
    }
}
