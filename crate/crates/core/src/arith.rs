//! Evaluation engines: the same algorithm runs on plaintext tensors or on
//! shares.
//!
//! [`Public`] computes directly on [`Tensor`]s. [`PartyContext`] computes on
//! [`SecretTensor`] shares, realizing products with Beaver triples and
//! charging every opening to its leakage ledger. Linear maps act share by
//! share and need no communication.

use crate::beaver::{beaver_conv, beaver_hadamard, beaver_mul, beaver_square};
use crate::error::{Error, Result};
use crate::leakage::LeakageEvent;
use crate::runtime::PartyContext;
use crate::sharing::{SecretTensor, TripleKind, TripleSpec};
use crate::tensor::Tensor;

/// Bound assumed for every Beaver operand when charging openings.
pub const BEAVER_OPERAND_BETA: f64 = 1.0;

pub trait Engine {
    type Value: Clone;

    fn is_private(&self) -> bool;

    fn dims<'a>(&self, v: &'a Self::Value) -> &'a [usize];

    /// The plaintext, when this engine can see it.
    fn peek<'a>(&self, v: &'a Self::Value) -> Option<&'a Tensor>;

    /// A public constant.
    fn constant(&self, t: &Tensor) -> Self::Value;

    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    fn sub(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    fn add_scalar(&mut self, a: &Self::Value, c: f64) -> Result<Self::Value>;

    /// Applies a homogeneous linear map (scaling, transposition, row
    /// selection, sums, broadcasts).
    fn linear(&mut self, a: &Self::Value, f: impl Fn(&Tensor) -> Result<Tensor>) -> Result<Self::Value>;

    /// Elementwise product.
    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    fn matmul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    fn conv(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    /// Elementwise square.
    fn square(&mut self, a: &Self::Value) -> Result<Self::Value>;

    /// Elementwise square masked at `width`, not charged individually; the
    /// caller charges the whole chain it belongs to.
    fn chain_square(&mut self, a: &Self::Value, width: f64) -> Result<Self::Value>;

    fn charge(&mut self, description: &str, event: LeakageEvent, count: u64) -> Result<()>;

    /// Opens a value to every party.
    fn reveal(&mut self, a: &Self::Value) -> Result<Tensor>;

    /// Mask width for ordinary Beaver products.
    fn gamma(&self) -> f64;

    fn scale(&mut self, a: &Self::Value, c: f64) -> Result<Self::Value> {
        self.linear(a, |t| t.scale(c))
    }

    fn neg(&mut self, a: &Self::Value) -> Result<Self::Value> {
        self.linear(a, |t| Ok(t.neg()))
    }
}

/// Plaintext evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Public {
    gamma: f64,
}

impl Public {
    pub fn new() -> Self {
        Public {
            gamma: crate::sharing::DEFAULT_GAMMA,
        }
    }
}

impl Default for Public {
    fn default() -> Self {
        Public::new()
    }
}

impl Engine for Public {
    type Value = Tensor;

    fn is_private(&self) -> bool {
        false
    }

    fn dims<'a>(&self, v: &'a Tensor) -> &'a [usize] {
        v.dims()
    }

    fn peek<'a>(&self, v: &'a Tensor) -> Option<&'a Tensor> {
        Some(v)
    }

    fn constant(&self, t: &Tensor) -> Tensor {
        t.clone()
    }

    fn add(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        a.add(b)
    }

    fn sub(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        a.sub(b)
    }

    fn add_scalar(&mut self, a: &Tensor, c: f64) -> Result<Tensor> {
        a.add_scalar(c)
    }

    fn linear(&mut self, a: &Tensor, f: impl Fn(&Tensor) -> Result<Tensor>) -> Result<Tensor> {
        f(a)
    }

    fn mul(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        a.hadamard(b)
    }

    fn matmul(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        a.matmul(b)
    }

    fn conv(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        a.convolve(b)
    }

    fn square(&mut self, a: &Tensor) -> Result<Tensor> {
        a.hadamard(a)
    }

    fn chain_square(&mut self, a: &Tensor, _width: f64) -> Result<Tensor> {
        a.hadamard(a)
    }

    fn charge(&mut self, _description: &str, _event: LeakageEvent, _count: u64) -> Result<()> {
        Ok(())
    }

    fn reveal(&mut self, a: &Tensor) -> Result<Tensor> {
        Ok(a.clone())
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }
}

fn count(dims: &[usize]) -> u64 {
    dims.iter().product::<usize>() as u64
}

impl PartyContext {
    fn product(&mut self, kind: TripleKind, a: &SecretTensor, b: &SecretTensor) -> Result<SecretTensor> {
        let width = self.noise().gamma();
        let spec = TripleSpec::new(kind, a.dims(), b.dims(), width)?;
        let mut triple = self.triple(&spec)?;
        let out = match kind {
            TripleKind::MatMul => beaver_mul(a, b, &mut triple, self)?,
            TripleKind::Hadamard => beaver_hadamard(a, b, &mut triple, self)?,
            TripleKind::Conv => beaver_conv(a, b, &mut triple, self)?,
            TripleKind::Square => unreachable!("squares use their own triple"),
        };
        self.charge(
            "beaver product openings",
            LeakageEvent::Masking {
                beta: BEAVER_OPERAND_BETA,
                gamma: width,
            },
            count(a.dims()) + count(b.dims()),
        )?;
        Ok(out)
    }

    fn masked_square(&mut self, a: &SecretTensor, width: f64) -> Result<SecretTensor> {
        let spec = TripleSpec::square(a.dims(), width)?;
        let mut triple = self.triple(&spec)?;
        beaver_square(a, &mut triple, self)
    }
}

impl Engine for PartyContext {
    type Value = SecretTensor;

    fn is_private(&self) -> bool {
        true
    }

    fn dims<'a>(&self, v: &'a SecretTensor) -> &'a [usize] {
        v.dims()
    }

    fn peek<'a>(&self, _v: &'a SecretTensor) -> Option<&'a Tensor> {
        None
    }

    fn constant(&self, t: &Tensor) -> SecretTensor {
        self.public(t)
    }

    fn add(&mut self, a: &SecretTensor, b: &SecretTensor) -> Result<SecretTensor> {
        Ok(a.derive(a.share().add(b.share())?))
    }

    fn sub(&mut self, a: &SecretTensor, b: &SecretTensor) -> Result<SecretTensor> {
        Ok(a.derive(a.share().sub(b.share())?))
    }

    fn add_scalar(&mut self, a: &SecretTensor, c: f64) -> Result<SecretTensor> {
        if self.party_id() == 0 {
            Ok(a.derive(a.share().add_scalar(c)?))
        } else {
            Ok(a.clone())
        }
    }

    fn linear(
        &mut self,
        a: &SecretTensor,
        f: impl Fn(&Tensor) -> Result<Tensor>,
    ) -> Result<SecretTensor> {
        Ok(a.derive(f(a.share())?))
    }

    fn mul(&mut self, a: &SecretTensor, b: &SecretTensor) -> Result<SecretTensor> {
        self.product(TripleKind::Hadamard, a, b)
    }

    fn matmul(&mut self, a: &SecretTensor, b: &SecretTensor) -> Result<SecretTensor> {
        self.product(TripleKind::MatMul, a, b)
    }

    fn conv(&mut self, a: &SecretTensor, b: &SecretTensor) -> Result<SecretTensor> {
        self.product(TripleKind::Conv, a, b)
    }

    fn square(&mut self, a: &SecretTensor) -> Result<SecretTensor> {
        let width = self.noise().gamma();
        let out = self.masked_square(a, width)?;
        self.charge(
            "beaver square openings",
            LeakageEvent::BeaverSquare { gamma: width },
            count(a.dims()),
        )?;
        Ok(out)
    }

    fn chain_square(&mut self, a: &SecretTensor, width: f64) -> Result<SecretTensor> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidArgument(format!("mask width must be positive, got {width}")));
        }
        self.masked_square(a, width)
    }

    fn charge(&mut self, description: &str, event: LeakageEvent, count: u64) -> Result<()> {
        PartyContext::charge(self, description, event, count)
    }

    fn reveal(&mut self, a: &SecretTensor) -> Result<Tensor> {
        PartyContext::reveal(self, a)
    }

    fn gamma(&self) -> f64 {
        self.noise().gamma()
    }
}
