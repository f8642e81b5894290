//! Trusted dealer for Beaver correlated randomness.
//!
//! For two parties a multiplication triple splits as party 0
//! `(P - Q, R - S, PR - T)` and party 1 `(Q, S, T)`, with `P, Q, R, S`
//! uniform on `[-w, w]` and `T` uniform on `[-w^2, w^2]`. With more parties
//! every party `i >= 1` receives its own independent `(Q_i, S_i, T_i)` and
//! party 0 absorbs the differences.

use serde::{Deserialize, Serialize};

use super::store::TripleStore;
use crate::beaver::BeaverTriple;
use crate::error::{Error, Result};
use crate::tensor::{uniform, RandomSource, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripleKind {
    /// Matrix product `P R`.
    MatMul,
    /// Elementwise square `P * P`.
    Square,
    /// Elementwise product `P * R`.
    Hadamard,
    /// Full linear convolution of sequences `P (*) R`.
    Conv,
}

impl TripleKind {
    pub const ALL: [TripleKind; 4] = [
        TripleKind::MatMul,
        TripleKind::Square,
        TripleKind::Hadamard,
        TripleKind::Conv,
    ];

    pub fn code(self) -> u8 {
        match self {
            TripleKind::MatMul => 1,
            TripleKind::Square => 2,
            TripleKind::Hadamard => 3,
            TripleKind::Conv => 4,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        TripleKind::ALL
            .into_iter()
            .find(|k| k.code() == code)
            .ok_or_else(|| Error::format(None, format!("unknown triple kind {code}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            TripleKind::MatMul => "mul",
            TripleKind::Square => "square",
            TripleKind::Hadamard => "hadamard",
            TripleKind::Conv => "conv",
        }
    }

    /// Number of share components per triple.
    pub fn arity(self) -> usize {
        match self {
            TripleKind::Square => 2,
            _ => 3,
        }
    }

    pub(crate) fn product(self, p: &Tensor, r: &Tensor) -> Result<Tensor> {
        match self {
            TripleKind::MatMul => p.matmul(r),
            TripleKind::Square => p.hadamard(p),
            TripleKind::Hadamard => p.hadamard(r),
            TripleKind::Conv => p.convolve(r),
        }
    }
}

/// What a protocol step needs from the dealer: kind, operand shapes and mask width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleSpec {
    pub kind: TripleKind,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub width: f64,
}

impl TripleSpec {
    pub fn new(kind: TripleKind, left: &[usize], right: &[usize], width: f64) -> Result<Self> {
        let spec = TripleSpec {
            kind,
            left: left.to_vec(),
            right: right.to_vec(),
            width,
        };
        spec.component_dims()?;
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidArgument(format!("triple width must be positive, got {width}")));
        }
        Ok(spec)
    }

    pub fn square(dims: &[usize], width: f64) -> Result<Self> {
        TripleSpec::new(TripleKind::Square, dims, dims, width)
    }

    /// Shapes of each share component, in storage order.
    pub fn component_dims(&self) -> Result<Vec<Vec<usize>>> {
        let (l, r) = (&self.left, &self.right);
        let product = match self.kind {
            TripleKind::MatMul => match (l.as_slice(), r.as_slice()) {
                ([m, k], [k2, n]) if k == k2 => vec![*m, *n],
                _ => return Err(Error::Shape(format!("matmul triple dims {l:?} x {r:?}"))),
            },
            TripleKind::Square => {
                if l != r {
                    return Err(Error::Shape(format!("square triple dims {l:?} vs {r:?}")));
                }
                return Ok(vec![l.clone(), l.clone()]);
            }
            TripleKind::Hadamard => {
                if l != r {
                    return Err(Error::Shape(format!("hadamard triple dims {l:?} vs {r:?}")));
                }
                l.clone()
            }
            TripleKind::Conv => {
                let (a, b): (usize, usize) = (l.iter().product(), r.iter().product());
                if l.len() != 1 || r.len() != 1 || a == 0 || b == 0 {
                    return Err(Error::Shape(format!("conv triple dims {l:?} x {r:?}")));
                }
                vec![a + b - 1]
            }
        };
        Ok(vec![l.clone(), r.clone(), product])
    }
}

/// Draws triples and splits them among `n_parties`.
#[derive(Clone, Debug)]
pub struct Dealer {
    n_parties: usize,
    rng: RandomSource,
}

impl Dealer {
    pub fn new(n_parties: usize, rng: RandomSource) -> Result<Self> {
        if n_parties < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 parties, got {n_parties}")));
        }
        Ok(Dealer { n_parties, rng })
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    /// One triple, returned as per-party shares indexed by party id.
    pub fn deal(&mut self, spec: &TripleSpec) -> Result<Vec<BeaverTriple>> {
        let dims = spec.component_dims()?;
        let w = spec.width;
        let p = uniform(&dims[0], w, &mut self.rng)?;
        let r = if spec.kind == TripleKind::Square {
            p.clone()
        } else {
            uniform(&dims[1], w, &mut self.rng)?
        };
        let pr = spec.kind.product(&p, &r)?;
        // Plaintext values split as [P, R, PR] or [P, P^2].
        let plain: Vec<Tensor> = if spec.kind == TripleKind::Square {
            vec![p, pr]
        } else {
            vec![p, r, pr]
        };
        let widths: Vec<f64> = if spec.kind == TripleKind::Square {
            vec![w, w * w]
        } else {
            vec![w, w, w * w]
        };

        let mut first = plain;
        let mut rest = Vec::with_capacity(self.n_parties - 1);
        for _ in 1..self.n_parties {
            let masks = first
                .iter()
                .zip(&widths)
                .map(|(c, &hw)| uniform(c.dims(), hw, &mut self.rng))
                .collect::<Result<Vec<_>>>()?;
            first = first
                .iter()
                .zip(&masks)
                .map(|(c, m)| c.sub(m))
                .collect::<Result<Vec<_>>>()?;
            rest.push(masks);
        }

        let mut out = Vec::with_capacity(self.n_parties);
        out.push(BeaverTriple::new(spec.kind, first)?);
        for masks in rest {
            out.push(BeaverTriple::new(spec.kind, masks)?);
        }
        Ok(out)
    }
}

/// Deals `count` triples of one spec into per-party in-memory stores.
pub fn deal_triples(
    spec: &TripleSpec,
    count: usize,
    n_parties: usize,
    rng: RandomSource,
) -> Result<Vec<TripleStore>> {
    let mut dealer = Dealer::new(n_parties, rng)?;
    let mut stores: Vec<TripleStore> = (0..n_parties)
        .map(|_| TripleStore::new(spec.kind, spec.width))
        .collect();
    for _ in 0..count {
        for (store, triple) in stores.iter_mut().zip(dealer.deal(spec)?) {
            store.push(triple)?;
        }
    }
    Ok(stores)
}
