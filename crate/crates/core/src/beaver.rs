//! Beaver multiplication and squaring on additive shares.
//!
//! Each protocol is split into a local *open* step (the party's contribution
//! to the all-reduce) and a local *finish* step (the party's output share).
//! For a product `U x X` with triple `(P, R, PR)` party `i` of `n` contributes
//! `U_i - P_i` and `X_i - R_i`, all parties learn `D = U - P` and `E = X - R`,
//! and party `i` outputs `PR_i + D R_i + P_i E + D E / n`. Squaring uses
//! `(P, P^2)`: contribute `X_i - P_i`, learn `D = X - P`, output
//! `PP_i + 2 P_i D + D^2 / n`.

use crate::error::{Error, Result};
use crate::sharing::{SecretTensor, TripleKind};
use crate::tensor::Tensor;

/// A party's share of one dealt triple.
#[derive(Clone, Debug, PartialEq)]
pub struct BeaverTriple {
    kind: TripleKind,
    components: Vec<Tensor>,
    consumed: bool,
}

impl BeaverTriple {
    /// `components` are `[P, R, PR]` shares, or `[P, P^2]` for squaring.
    pub fn new(kind: TripleKind, components: Vec<Tensor>) -> Result<Self> {
        if components.len() != kind.arity() {
            return Err(Error::InvalidArgument(format!(
                "{} triple needs {} components, got {}",
                kind.name(),
                kind.arity(),
                components.len()
            )));
        }
        Ok(BeaverTriple {
            kind,
            components,
            consumed: false,
        })
    }

    pub fn kind(&self) -> TripleKind {
        self.kind
    }

    pub fn components(&self) -> &[Tensor] {
        &self.components
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    fn consume(&mut self) -> Result<()> {
        if self.consumed {
            return Err(Error::TripleReuse);
        }
        self.consumed = true;
        Ok(())
    }

    fn expect_kind(&self, kind: TripleKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidArgument(format!(
                "expected a {} triple, got {}",
                kind.name(),
                self.kind.name()
            )));
        }
        Ok(())
    }
}

/// The single collective the Beaver protocols need.
pub trait AllReduce {
    fn party_id(&self) -> usize;

    fn n_parties(&self) -> usize;

    /// Entrywise sums across all parties of each tensor in `local`, in one round.
    fn all_reduce_many(&mut self, local: &[&Tensor]) -> Result<Vec<Tensor>>;

    fn all_reduce_sum(&mut self, local: &Tensor) -> Result<Tensor> {
        Ok(self.all_reduce_many(&[local])?.remove(0))
    }
}

fn same_session(a: &SecretTensor, b: &SecretTensor) -> Result<()> {
    if a.session() != b.session() || a.party() != b.party() {
        return Err(Error::InvalidArgument(format!(
            "operands from different sessions/parties: ({}, {}) vs ({}, {})",
            a.session(),
            a.party(),
            b.session(),
            b.party()
        )));
    }
    Ok(())
}

fn check_dims(actual: &[usize], expected: &[usize], what: &str) -> Result<()> {
    if actual != expected {
        return Err(Error::Shape(format!(
            "{what}: operand dims {actual:?}, triple dims {expected:?}"
        )));
    }
    Ok(())
}

fn product_kind(kind: TripleKind) -> Result<()> {
    match kind {
        TripleKind::MatMul | TripleKind::Hadamard | TripleKind::Conv => Ok(()),
        TripleKind::Square => Err(Error::InvalidArgument(
            "square triple cannot drive a two-operand product".into(),
        )),
    }
}

/// Local contributions `(U_i - P_i, X_i - R_i)` to the opening all-reduce.
pub fn product_contribution(
    u: &SecretTensor,
    x: &SecretTensor,
    triple: &BeaverTriple,
) -> Result<(Tensor, Tensor)> {
    product_kind(triple.kind)?;
    same_session(u, x)?;
    if triple.consumed {
        return Err(Error::TripleReuse);
    }
    let [p, r, _] = &triple.components[..] else {
        unreachable!("arity checked at construction")
    };
    check_dims(u.dims(), p.dims(), "left operand")?;
    check_dims(x.dims(), r.dims(), "right operand")?;
    Ok((u.share().sub(p)?, x.share().sub(r)?))
}

/// Output share `PR_i + D R_i + P_i E + D E / n` from the opened `D`, `E`.
pub fn product_finish(
    triple: &mut BeaverTriple,
    opened_u: &Tensor,
    opened_x: &Tensor,
    n_parties: usize,
) -> Result<Tensor> {
    product_kind(triple.kind)?;
    triple.consume()?;
    let kind = triple.kind;
    let [p, r, pr] = &triple.components[..] else {
        unreachable!("arity checked at construction")
    };
    let op = |a: &Tensor, b: &Tensor| kind.product(a, b);
    let cross = op(opened_u, opened_x)?.scale(1.0 / n_parties as f64)?;
    pr.add(&op(opened_u, r)?)?
        .add(&op(p, opened_x)?)?
        .add(&cross)
}

/// Local contribution `X_i - P_i` to the squaring all-reduce.
pub fn square_contribution(x: &SecretTensor, triple: &BeaverTriple) -> Result<Tensor> {
    triple.expect_kind(TripleKind::Square)?;
    if triple.consumed {
        return Err(Error::TripleReuse);
    }
    let p = &triple.components[0];
    check_dims(x.dims(), p.dims(), "square operand")?;
    x.share().sub(p)
}

/// Output share `PP_i + 2 P_i D + D^2 / n` from the opened `D = X - P`.
pub fn square_finish(triple: &mut BeaverTriple, opened: &Tensor, n_parties: usize) -> Result<Tensor> {
    triple.expect_kind(TripleKind::Square)?;
    triple.consume()?;
    let [p, pp] = &triple.components[..] else {
        unreachable!("arity checked at construction")
    };
    let cross = p.hadamard(opened)?.scale(2.0)?;
    let sq = opened.hadamard(opened)?.scale(1.0 / n_parties as f64)?;
    pp.add(&cross)?.add(&sq)
}

fn beaver_product(
    kind: TripleKind,
    u: &SecretTensor,
    x: &SecretTensor,
    triple: &mut BeaverTriple,
    net: &mut impl AllReduce,
) -> Result<SecretTensor> {
    triple.expect_kind(kind)?;
    let (du, dx) = product_contribution(u, x, triple)?;
    let opened = net.all_reduce_many(&[&du, &dx])?;
    let out = product_finish(triple, &opened[0], &opened[1], net.n_parties())?;
    Ok(u.derive(out))
}

/// Shares of the matrix product `U X`.
pub fn beaver_mul(
    u: &SecretTensor,
    x: &SecretTensor,
    triple: &mut BeaverTriple,
    net: &mut impl AllReduce,
) -> Result<SecretTensor> {
    beaver_product(TripleKind::MatMul, u, x, triple, net)
}

/// Shares of the elementwise product `U * X`.
pub fn beaver_hadamard(
    u: &SecretTensor,
    x: &SecretTensor,
    triple: &mut BeaverTriple,
    net: &mut impl AllReduce,
) -> Result<SecretTensor> {
    beaver_product(TripleKind::Hadamard, u, x, triple, net)
}

/// Shares of the full linear convolution of sequences `U` and `X`.
pub fn beaver_conv(
    u: &SecretTensor,
    x: &SecretTensor,
    triple: &mut BeaverTriple,
    net: &mut impl AllReduce,
) -> Result<SecretTensor> {
    beaver_product(TripleKind::Conv, u, x, triple, net)
}

/// Shares of the elementwise square of `X`.
pub fn beaver_square(
    x: &SecretTensor,
    triple: &mut BeaverTriple,
    net: &mut impl AllReduce,
) -> Result<SecretTensor> {
    let d = square_contribution(x, triple)?;
    let opened = net.all_reduce_sum(&d)?;
    let out = square_finish(triple, &opened, net.n_parties())?;
    Ok(x.derive(out))
}

/// Absolute roundoff certificate for one Beaver product at mask width `gamma`:
/// `6 gamma^2 eps` per scalar multiply, times the inner dimension.
pub fn roundoff_certificate(gamma: f64, inner_dim: usize) -> f64 {
    6.0 * gamma * gamma * f64::EPSILON * inner_dim.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sharing::{share_two, Dealer, NoiseSpec, TripleSpec};
    use crate::tensor::{uniform, RandomSource};

    /// Runs both parties of a two-operand product in lockstep, summing the
    /// contributions by hand in place of the network.
    fn lockstep_product(
        u: &[SecretTensor],
        x: &[SecretTensor],
        triples: &mut [BeaverTriple],
    ) -> Tensor {
        let n = u.len();
        let contrib: Vec<_> = (0..n)
            .map(|i| product_contribution(&u[i], &x[i], &triples[i]).unwrap())
            .collect();
        let mut du = contrib[0].0.clone();
        let mut dx = contrib[0].1.clone();
        for c in &contrib[1..] {
            du = du.add(&c.0).unwrap();
            dx = dx.add(&c.1).unwrap();
        }
        let outs: Vec<Tensor> = triples
            .iter_mut()
            .map(|t| product_finish(t, &du, &dx, n).unwrap())
            .collect();
        outs[1..].iter().fold(outs[0].clone(), |a, b| a.add(b).unwrap())
    }

    fn lockstep_square(x: &[SecretTensor], triples: &mut [BeaverTriple]) -> Tensor {
        let n = x.len();
        let d = (0..n)
            .map(|i| square_contribution(&x[i], &triples[i]).unwrap())
            .reduce(|a, b| a.add(&b).unwrap())
            .unwrap();
        let outs: Vec<Tensor> = triples
            .iter_mut()
            .map(|t| square_finish(t, &d, n).unwrap())
            .collect();
        outs[1..].iter().fold(outs[0].clone(), |a, b| a.add(b).unwrap())
    }

    fn shared(x: &Tensor, rng: &mut RandomSource) -> Vec<SecretTensor> {
        let noise = NoiseSpec::default();
        let (a, b) = share_two(x, &noise, 7, rng).unwrap();
        vec![a, b]
    }

    #[test]
    fn degenerate_unmasked_product_is_exact() {
        let u = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let x = Tensor::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let us = vec![
            SecretTensor::new(u.clone(), 0, 0),
            SecretTensor::new(Tensor::zeros(&[2, 2]), 1, 0),
        ];
        let xs = vec![
            SecretTensor::new(x.clone(), 0, 0),
            SecretTensor::new(Tensor::zeros(&[2, 1]), 1, 0),
        ];
        let zero = |d: &[usize]| Tensor::zeros(d);
        let mut triples: Vec<BeaverTriple> = (0..2)
            .map(|_| {
                BeaverTriple::new(TripleKind::MatMul, vec![zero(&[2, 2]), zero(&[2, 1]), zero(&[2, 1])])
                    .unwrap()
            })
            .collect();
        let out = lockstep_product(&us, &xs, &mut triples);
        assert_eq!(out, u.matmul(&x).unwrap());
    }

    #[test]
    fn ledger_identity_on_exact_small_integers() {
        // Every value is a small dyadic rational, so floating point is exact and
        // the party sum must equal the product for any injected triple.
        let mut rng = RandomSource::new(5, 0);
        let int = |rng: &mut RandomSource| (rng.below(9) as f64 - 4.0) / 4.0;
        for _ in 0..100 {
            let p0 = Tensor::scalar(int(&mut rng)).unwrap();
            let q = Tensor::scalar(int(&mut rng)).unwrap();
            let t = Tensor::scalar(int(&mut rng)).unwrap();
            let xv = int(&mut rng);
            let y = int(&mut rng);
            let p = p0.add(&q).unwrap();
            let pp = p.hadamard(&p).unwrap();
            let mut triples = vec![
                BeaverTriple::new(TripleKind::Square, vec![p0, pp.sub(&t).unwrap()]).unwrap(),
                BeaverTriple::new(TripleKind::Square, vec![q, t]).unwrap(),
            ];
            let xs = vec![
                SecretTensor::new(Tensor::scalar(xv - y).unwrap(), 0, 0),
                SecretTensor::new(Tensor::scalar(y).unwrap(), 1, 0),
            ];
            let out = lockstep_square(&xs, &mut triples);
            assert_eq!(out.data()[0], xv * xv);
        }
    }

    #[test]
    fn unit_square_with_zero_triple_splits_evenly() {
        let zero = || Tensor::scalar(0.0).unwrap();
        let mut triples: Vec<BeaverTriple> = (0..2)
            .map(|_| BeaverTriple::new(TripleKind::Square, vec![zero(), zero()]).unwrap())
            .collect();
        let xs = vec![
            SecretTensor::new(Tensor::scalar(1.0).unwrap(), 0, 0),
            SecretTensor::new(zero(), 1, 0),
        ];
        let d = square_contribution(&xs[0], &triples[0])
            .unwrap()
            .add(&square_contribution(&xs[1], &triples[1]).unwrap())
            .unwrap();
        let a = square_finish(&mut triples[0], &d, 2).unwrap();
        let b = square_finish(&mut triples[1], &d, 2).unwrap();
        assert_eq!((a.data()[0], b.data()[0]), (0.5, 0.5));
    }

    #[test]
    fn random_product_precision() {
        let gamma = 1e5;
        let mut rng = RandomSource::new(17, 0);
        let u = uniform(&[4, 4], 1.0, &mut rng).unwrap();
        let x = uniform(&[4, 4], 1.0, &mut rng).unwrap();
        let mut dealer = Dealer::new(2, RandomSource::new(18, 0)).unwrap();
        let spec = TripleSpec::new(TripleKind::MatMul, &[4, 4], &[4, 4], gamma).unwrap();
        let mut triples = dealer.deal(&spec).unwrap();
        let out = lockstep_product(&shared(&u, &mut rng), &shared(&x, &mut rng), &mut triples);
        let err = out.sub(&u.matmul(&x).unwrap()).unwrap().max_abs();
        assert!(err <= 1e-4, "err {err}");
    }

    #[test]
    fn square_precision_matches_certificate() {
        let gamma = 1e5;
        let bound = roundoff_certificate(gamma, 1);
        assert!((bound - 1.33e-5).abs() < 1e-7);
        let mut rng = RandomSource::new(23, 0);
        let mut dealer = Dealer::new(2, RandomSource::new(24, 0)).unwrap();
        let spec = TripleSpec::square(&[1, 1], gamma).unwrap();
        for v in [0.5, -1.0, 1.0, 0.0] {
            let x = Tensor::scalar(v).unwrap();
            let mut triples = dealer.deal(&spec).unwrap();
            let out = lockstep_square(&shared(&x, &mut rng), &mut triples);
            assert!((out.data()[0] - v * v).abs() <= bound);
        }
    }

    #[test]
    fn conv_matches_plaintext() {
        let gamma = 1e5;
        let mut rng = RandomSource::new(31, 0);
        let mut dealer = Dealer::new(2, RandomSource::new(32, 0)).unwrap();
        let ones = Tensor::new(vec![2], vec![1.0, 1.0]).unwrap();
        let spec = TripleSpec::new(TripleKind::Conv, &[2], &[2], gamma).unwrap();
        let mut triples = dealer.deal(&spec).unwrap();
        let out = lockstep_product(&shared(&ones, &mut rng), &shared(&ones, &mut rng), &mut triples);
        for (a, b) in out.data().iter().zip([1.0, 2.0, 1.0]) {
            assert!((a - b).abs() <= 1e-4 * 3.0);
        }

        let u = uniform(&[8], 1.0, &mut rng).unwrap();
        let x = uniform(&[8], 1.0, &mut rng).unwrap();
        let spec = TripleSpec::new(TripleKind::Conv, &[8], &[8], gamma).unwrap();
        let mut triples = dealer.deal(&spec).unwrap();
        let out = lockstep_product(&shared(&u, &mut rng), &shared(&x, &mut rng), &mut triples);
        let err = out.sub(&u.convolve(&x).unwrap()).unwrap().max_abs();
        assert!(err <= 1e-3, "err {err}");
    }

    #[test]
    fn three_party_product_agrees_with_two_party() {
        let gamma = 1e5;
        let mut rng = RandomSource::new(41, 0);
        let u = uniform(&[3, 3], 1.0, &mut rng).unwrap();
        let x = uniform(&[3, 3], 1.0, &mut rng).unwrap();
        let noise = NoiseSpec::default();
        let us = crate::sharing::share_n(&u, 3, &noise, 1, &mut rng).unwrap();
        let xs = crate::sharing::share_n(&x, 3, &noise, 1, &mut rng).unwrap();
        let spec = TripleSpec::new(TripleKind::MatMul, &[3, 3], &[3, 3], gamma).unwrap();
        let mut triples = Dealer::new(3, RandomSource::new(42, 0)).unwrap().deal(&spec).unwrap();
        let three = lockstep_product(&us, &xs, &mut triples);
        let mut triples2 = Dealer::new(2, RandomSource::new(43, 0)).unwrap().deal(&spec).unwrap();
        let two = lockstep_product(&shared(&u, &mut rng), &shared(&x, &mut rng), &mut triples2);
        let bound = 2.0 * roundoff_certificate(gamma, 3) * 2.0;
        assert!(three.sub(&two).unwrap().max_abs() <= bound);
    }

    #[test]
    fn consumed_triple_is_rejected() {
        let zero = || Tensor::scalar(0.0).unwrap();
        let mut t = BeaverTriple::new(TripleKind::Square, vec![zero(), zero()]).unwrap();
        square_finish(&mut t, &zero(), 2).unwrap();
        assert!(t.is_consumed());
        assert!(matches!(square_finish(&mut t, &zero(), 2), Err(Error::TripleReuse)));
        let x = SecretTensor::new(zero(), 0, 0);
        assert!(matches!(square_contribution(&x, &t), Err(Error::TripleReuse)));
    }

    #[test]
    fn shape_and_kind_mismatch() {
        let zero = |d: &[usize]| Tensor::zeros(d);
        let t = BeaverTriple::new(TripleKind::MatMul, vec![zero(&[2, 2]), zero(&[2, 1]), zero(&[2, 1])])
            .unwrap();
        let u = SecretTensor::new(zero(&[3, 2]), 0, 0);
        let x = SecretTensor::new(zero(&[2, 1]), 0, 0);
        assert!(matches!(product_contribution(&u, &x, &t), Err(Error::Shape(_))));
        let sq = BeaverTriple::new(TripleKind::Square, vec![zero(&[1]), zero(&[1])]).unwrap();
        assert!(product_contribution(&x, &x, &sq).is_err());
    }
}
