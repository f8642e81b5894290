//! Additive sharing of real matrices among two or more parties.
//!
//! Two-party sharing hands party 0 `X - Y` and party 1 `Y` with `Y` uniform on
//! `[-gamma, gamma]`. The n-party variant distributes the telescoping chain
//! `X + Y1 - Y2, Y2 - Y3, ..., Yn - Y1` to a fresh random permutation of the
//! parties. Correlated randomness for Beaver arithmetic comes from
//! [`dealer`], and is persisted by [`store`].

pub mod dealer;
pub mod store;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{uniform, RandomSource, Tensor};

pub use dealer::{deal_triples, Dealer, TripleKind, TripleSpec};
pub use store::{TripleStore, TripleStoreReader, TripleStoreWriter};

pub const DEFAULT_GAMMA: f64 = 1e5;
pub const DEFAULT_BETA: f64 = 1.0;

/// Masking half-width `gamma` and the certified data bound `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    gamma: f64,
    beta: f64,
}

impl NoiseSpec {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < gamma && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise spec needs 0 < beta < gamma, got beta={beta}, gamma={gamma}"
            )));
        }
        Ok(NoiseSpec { gamma, beta })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        NoiseSpec::new(self.gamma, beta)
    }

    fn check_bound(&self, x: &Tensor) -> Result<()> {
        let m = x.max_abs();
        if m > self.beta {
            return Err(Error::BoundViolation {
                value: m,
                bound: self.beta,
            });
        }
        Ok(())
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            gamma: DEFAULT_GAMMA,
            beta: DEFAULT_BETA,
        }
    }
}

/// One party's additive share of a real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SecretTensor {
    share: Tensor,
    party: usize,
    session: u64,
}

impl SecretTensor {
    pub fn new(share: Tensor, party: usize, session: u64) -> Self {
        SecretTensor {
            share,
            party,
            session,
        }
    }

    pub fn share(&self) -> &Tensor {
        &self.share
    }

    pub fn into_share(self) -> Tensor {
        self.share
    }

    pub fn dims(&self) -> &[usize] {
        self.share.dims()
    }

    pub fn party(&self) -> usize {
        self.party
    }

    pub fn session(&self) -> u64 {
        self.session
    }

    /// Same party and session, different share contents.
    pub fn derive(&self, share: Tensor) -> Self {
        SecretTensor {
            share,
            party: self.party,
            session: self.session,
        }
    }
}

/// Splits `x` into `(x - Y, Y)` with `Y` uniform on `[-gamma, gamma]`.
pub fn share_two(
    x: &Tensor,
    noise: &NoiseSpec,
    session: u64,
    rng: &mut RandomSource,
) -> Result<(SecretTensor, SecretTensor)> {
    noise.check_bound(x)?;
    let mask = uniform(x.dims(), noise.gamma, rng)?;
    share_two_with_mask(x, &mask, session)
}

/// Two-party split with a caller-supplied mask `y`.
pub fn share_two_with_mask(
    x: &Tensor,
    y: &Tensor,
    session: u64,
) -> Result<(SecretTensor, SecretTensor)> {
    Ok((
        SecretTensor::new(x.sub(y)?, 0, session),
        SecretTensor::new(y.clone(), 1, session),
    ))
}

/// n-party chain sharing; the returned vector is indexed by party id.
pub fn share_n(
    x: &Tensor,
    n: usize,
    noise: &NoiseSpec,
    session: u64,
    rng: &mut RandomSource,
) -> Result<Vec<SecretTensor>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 parties, got {n}")));
    }
    noise.check_bound(x)?;
    let masks = (0..n)
        .map(|_| uniform(x.dims(), noise.gamma, rng))
        .collect::<Result<Vec<_>>>()?;
    let perm = rng.permutation(n);

    let mut pieces = Vec::with_capacity(n);
    pieces.push(x.add(&masks[0])?.sub(&masks[1 % n])?);
    for i in 1..n {
        pieces.push(masks[i].sub(&masks[(i + 1) % n])?);
    }

    let mut out: Vec<Option<SecretTensor>> = vec![None; n];
    for (piece, &party) in pieces.into_iter().zip(&perm) {
        out[party] = Some(SecretTensor::new(piece, party, session));
    }
    Ok(out.into_iter().map(|s| s.expect("permutation covers all parties")).collect())
}

/// Sums all parties' shares in ascending party order.
pub fn reconstruct(shares: &[SecretTensor]) -> Result<Tensor> {
    let first = shares
        .first()
        .ok_or_else(|| Error::IncompleteSet("no shares".into()))?;
    let mut ordered: Vec<&SecretTensor> = shares.iter().collect();
    ordered.sort_by_key(|s| s.party);
    for (expected, s) in ordered.iter().enumerate() {
        if s.party != expected {
            return Err(Error::IncompleteSet(format!(
                "expected party {expected}, found party {}",
                s.party
            )));
        }
        if s.session != first.session {
            return Err(Error::IncompleteSet(format!(
                "session mismatch: {} vs {}",
                s.session, first.session
            )));
        }
        if s.dims() != first.dims() {
            return Err(Error::IncompleteSet(format!(
                "dims mismatch: {:?} vs {:?}",
                s.dims(),
                first.dims()
            )));
        }
    }
    let mut acc = ordered[0].share.clone();
    for s in &ordered[1..] {
        acc = acc.add(&s.share)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = f64::EPSILON;

    #[test]
    fn zero_plaintext_shares_are_negatives() {
        let noise = NoiseSpec::default();
        let x = Tensor::zeros(&[3, 2]);
        let (a, b) = share_two(&x, &noise, 1, &mut RandomSource::new(1, 0)).unwrap();
        assert_eq!(a.share().data(), b.share().neg().data());
        let back = reconstruct(&[a, b]).unwrap();
        assert!(back.max_abs() <= 2.0 * noise.gamma() * EPS);
    }

    #[test]
    fn injected_mask() {
        let x = Tensor::scalar(0.5).unwrap();
        let y = Tensor::scalar(0.25).unwrap();
        let (a, b) = share_two_with_mask(&x, &y, 0).unwrap();
        assert_eq!(a.share().data(), &[0.25]);
        assert_eq!(b.share().data(), &[0.25]);
    }

    #[test]
    fn two_party_roundtrip_precision() {
        let noise = NoiseSpec::default();
        let mut rng = RandomSource::new(9, 0);
        let x = uniform(&[16, 16], 1.0, &mut rng).unwrap();
        let (a, b) = share_two(&x, &noise, 3, &mut rng).unwrap();
        let back = reconstruct(&[b, a]).unwrap();
        let err = back.sub(&x).unwrap().max_abs();
        assert!(err <= 1e-10, "error {err}");
    }

    #[test]
    fn refuses_plaintext_above_beta() {
        let noise = NoiseSpec::default();
        let x = Tensor::column(vec![0.5, -1.5]).unwrap();
        let err = share_two(&x, &noise, 0, &mut RandomSource::new(1, 0)).unwrap_err();
        assert!(matches!(err, Error::BoundViolation { .. }));
    }

    #[test]
    fn n_party_chain() {
        let noise = NoiseSpec::default();
        let mut rng = RandomSource::new(4, 0);
        let x = uniform(&[5, 3], 1.0, &mut rng).unwrap();
        let shares = share_n(&x, 3, &noise, 8, &mut rng).unwrap();
        assert_eq!(shares.len(), 3);
        assert!(shares.iter().enumerate().all(|(i, s)| s.party() == i));
        let err = reconstruct(&shares).unwrap().sub(&x).unwrap().max_abs();
        assert!(err <= 4.0 * noise.gamma() * EPS, "error {err}");
    }

    #[test]
    fn n_party_small_integers_telescope_exactly() {
        // Masks drawn at a width where every sum is exact in binary floating point.
        let noise = NoiseSpec::new(4.0, 1.0).unwrap();
        let x = Tensor::column(vec![1.0, -0.5, 0.25]).unwrap();
        for seed in 0..20 {
            let shares = share_n(&x, 4, &noise, 0, &mut RandomSource::new(seed, 0)).unwrap();
            let back = reconstruct(&shares).unwrap();
            assert!(back.sub(&x).unwrap().max_abs() <= 8.0 * 4.0 * EPS);
        }
    }

    #[test]
    fn n_party_permutation_varies() {
        let noise = NoiseSpec::default();
        let x = Tensor::scalar(0.0).unwrap();
        let mut rng = RandomSource::new(21, 0);
        // With x = 0 the piece X + Y1 - Y2 is indistinguishable by value, so we
        // track which party receives the first piece via a sentinel mask order.
        let mut holders = std::collections::BTreeSet::new();
        for _ in 0..50 {
            let mut probe = rng.clone();
            let masks: Vec<f64> = (0..3).map(|_| probe.symmetric(noise.gamma())).collect();
            let shares = share_n(&x, 3, &noise, 0, &mut rng).unwrap();
            let first = masks[0] - masks[1];
            let holder = shares
                .iter()
                .position(|s| s.share().data()[0] == first)
                .unwrap();
            holders.insert(holder);
        }
        assert_eq!(holders.len(), 3);
    }

    #[test]
    fn n_below_two_rejected() {
        let x = Tensor::scalar(0.0).unwrap();
        let err = share_n(&x, 1, &NoiseSpec::default(), 0, &mut RandomSource::new(0, 0)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn reconstruct_detects_missing_and_mismatched() {
        let noise = NoiseSpec::default();
        let x = Tensor::scalar(0.1).unwrap();
        let mut rng = RandomSource::new(2, 0);
        let (a, b) = share_two(&x, &noise, 1, &mut rng).unwrap();
        assert!(matches!(reconstruct(&[b.clone()]), Err(Error::IncompleteSet(_))));
        let (_, other) = share_two(&x, &noise, 2, &mut rng).unwrap();
        assert!(matches!(reconstruct(&[a.clone(), other]), Err(Error::IncompleteSet(_))));
        assert!(matches!(reconstruct(&[a.clone(), a]), Err(Error::IncompleteSet(_))));
    }

    #[test]
    fn noise_spec_validation() {
        assert!(NoiseSpec::new(1e5, 1.0).is_ok());
        assert!(NoiseSpec::new(1.0, 1.0).is_err());
        assert!(NoiseSpec::new(1e5, 0.0).is_err());
    }
}
