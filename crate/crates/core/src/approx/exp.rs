//! Exponential by scaling and squaring, and a shifted softmax built on it.
//!
//! `exp(x)` is `(1 + x / 2^n)^(2^n)`, formed by `n` squarings. On shares the
//! first square is masked at width `gamma / 2^n` and the width doubles with
//! each squaring, which keeps the roundoff of early squarings from being
//! amplified by the later ones.

use serde::{Deserialize, Serialize};

use super::newton::{newton_recip, relu, NewtonConfig};
use crate::arith::Engine;
use crate::error::{Error, Result};
use crate::leakage::LeakageEvent;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpConfig {
    /// Number of squarings.
    pub squarings: u32,
    /// Caller-certified bound on `|x|`, used for leakage charging.
    pub beta: f64,
}

impl Default for ExpConfig {
    fn default() -> Self {
        ExpConfig {
            squarings: 20,
            beta: 20.0,
        }
    }
}

/// `exp(x)` for inputs of either sign, to relative accuracy about
/// `2 x^2 / 2^n`.
pub fn exp_scaled<E: Engine>(e: &mut E, x: &E::Value, cfg: &ExpConfig) -> Result<E::Value> {
    if cfg.squarings == 0 || cfg.squarings > 60 {
        return Err(Error::InvalidArgument(format!("squarings must be in 1..=60, got {}", cfg.squarings)));
    }
    let n = cfg.squarings;
    let entries = e.dims(x).iter().product::<usize>() as u64;
    let gamma = e.gamma();
    e.charge(
        "exp squaring chain",
        LeakageEvent::ExpChain {
            n,
            beta: cfg.beta,
            gamma,
        },
        entries,
    )?;
    let scale = 0.5f64.powi(n as i32);
    let y = e.scale(x, scale)?;
    let mut y = e.add_scalar(&y, 1.0)?;
    for k in 0..n {
        let width = gamma * 0.5f64.powi((n - k) as i32);
        y = e.chain_square(&y, width)?;
    }
    Ok(y)
}

/// `exp(x)` for `x <= 0`; plaintext inputs are checked.
pub fn exp_nonpos<E: Engine>(e: &mut E, x: &E::Value, cfg: &ExpConfig) -> Result<E::Value> {
    if let Some(t) = e.peek(x) {
        if let Some(bad) = t.data().iter().find(|&&v| v > 0.0) {
            return Err(Error::Domain(format!("exp_nonpos needs x <= 0, got {bad}")));
        }
    }
    exp_scaled(e, x, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxConfig {
    /// Offset subtracted from every input before the ReLU shift.
    pub offset: f64,
    pub exp: ExpConfig,
    pub sgn: NewtonConfig,
    pub recip: NewtonConfig,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        SoftmaxConfig {
            offset: 5.0,
            exp: ExpConfig::default(),
            sgn: NewtonConfig::sgn(),
            recip: NewtonConfig::recip(),
        }
    }
}

/// Row-wise softmax of an `m x k` matrix (a 1-D input is one row).
///
/// Each row is shifted by `C + sum_j relu(x_j - C)`, which makes every entry
/// non-positive without changing the distribution. The normalizer `Z` is
/// inverted as `(1/k) / (Z/k)` to keep the Newton input inside `(0, 1]`.
pub fn softmax_shifted<E: Engine>(e: &mut E, xs: &E::Value, cfg: &SoftmaxConfig) -> Result<E::Value> {
    let dims = e.dims(xs).to_vec();
    let (rows, k) = match dims.as_slice() {
        [k] => (1, *k),
        [m, k] => (*m, *k),
        _ => return Err(Error::Shape(format!("softmax expects a vector or matrix, got {dims:?}"))),
    };
    if k == 0 || rows == 0 {
        return Err(Error::InvalidArgument("softmax of an empty vector".into()));
    }
    let x = e.linear(xs, |t| t.reshape(&[rows, k]))?;
    let u = e.add_scalar(&x, -cfg.offset)?;
    let r = relu(e, &u, &cfg.sgn)?;
    let shift = e.linear(&r, |t| t.sum_cols()?.repeat_cols(k))?;
    let v = e.sub(&u, &shift)?;
    let ex = exp_scaled(e, &v, &cfg.exp)?;
    let z = e.linear(&ex, |t| t.sum_cols()?.scale(1.0 / k as f64))?;
    let inv = newton_recip(e, &z, &cfg.recip)?;
    let inv = e.linear(&inv, |t| t.scale(1.0 / k as f64)?.repeat_cols(k))?;
    let p = e.mul(&ex, &inv)?;
    e.linear(&p, |t| t.reshape(&dims))
}

/// Plaintext reference softmax of one row.
pub fn softmax_reference(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = ex.iter().sum();
    ex.iter().map(|v| v / z).collect()
}

/// Convenience: plaintext softmax through the approximation.
pub fn softmax_public(xs: &[f64]) -> Result<Vec<f64>> {
    let t = Tensor::new(vec![xs.len()], xs.to_vec())?;
    Ok(softmax_shifted(&mut crate::arith::Public::new(), &t, &SoftmaxConfig::default())?.into_data())
}
