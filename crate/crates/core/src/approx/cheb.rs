//! Odd Chebyshev series on `[-z, z]`.
//!
//! For odd `f` the expansion `f(y) = sum_j c_j T_j(y / z)` over odd `j` has
//! coefficients from `n` Chebyshev nodes, and evaluation needs only one
//! square of `x = y / z` plus the recurrence
//! `t_{2k+1} = (4 x^2 - 2) t_{2k-1} - t_{2k-3}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::arith::Engine;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebOddSeries {
    pub name: String,
    /// Number of odd terms; the polynomial has degree `2n - 1`.
    pub n: usize,
    /// Half-width of the interval of validity.
    pub z: f64,
    /// `c_1, c_3, ..., c_{2n-1}`.
    pub coeffs: Vec<f64>,
}

/// Fits `n` odd Chebyshev coefficients of `f` on `[-z, z]`.
pub fn cheb_fit_odd(name: &str, f: impl Fn(f64) -> f64, n: usize, z: f64) -> Result<ChebOddSeries> {
    if n == 0 {
        return Err(Error::InvalidArgument("series needs at least one term".into()));
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::InvalidArgument(format!("series half-width must be positive, got {z}")));
    }
    let angles: Vec<f64> = (1..=n).map(|k| (2 * k - 1) as f64 * PI / (4 * n) as f64).collect();
    let samples: Vec<f64> = angles.iter().map(|a| f(z * a.cos())).collect();
    let coeffs = (0..n)
        .map(|i| {
            let j = (2 * i + 1) as f64;
            let s: f64 = angles.iter().zip(&samples).map(|(a, fa)| (j * a).cos() * fa).sum();
            2.0 * s / n as f64
        })
        .collect();
    Ok(ChebOddSeries {
        name: name.to_string(),
        n,
        z,
        coeffs,
    })
}

impl ChebOddSeries {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: ChebOddSeries = serde_json::from_str(text)?;
        if s.coeffs.len() != s.n || s.n == 0 || !(s.z > 0.0) {
            return Err(Error::format(None, "series needs n >= 1 coefficients and z > 0"));
        }
        Ok(s)
    }

    /// Magnitude of the highest-order coefficient.
    pub fn last_coeff(&self) -> f64 {
        self.coeffs.last().map_or(0.0, |c| c.abs())
    }

    /// Sum of coefficient magnitudes from term index `from` on, a rough
    /// estimate of the error made by truncating there.
    pub fn tail_sum(&self, from: usize) -> f64 {
        self.coeffs.iter().skip(from).map(|c| c.abs()).sum()
    }

    /// Plaintext evaluation at one point.
    pub fn eval_scalar(&self, y: f64) -> Result<f64> {
        let t = Tensor::scalar(y)?;
        Ok(cheb_eval_odd(&mut crate::arith::Public::new(), self, &t)?.data()[0])
    }
}

/// Evaluates the series at `y`; plaintext inputs must lie in `[-z, z]`.
pub fn cheb_eval_odd<E: Engine>(e: &mut E, series: &ChebOddSeries, y: &E::Value) -> Result<E::Value> {
    if let Some(t) = e.peek(y) {
        let m = t.max_abs();
        if m > series.z {
            return Err(Error::Domain(format!(
                "series {} valid on [-{z}, {z}], got |y| = {m}",
                series.name,
                z = series.z
            )));
        }
    }
    let x = e.scale(y, 1.0 / series.z)?;
    let mut acc = e.scale(&x, series.coeffs[0])?;
    if series.n == 1 {
        return Ok(acc);
    }
    let x2 = e.square(&x)?;
    let x2_4 = e.scale(&x2, 4.0)?;
    let u = e.add_scalar(&x2_4, -2.0)?;
    let v = e.add_scalar(&x2_4, -3.0)?;
    let mut prev = x.clone();
    let mut cur = e.mul(&v, &x)?;
    let term = e.scale(&cur, series.coeffs[1])?;
    acc = e.add(&acc, &term)?;
    for &c in &series.coeffs[2..] {
        let next = e.mul(&u, &cur)?;
        let next = e.sub(&next, &prev)?;
        let term = e.scale(&next, c)?;
        acc = e.add(&acc, &term)?;
        prev = cur;
        cur = next;
    }
    Ok(acc)
}

/// Standard logistic function.
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Named series: `tanh`, `logistic`, `probit` at sizes giving 7, 4 and 5
/// digits, and `logistic-train`, `probit-train` on `[-20, 20]` for training.
/// Logistic and probit series approximate the function minus one half.
pub fn preset(name: &str) -> Result<ChebOddSeries> {
    let centered_logistic = |x: f64| logistic(x) - 0.5;
    let centered_probit = |x: f64| normal_cdf(x) - 0.5;
    match name {
        "tanh" => cheb_fit_odd(name, f64::tanh, 50, 10.0),
        "logistic" => cheb_fit_odd(name, centered_logistic, 22, 5.0),
        "probit" => cheb_fit_odd(name, centered_probit, 34, 10.0),
        "logistic-train" => cheb_fit_odd(name, centered_logistic, 60, 20.0),
        "probit-train" => cheb_fit_odd(name, centered_probit, 50, 20.0),
        other => Err(Error::InvalidArgument(format!("unknown series preset {other:?}"))),
    }
}

pub const PRESETS: [&str; 5] = ["tanh", "logistic", "probit", "logistic-train", "probit-train"];
