use serde::{Deserialize, Serialize};

use super::Link;
use crate::approx::{
    cheb_eval_odd, cheb_fit_odd, exp_scaled, logistic, normal_cdf, relu, softmax_shifted, ChebOddSeries, ExpConfig,
    NewtonConfig, SoftmaxConfig,
};
use crate::arith::Engine;
use crate::error::{Error, Result};

/// Approximations used to evaluate mean functions on shares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkApprox {
    /// `sigma(x) - 1/2` on `[-z, z]`.
    pub logistic: ChebOddSeries,
    /// `Phi(x) - 1/2` on `[-z, z]`.
    pub probit: ChebOddSeries,
    /// Sign iteration for saturating predictors into `[-z, z]`.
    pub clamp: NewtonConfig,
    pub exp: ExpConfig,
    pub softmax: SoftmaxConfig,
}

impl LinkApprox {
    pub fn new(logistic_terms: usize, probit_terms: usize, z: f64) -> Result<Self> {
        Ok(LinkApprox {
            logistic: cheb_fit_odd("logistic-train", |x| logistic(x) - 0.5, logistic_terms, z)?,
            probit: cheb_fit_odd("probit-train", |x| normal_cdf(x) - 0.5, probit_terms, z)?,
            clamp: NewtonConfig::new(45, 1e3)?,
            exp: ExpConfig::default(),
            softmax: SoftmaxConfig::default(),
        })
    }
}

impl Default for LinkApprox {
    fn default() -> Self {
        LinkApprox::new(60, 50, 20.0).expect("default series sizes are valid")
    }
}

/// `min(max(x, -z), z) = x - relu(x - z) + relu(-x - z)`, with both ReLUs
/// evaluated in one stacked pass.
fn saturate<E: Engine>(e: &mut E, x: &E::Value, z: f64, cfg: &NewtonConfig) -> Result<E::Value> {
    let m = e.dims(x)[0];
    let stacked = e.linear(x, |t| t.stack_rows(&t.neg()))?;
    let shifted = e.add_scalar(&stacked, -z)?;
    let r = relu(e, &shifted, cfg)?;
    let excess = e.linear(&r, |t| t.row_range(0, m)?.sub(&t.row_range(m, 2 * m)?))?;
    e.sub(x, &excess)
}

fn centered_series<E: Engine>(e: &mut E, x: &E::Value, series: &ChebOddSeries, cfg: &NewtonConfig) -> Result<E::Value> {
    let clamped = saturate(e, x, series.z, cfg)?;
    let s = cheb_eval_odd(e, series, &clamped)?;
    e.add_scalar(&s, 0.5)
}

/// Approximate mean function applied to an `m x k` predictor.
pub fn link_mean<E: Engine>(e: &mut E, link: Link, theta: &E::Value, approx: &LinkApprox) -> Result<E::Value> {
    if e.dims(theta).len() != 2 {
        return Err(Error::Shape(format!("predictor must be a matrix, got {:?}", e.dims(theta))));
    }
    match link {
        Link::Identity => Ok(theta.clone()),
        Link::Logit => centered_series(e, theta, &approx.logistic, &approx.clamp),
        Link::Probit => centered_series(e, theta, &approx.probit, &approx.clamp),
        Link::Log => exp_scaled(e, theta, &approx.exp),
        Link::Multinomial => softmax_shifted(e, theta, &approx.softmax),
    }
}

/// Exact mean function at one predictor value; not defined for multinomial.
pub fn link_inverse(link: Link, theta: f64) -> Result<f64> {
    match link {
        Link::Identity => Ok(theta),
        Link::Logit => Ok(logistic(theta)),
        Link::Probit => Ok(normal_cdf(theta)),
        Link::Log => Ok(theta.exp()),
        Link::Multinomial => Err(Error::InvalidArgument("multinomial mean needs a whole row".into())),
    }
}
