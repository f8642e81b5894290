use serde::{Deserialize, Serialize};

use super::link::link_inverse;
use super::{Dataset, GlmModel, Link};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln Phi(x)`, switching to the asymptotic tail series far left.
fn ln_normal_cdf(x: f64) -> f64 {
    if x > -37.0 {
        return (0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)).ln();
    }
    let r = 1.0 / (x * x);
    -0.5 * x * x - (-x).ln() - LN_SQRT_2PI + (1.0 - r + 3.0 * r * r - 15.0 * r * r * r).ln()
}

fn ln_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn check(model: &GlmModel, data: &Dataset) -> Result<Tensor> {
    if model.covariates() != data.covariates() {
        return Err(Error::Shape(format!(
            "model has {} covariates, data {}",
            model.covariates(),
            data.covariates()
        )));
    }
    let want_k = if model.link == Link::Multinomial { data.classes() } else { 1 };
    if model.classes() != want_k {
        return Err(Error::Shape(format!("model has {} columns, data needs {want_k}", model.classes())));
    }
    model.predictor(data.design())
}

/// Per-row log-likelihood terms, without constants for the identity link.
fn row_log_likelihood(link: Link, theta: &[f64], t: f64) -> f64 {
    let x = theta[0];
    match link {
        Link::Identity => -0.5 * (x - t) * (x - t),
        Link::Logit => -t * softplus(-x) - (1.0 - t) * softplus(x),
        Link::Probit => t * ln_normal_cdf(x) + (1.0 - t) * ln_normal_cdf(-x),
        Link::Log => t * x - x.exp() - libm::lgamma(t + 1.0),
        Link::Multinomial => theta[t as usize] - log_sum_exp(theta),
    }
}

/// Average log-likelihood per row. Gaussian terms are `-(r^2)/2`; Poisson
/// terms include `-ln t!`.
pub fn average_log_likelihood(model: &GlmModel, data: &Dataset) -> Result<f64> {
    let theta = check(model, data)?;
    let k = model.classes();
    let m = data.rows();
    let total: f64 = theta
        .data()
        .chunks(k)
        .zip(data.targets().data())
        .map(|(row, &t)| row_log_likelihood(model.link, row, t))
        .sum();
    Ok(total / m as f64)
}

/// Training loss per row: `||A w + c - b||^2 / m` for the identity link,
/// the average negative log-likelihood otherwise.
pub fn average_loss(model: &GlmModel, data: &Dataset) -> Result<f64> {
    let ll = average_log_likelihood(model, data)?;
    Ok(if model.link == Link::Identity { -2.0 * ll } else { -ll })
}

/// Gradient of [`average_log_likelihood`] with respect to `(W, c)`.
pub fn gradient(model: &GlmModel, data: &Dataset) -> Result<(Tensor, Tensor)> {
    let theta = check(model, data)?;
    let k = model.classes();
    let m = data.rows();
    let mut d = Vec::with_capacity(m * k);
    for (row, &t) in theta.data().chunks(k).zip(data.targets().data()) {
        match model.link {
            Link::Multinomial => {
                let lse = log_sum_exp(row);
                for (j, x) in row.iter().enumerate() {
                    let hit = if j == t as usize { 1.0 } else { 0.0 };
                    d.push(hit - (x - lse).exp());
                }
            }
            Link::Probit => {
                let x = row[0];
                // d/dx of t ln Phi(x) + (1-t) ln Phi(-x)
                let up = (ln_normal_pdf(x) - ln_normal_cdf(x)).exp();
                let down = (ln_normal_pdf(x) - ln_normal_cdf(-x)).exp();
                d.push(t * up - (1.0 - t) * down);
            }
            link => d.push(t - link_inverse(link, row[0])?),
        }
    }
    let d = Tensor::new(vec![m, k], d)?;
    let scale = 1.0 / m as f64;
    let gw = data.design().transpose()?.matmul(&d)?.scale(scale)?;
    let gc = d.sum_rows()?.scale(scale)?;
    Ok((gw, gc))
}

/// Fraction of rows classified correctly, for classifiers.
pub fn accuracy(model: &GlmModel, data: &Dataset) -> Result<Option<f64>> {
    if !model.link.is_classifier() {
        return Ok(None);
    }
    let theta = check(model, data)?;
    let k = model.classes();
    let hits = theta
        .data()
        .chunks(k)
        .zip(data.targets().data())
        .filter(|(row, &t)| {
            let guess = if k == 1 {
                if row[0] > 0.0 { 1.0 } else { 0.0 }
            } else {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                    .0 as f64
            };
            guess == t
        })
        .count();
    Ok(Some(hits as f64 / data.rows() as f64))
}

/// `||A w + c - b||` for a single-column model.
pub fn residual_norm(model: &GlmModel, data: &Dataset) -> Result<f64> {
    let theta = check(model, data)?;
    Ok(theta.sub(data.targets())?.norm2())
}

/// `|| x/||x|| - w/||w|| ||`.
pub fn normalized_discrepancy(x: &[f64], w: &[f64]) -> Result<f64> {
    if x.len() != w.len() {
        return Err(Error::Shape(format!("{} vs {} entries", x.len(), w.len())));
    }
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nw = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || nw == 0.0 {
        return Err(Error::Domain("discrepancy of a zero vector".into()));
    }
    Ok(x.iter()
        .zip(w)
        .map(|(a, b)| (a / nx - b / nw).powi(2))
        .sum::<f64>()
        .sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub loss: f64,
    pub avg_log_likelihood: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

pub fn metrics(model: &GlmModel, data: &Dataset) -> Result<Metrics> {
    let ll = average_log_likelihood(model, data)?;
    Ok(Metrics {
        loss: if model.link == Link::Identity { -2.0 * ll } else { -ll },
        avg_log_likelihood: ll,
        accuracy: accuracy(model, data)?,
        residual: if model.link == Link::Identity { Some(residual_norm(model, data)?) } else { None },
    })
}
