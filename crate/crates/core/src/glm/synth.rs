use super::{Dataset, Link};
use crate::approx::{logistic, normal_cdf};
use crate::error::{Error, Result};
use crate::tensor::{RandomSource, Tensor};

/// Number of near-boundary row pairs in binary data.
const PAIRS: usize = 10;

/// Generated data with the parameters that produced it.
#[derive(Clone, Debug)]
pub struct Synthetic {
    pub data: Dataset,
    /// Ideal weights, `n x 1`.
    pub w: Tensor,
    /// Ideal bias.
    pub bias: f64,
    /// Known minimal residual norm, where the construction fixes one.
    pub optimum: Option<f64>,
}

fn gaussian_orthonormal(m: usize, n: usize, rng: &mut RandomSource) -> Result<Tensor> {
    if n > m {
        return Err(Error::InvalidArgument(format!("need at least {n} rows, got {m}")));
    }
    rng.normal_tensor(&[m, n]).orthonormalize_columns()
}

/// `b = A w + 10 v` with `[A v]` orthonormal, so the least-squares residual
/// of `A x ~ b` is 10.
pub fn synth_linear(m: usize, n: usize, rng: &mut RandomSource) -> Result<Synthetic> {
    let q = gaussian_orthonormal(m, n + 1, rng)?;
    let a = q.col_range(0, n)?;
    let v = q.col_range(n, n + 1)?;
    let w = rng.normal_tensor(&[n, 1]);
    let b = a.matmul(&w)?.add(&v.scale(10.0)?)?;
    Ok(Synthetic {
        data: Dataset::new(a, b, 1)?,
        w,
        bias: 0.0,
        optimum: Some(10.0),
    })
}

/// Separable binary data with ten row pairs straddling the boundary at
/// `+-margin`; labels are `round(mean(A w))` under the link's mean.
pub fn synth_binary(m: usize, n: usize, margin: f64, link: Link, rng: &mut RandomSource) -> Result<Synthetic> {
    let mean: fn(f64) -> f64 = match link {
        Link::Logit | Link::Multinomial => logistic,
        Link::Probit => normal_cdf,
        other => return Err(Error::InvalidArgument(format!("binary data for a {} link", other.name()))),
    };
    if m < 2 * PAIRS || n == 0 {
        return Err(Error::InvalidArgument(format!("binary data needs m >= {} and n >= 1", 2 * PAIRS)));
    }
    let w = rng.normal_tensor(&[n, 1]);
    let w = w.scale(1.0 / w.norm2())?;
    let q = gaussian_orthonormal(m, n, rng)?;
    let mut rows: Vec<Vec<f64>> = (0..m).map(|i| q.data()[i * n..(i + 1) * n].to_vec()).collect();
    for j in 0..PAIRS {
        let v = rng.normal_tensor(&[n, 1]);
        let along = v.transpose()?.matmul(&w)?.data()[0];
        let u = v.sub(&w.scale(along)?)?;
        rows[2 * j] = u.add(&w.scale(margin)?)?.into_data();
        rows[2 * j + 1] = u.sub(&w.scale(margin)?)?.into_data();
    }
    let a = Tensor::from_rows(&rows)?;
    let b = a.matmul(&w)?;
    let t = b.map(|x| mean(x).round())?;
    Ok(Synthetic {
        data: Dataset::new(a, t, 1)?,
        w,
        bias: 0.0,
        optimum: None,
    })
}

/// Counts `round(exp(A w + 3))` with orthonormal `A` and `||w|| = 10`.
pub fn synth_poisson(m: usize, n: usize, rng: &mut RandomSource) -> Result<Synthetic> {
    let a = gaussian_orthonormal(m, n, rng)?;
    let w = rng.normal_tensor(&[n, 1]);
    let w = w.scale(10.0 / w.norm2())?;
    let b = a.matmul(&w)?.add_scalar(3.0)?;
    let t = b.map(|x| x.exp().round())?;
    Ok(Synthetic {
        data: Dataset::new(a, t, 1)?,
        w,
        bias: 3.0,
        optimum: None,
    })
}
