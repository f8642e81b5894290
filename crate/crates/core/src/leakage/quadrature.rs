//! Adaptive Gauss-Kronrod (7/15) integration and bounded priors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` by bisecting the
/// subinterval with the largest error estimate.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= tol {
            return Ok(parts.iter().map(|p| p.2).sum());
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::NumericFailure {
                message: format!("quadrature on [{a}, {b}] did not converge"),
                residual: err,
            });
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// Binary entropy in bits with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// Distribution of a secret supported on `[-beta, beta]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundedPrior {
    /// `+beta` or `-beta` with equal probability.
    Rademacher { beta: f64 },
    Uniform { beta: f64 },
    /// Finitely many support points with their probabilities.
    Grid {
        beta: f64,
        points: Vec<f64>,
        probs: Vec<f64>,
    },
}

impl BoundedPrior {
    pub fn point_mass(at: f64, beta: f64) -> Result<Self> {
        BoundedPrior::grid(beta, vec![at], vec![1.0])
    }

    pub fn grid(beta: f64, points: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let prior = BoundedPrior::Grid {
            beta,
            points,
            probs,
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn beta(&self) -> f64 {
        match self {
            BoundedPrior::Rademacher { beta }
            | BoundedPrior::Uniform { beta }
            | BoundedPrior::Grid { beta, .. } => *beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let beta = self.beta();
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("prior bound must be positive, got {beta}")));
        }
        if let BoundedPrior::Grid { points, probs, .. } = self {
            if points.len() != probs.len() || points.is_empty() {
                return Err(Error::InvalidArgument("grid prior needs matching points and probs".into()));
            }
            if points.iter().any(|p| p.abs() > beta || !p.is_finite()) {
                return Err(Error::InvalidArgument("grid support outside [-beta, beta]".into()));
            }
            if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidArgument("grid probabilities outside [0, 1]".into()));
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("grid probabilities sum to {total}")));
            }
        }
        Ok(())
    }

    /// `P(X <= y)`.
    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            BoundedPrior::Rademacher { beta } => {
                if y < -beta {
                    0.0
                } else if y < *beta {
                    0.5
                } else {
                    1.0
                }
            }
            BoundedPrior::Uniform { beta } => ((y + beta) / (2.0 * beta)).clamp(0.0, 1.0),
            BoundedPrior::Grid { points, probs, .. } => points
                .iter()
                .zip(probs)
                .filter(|(p, _)| **p <= y)
                .map(|(_, q)| q)
                .sum::<f64>()
                .min(1.0),
        }
    }

    /// Points where the CDF may jump, within `[-beta, beta]`, sorted.
    fn breakpoints(&self) -> Vec<f64> {
        let beta = self.beta();
        let mut pts = vec![-beta, beta];
        match self {
            BoundedPrior::Rademacher { .. } | BoundedPrior::Uniform { .. } => {}
            BoundedPrior::Grid { points, .. } => pts.extend(points.iter().copied()),
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// `integral over [-beta, beta] of h(F(y)) dy`, integrated piecewise between
/// CDF jumps so that each piece is smooth.
pub(crate) fn entropy_integral(prior: &BoundedPrior, tol: f64) -> Result<f64> {
    let pts = prior.breakpoints();
    let pieces = (pts.len() - 1).max(1) as f64;
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        total += integrate(|y| binary_entropy(prior.cdf(y)), a, b, tol / pieces)?;
    }
    Ok(total)
}
