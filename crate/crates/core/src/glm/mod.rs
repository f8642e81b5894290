//! Generalized linear models trained by minibatched SGD, on plaintext or on
//! shares.
//!
//! The linear predictor is `theta = A W + c`, with one bias per class. Each
//! step moves `(W, c)` along `(1/m) R^T (s - mean(theta))` over a minibatch
//! `(R, s)`; weight decay shrinks `W` but never `c`. Probit uses the same
//! update form with the normal CDF as mean function.

mod experiment;
mod link;
mod metrics;
mod sgd;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use experiment::{
    run_experiment, run_experiment_party_tcp, Experiment, ExperimentConfig, ExperimentData, ExperimentReport,
};
pub use link::{link_inverse, link_mean, LinkApprox};
pub use metrics::{
    accuracy, average_log_likelihood, average_loss, gradient, metrics, normalized_discrepancy, residual_norm, Metrics,
};
pub use sgd::{sgd_step, train, train_in_context, train_private, Mode, TrainConfig, TrainOutput};
pub use synth::{synth_binary, synth_linear, synth_poisson, Synthetic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Identity,
    Logit,
    Probit,
    Log,
    Multinomial,
}

impl Link {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" | "linear" => Ok(Link::Identity),
            "logit" | "logistic" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            "log" | "poisson" => Ok(Link::Log),
            "multinomial" => Ok(Link::Multinomial),
            other => Err(Error::InvalidArgument(format!("unknown link {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Log => "log",
            Link::Multinomial => "multinomial",
        }
    }

    pub fn is_classifier(self) -> bool {
        matches!(self, Link::Logit | Link::Probit | Link::Multinomial)
    }
}

/// Design matrix and targets. For the multinomial link the targets are class
/// ids in `0..classes`; otherwise `classes` is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    a: Tensor,
    t: Tensor,
    classes: usize,
}

impl Dataset {
    pub fn new(a: Tensor, t: Tensor, classes: usize) -> Result<Self> {
        let (m, _) = a.shape2()?;
        if t.len() != m {
            return Err(Error::Shape(format!("{m} design rows but {} targets", t.len())));
        }
        if classes == 0 {
            return Err(Error::InvalidArgument("need at least one class".into()));
        }
        if classes > 1 {
            if let Some(bad) = t.data().iter().find(|&&v| v < 0.0 || v.fract() != 0.0 || v >= classes as f64) {
                return Err(Error::InvalidArgument(format!("class id {bad} outside 0..{classes}")));
            }
        }
        let t = t.reshape(&[m, 1])?;
        Ok(Dataset { a, t, classes })
    }

    pub fn design(&self) -> &Tensor {
        &self.a
    }

    pub fn targets(&self) -> &Tensor {
        &self.t
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn rows(&self) -> usize {
        self.a.dims()[0]
    }

    pub fn covariates(&self) -> usize {
        self.a.shape2().map(|(_, n)| n).unwrap_or(0)
    }

    /// Targets as an `m x k` matrix: one-hot rows for class ids.
    pub fn target_matrix(&self) -> Result<Tensor> {
        if self.classes == 1 {
            return Ok(self.t.clone());
        }
        let m = self.rows();
        let mut data = vec![0.0; m * self.classes];
        for (i, &c) in self.t.data().iter().enumerate() {
            data[i * self.classes + c as usize] = 1.0;
        }
        Tensor::new(vec![m, self.classes], data)
    }

    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        Dataset::new(self.a.select_rows(rows)?, self.t.select_rows(rows)?, self.classes)
    }
}

/// Weights `W` (`n x k`) and biases `c` (`1 x k`).
#[derive(Clone, Debug, PartialEq)]
pub struct GlmModel {
    pub link: Link,
    pub w: Tensor,
    pub c: Tensor,
}

impl GlmModel {
    pub fn zeros(link: Link, n: usize, k: usize) -> Self {
        GlmModel {
            link,
            w: Tensor::zeros(&[n, k]),
            c: Tensor::zeros(&[1, k]),
        }
    }

    pub fn new(link: Link, w: Tensor, c: Tensor) -> Result<Self> {
        let (_, k) = w.shape2()?;
        if c.len() != k {
            return Err(Error::Shape(format!("{k} weight columns but {} biases", c.len())));
        }
        let c = c.reshape(&[1, k])?;
        Ok(GlmModel { link, w, c })
    }

    pub fn covariates(&self) -> usize {
        self.w.dims()[0]
    }

    pub fn classes(&self) -> usize {
        self.w.dims()[1]
    }

    /// `A W + c` for every row of `a`.
    pub fn predictor(&self, a: &Tensor) -> Result<Tensor> {
        let (m, _) = a.shape2()?;
        a.matmul(&self.w)?.add(&self.c.repeat_rows(m)?)
    }
}

/// Serialized model with its training configuration and loss history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: u32,
    pub link: Link,
    pub n: usize,
    pub k: usize,
    /// Row-major `n x k`.
    pub w: Vec<f64>,
    pub c: Vec<f64>,
    pub config: TrainConfig,
    pub loss_history: Vec<f64>,
}

impl Checkpoint {
    pub fn from_output(out: &TrainOutput) -> Self {
        let m = &out.model;
        Checkpoint {
            schema: 1,
            link: m.link,
            n: m.covariates(),
            k: m.classes(),
            w: m.w.data().to_vec(),
            c: m.c.data().to_vec(),
            config: out.config.clone(),
            loss_history: out.loss_history.clone(),
        }
    }

    pub fn model(&self) -> Result<GlmModel> {
        GlmModel::new(
            self.link,
            Tensor::new(vec![self.n, self.k], self.w.clone())?,
            Tensor::new(vec![1, self.k], self.c.clone())?,
        )
    }
}
