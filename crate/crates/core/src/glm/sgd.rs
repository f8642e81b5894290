use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::link::{link_mean, LinkApprox};
use super::metrics::average_loss;
use super::{Dataset, GlmModel, Link};
use crate::arith::{Engine, Public};
use crate::error::{Error, Result};
use crate::leakage::LeakageLedger;
use crate::runtime::{run_parties_simulated, PartyContext, SessionConfig};
use crate::sharing::{NoiseSpec, TripleKind};
use crate::tensor::{RandomSource, Tensor};

/// Stream for minibatch permutations; shared by both modes so equal seeds
/// visit the same rows.
pub(crate) const BATCH_STREAM: u64 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Public,
    Private,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub eta: f64,
    pub minibatch: usize,
    pub iterations: usize,
    /// Weight decay on `W`; the bias is not decayed.
    pub rho: f64,
    pub mode: Mode,
    pub gamma: f64,
    pub n_parties: usize,
    pub seed: u64,
    pub logistic_terms: usize,
    pub probit_terms: usize,
    pub series_z: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 3.0,
            minibatch: 8,
            iterations: 10_000,
            rho: 0.0,
            mode: Mode::Public,
            gamma: crate::sharing::DEFAULT_GAMMA,
            n_parties: 2,
            seed: 0,
            logistic_terms: 60,
            probit_terms: 50,
            series_z: 20.0,
        }
    }
}

impl TrainConfig {
    /// Defaults for a link: step size 3e-2 for identity, 3e-3 for log, 3
    /// otherwise; multinomial models get weight decay 1e-3.
    pub fn for_link(link: Link) -> Self {
        let mut cfg = TrainConfig::default();
        cfg.eta = match link {
            Link::Identity => 3e-2,
            Link::Log => 3e-3,
            _ => 3.0,
        };
        if link == Link::Multinomial {
            cfg.rho = 1e-3;
        }
        cfg
    }

    pub fn approx(&self) -> Result<LinkApprox> {
        LinkApprox::new(self.logistic_terms, self.probit_terms, self.series_z)
    }

    pub fn validate(&self, rows: usize) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {}", self.eta)));
        }
        if self.minibatch == 0 || self.minibatch > rows {
            return Err(Error::InvalidArgument(format!(
                "minibatch {} must be in 1..={rows}",
                self.minibatch
            )));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight decay must be non-negative, got {}", self.rho)));
        }
        if self.n_parties < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 parties, got {}", self.n_parties)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: GlmModel,
    /// Training loss (see [`average_loss`]): once per epoch in public mode, initial and final only in private mode.
    pub loss_history: Vec<f64>,
    pub config: TrainConfig,
    pub ledger: Option<LeakageLedger>,
    pub triples_used: BTreeMap<TripleKind, u64>,
    pub rounds: u64,
}

/// One averaged SGD step on the minibatch `(r, s)`.
#[allow(clippy::too_many_arguments)]
pub fn sgd_step<E: Engine>(
    e: &mut E,
    link: Link,
    approx: &LinkApprox,
    w: &E::Value,
    c: &E::Value,
    r: &E::Value,
    s: &E::Value,
    eta: f64,
    rho: f64,
) -> Result<(E::Value, E::Value)> {
    let mb = e.dims(r)[0];
    let rw = e.matmul(r, w)?;
    let bias = e.linear(c, |t| t.repeat_rows(mb))?;
    let theta = e.add(&rw, &bias)?;
    let mu = link_mean(e, link, &theta, approx)?;
    let d = e.sub(s, &mu)?;
    let rt = e.linear(r, |t| t.transpose())?;
    let g = e.matmul(&rt, &d)?;
    let step = eta / mb as f64;
    let decayed = e.scale(w, 1.0 - eta * rho)?;
    let g = e.scale(&g, step)?;
    let w = e.add(&decayed, &g)?;
    let gc = e.linear(&d, |t| t.sum_rows()?.scale(step))?;
    let c = e.add(c, &gc)?;
    Ok((w, c))
}

/// Runs `cfg.iterations` SGD steps from zero weights. `a` is `m x n`, `s` is
/// `m x k`. `on_epoch` receives the iteration count before each pass over
/// a fresh permutation and once at the end.
#[allow(clippy::too_many_arguments)]
pub fn train_in_context<E: Engine>(
    e: &mut E,
    link: Link,
    a: &E::Value,
    s: &E::Value,
    cfg: &TrainConfig,
    approx: &LinkApprox,
    batches: &mut RandomSource,
    mut on_epoch: impl FnMut(&mut E, usize, &E::Value, &E::Value) -> Result<()>,
) -> Result<(E::Value, E::Value)> {
    let (m, n) = match e.dims(a) {
        [m, n] => (*m, *n),
        d => return Err(Error::Shape(format!("design must be a matrix, got {d:?}"))),
    };
    let k = match e.dims(s) {
        [ms, k] if *ms == m => *k,
        d => return Err(Error::Shape(format!("targets {d:?} do not match {m} rows"))),
    };
    cfg.validate(m)?;
    let mut w = e.constant(&Tensor::zeros(&[n, k]));
    let mut c = e.constant(&Tensor::zeros(&[1, k]));
    let mut order: Vec<usize> = Vec::new();
    let mut pos = m;
    let mb = cfg.minibatch;
    for it in 0..cfg.iterations {
        if pos + mb > m {
            on_epoch(e, it, &w, &c)?;
            order = batches.permutation(m);
            pos = 0;
        }
        let idx = &order[pos..pos + mb];
        pos += mb;
        let r = e.linear(a, |t| t.select_rows(idx))?;
        let sb = e.linear(s, |t| t.select_rows(idx))?;
        let (w2, c2) = sgd_step(e, link, approx, &w, &c, &r, &sb, cfg.eta, cfg.rho).map_err(|err| match err {
            Error::NonFinite(_) => Error::TrainingDiverged { iteration: it },
            other => other,
        })?;
        w = w2;
        c = c2;
    }
    on_epoch(e, cfg.iterations, &w, &c)?;
    Ok((w, c))
}

fn loss(model: &GlmModel, data: &Dataset, iteration: usize) -> Result<f64> {
    let v = average_loss(model, data)?;
    if !v.is_finite() {
        return Err(Error::TrainingDiverged { iteration });
    }
    Ok(v)
}

/// Trains on plaintext or, in private mode, on shares among simulated parties.
pub fn train(data: &Dataset, link: Link, cfg: &TrainConfig) -> Result<TrainOutput> {
    check_link(data, link)?;
    match cfg.mode {
        Mode::Public => train_public(data, link, cfg),
        Mode::Private => {
            let session = SessionConfig::new(cfg.n_parties, cfg.seed, NoiseSpec::new(cfg.gamma, 1.0)?);
            train_private(data, link, cfg, &session)
        }
    }
}

fn check_link(data: &Dataset, link: Link) -> Result<()> {
    match (link, data.classes()) {
        (Link::Multinomial, k) if k < 2 => Err(Error::InvalidArgument("multinomial needs at least 2 classes".into())),
        (Link::Multinomial, _) | (_, 1) => Ok(()),
        (l, k) => Err(Error::InvalidArgument(format!("{} link with {k} classes", l.name()))),
    }
}

fn train_public(data: &Dataset, link: Link, cfg: &TrainConfig) -> Result<TrainOutput> {
    let approx = cfg.approx()?;
    let mut batches = RandomSource::new(cfg.seed, BATCH_STREAM);
    let s = data.target_matrix()?;
    let mut history = Vec::new();
    let mut e = Public::new();
    let (w, c) = train_in_context(&mut e, link, data.design(), &s, cfg, &approx, &mut batches, |_, it, w, c| {
        let model = GlmModel::new(link, w.clone(), c.clone())?;
        history.push(loss(&model, data, it)?);
        Ok(())
    })?;
    Ok(TrainOutput {
        model: GlmModel::new(link, w, c)?,
        loss_history: history,
        config: cfg.clone(),
        ledger: None,
        triples_used: BTreeMap::new(),
        rounds: 0,
    })
}

/// Public facts every party needs before the owner shares its data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct DataShape {
    pub rows: usize,
    pub covariates: usize,
    pub classes: usize,
    pub design_beta: f64,
    pub target_beta: f64,
}

impl DataShape {
    pub fn of(data: &Dataset) -> Result<Self> {
        let s = data.target_matrix()?;
        Ok(DataShape {
            rows: data.rows(),
            covariates: data.covariates(),
            classes: s.dims()[1],
            design_beta: data.design().max_abs().max(1.0),
            target_beta: s.max_abs().max(1.0),
        })
    }
}

pub(crate) struct PartyResult {
    pub w: Tensor,
    pub c: Tensor,
    pub ledger: LeakageLedger,
    pub triples_used: BTreeMap<TripleKind, u64>,
    pub rounds: u64,
}

/// One party's side of private training; party 0 owns the data.
pub(crate) fn party_train(
    ctx: &mut PartyContext,
    data: Option<&Dataset>,
    shape: DataShape,
    link: Link,
    cfg: &TrainConfig,
) -> Result<PartyResult> {
    let approx = cfg.approx()?;
    let owned = if ctx.party_id() == 0 {
        let d = data.ok_or_else(|| Error::InvalidArgument("party 0 must hold the data".into()))?;
        Some((d.design().clone(), d.target_matrix()?))
    } else {
        None
    };
    let a = ctx.share_input(
        0,
        owned.as_ref().map(|o| &o.0),
        &[shape.rows, shape.covariates],
        shape.design_beta,
        "design matrix",
    )?;
    let s = ctx.share_input(
        0,
        owned.as_ref().map(|o| &o.1),
        &[shape.rows, shape.classes],
        shape.target_beta,
        "targets",
    )?;
    let mut batches = RandomSource::new(cfg.seed, BATCH_STREAM);
    let (w, c) = train_in_context(ctx, link, &a, &s, cfg, &approx, &mut batches, |_, _, _, _| Ok(()))?;
    let w = ctx.reveal(&w)?;
    let c = ctx.reveal(&c)?;
    Ok(PartyResult {
        w,
        c,
        ledger: ctx.ledger().clone(),
        triples_used: ctx.triples_used().clone(),
        rounds: ctx.rounds(),
    })
}

/// Private training among simulated parties; the revealed model is
/// evaluated on the plaintext data for the loss history.
pub fn train_private(data: &Dataset, link: Link, cfg: &TrainConfig, session: &SessionConfig) -> Result<TrainOutput> {
    check_link(data, link)?;
    let shape = DataShape::of(data)?;
    let mut results = run_parties_simulated(session, |ctx| {
        let mine = (ctx.party_id() == 0).then_some(data);
        party_train(ctx, mine, shape, link, cfg)
    })?;
    finish_private(results.swap_remove(0), data, link, cfg)
}

pub(crate) fn finish_private(r: PartyResult, data: &Dataset, link: Link, cfg: &TrainConfig) -> Result<TrainOutput> {
    let model = GlmModel::new(link, r.w, r.c)?;
    let initial = GlmModel::zeros(link, model.covariates(), model.classes());
    let loss_history = vec![loss(&initial, data, 0)?, loss(&model, data, cfg.iterations)?];
    Ok(TrainOutput {
        model,
        loss_history,
        config: cfg.clone(),
        ledger: Some(r.ledger),
        triples_used: r.triples_used,
        rounds: r.rounds,
    })
}
