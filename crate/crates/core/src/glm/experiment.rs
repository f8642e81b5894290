use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::metrics::{average_loss, metrics, normalized_discrepancy, Metrics};
use super::sgd::{finish_private, party_train, train_private, DataShape, Mode, TrainConfig, TrainOutput};
use super::synth::{synth_binary, synth_linear, synth_poisson, Synthetic};
use super::{train, Dataset, GlmModel, Link};
use crate::error::{Error, Result};
use crate::leakage::LeakageReport;
use crate::runtime::{run_party_tcp, run_party_tcp_server, SessionConfig, TcpServer, TripleSource, DEFAULT_TIMEOUT};
use crate::sharing::NoiseSpec;
use crate::tensor::{RandomSource, Tensor};

const DATA_STREAM: u64 = 5;

/// The synthetic validation experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Linear,
    Logit,
    Probit,
    Poisson,
    Multinomial2,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Linear,
        Experiment::Logit,
        Experiment::Probit,
        Experiment::Poisson,
        Experiment::Multinomial2,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment {s:?}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Linear => "linear",
            Experiment::Logit => "logit",
            Experiment::Probit => "probit",
            Experiment::Poisson => "poisson",
            Experiment::Multinomial2 => "multinomial2",
        }
    }

    pub fn link(self) -> Link {
        match self {
            Experiment::Linear => Link::Identity,
            Experiment::Logit => Link::Logit,
            Experiment::Probit => Link::Probit,
            Experiment::Poisson => Link::Log,
            Experiment::Multinomial2 => Link::Multinomial,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub gamma: f64,
    pub iterations: usize,
    pub minibatch: usize,
    /// Step size; the link default when `None`.
    pub eta: Option<f64>,
    pub mode: Mode,
    pub n_parties: usize,
    pub rows: usize,
    pub covariates: usize,
    pub margin: f64,
    pub triples: TripleSource,
    pub timeout: Duration,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        ExperimentConfig {
            experiment,
            seed,
            gamma: crate::sharing::DEFAULT_GAMMA,
            iterations: 10_000,
            minibatch: 8,
            eta: None,
            mode: Mode::Private,
            n_parties: 2,
            rows: 64,
            covariates: 8,
            margin: 0.02,
            triples: TripleSource::Seeded,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let link = self.experiment.link();
        let mut cfg = TrainConfig::for_link(link);
        // the two-class multinomial run mirrors the binary logit one
        cfg.rho = 0.0;
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        cfg.minibatch = self.minibatch;
        cfg.iterations = self.iterations;
        cfg.mode = self.mode;
        cfg.gamma = self.gamma;
        cfg.n_parties = self.n_parties;
        cfg.seed = self.seed;
        cfg
    }

    pub fn session(&self) -> Result<SessionConfig> {
        let mut s = SessionConfig::new(self.n_parties, self.seed, NoiseSpec::new(self.gamma, 1.0)?);
        s.triples = self.triples.clone();
        s.timeout = self.timeout;
        Ok(s)
    }
}

/// Generated data plus the ideal model it came from.
#[derive(Clone, Debug)]
pub struct ExperimentData {
    pub synthetic: Synthetic,
    pub data: Dataset,
    pub ideal: GlmModel,
}

impl ExperimentData {
    pub fn generate(cfg: &ExperimentConfig) -> Result<Self> {
        let mut rng = RandomSource::new(cfg.seed, DATA_STREAM);
        let (m, n) = (cfg.rows, cfg.covariates);
        let link = cfg.experiment.link();
        let synthetic = match cfg.experiment {
            Experiment::Linear => synth_linear(m, n, &mut rng)?,
            Experiment::Poisson => synth_poisson(m, n, &mut rng)?,
            _ => synth_binary(m, n, cfg.margin, link, &mut rng)?,
        };
        let bias = Tensor::row(vec![synthetic.bias])?;
        let (data, ideal) = if link == Link::Multinomial {
            let data = Dataset::new(synthetic.data.design().clone(), synthetic.data.targets().clone(), 2)?;
            let w: Vec<f64> = synthetic.w.data().iter().flat_map(|&v| [0.0, v]).collect();
            let w = Tensor::new(vec![n, 2], w)?;
            (data, GlmModel::new(link, w, Tensor::zeros(&[1, 2]))?)
        } else {
            (synthetic.data.clone(), GlmModel::new(link, synthetic.w.clone(), bias)?)
        };
        Ok(ExperimentData { synthetic, data, ideal })
    }

    /// Effective weight direction: the second-minus-first class column for
    /// two-class multinomial models.
    fn direction(model: &GlmModel) -> Result<Vec<f64>> {
        if model.link == Link::Multinomial {
            let w = &model.w;
            let diff = w.col_range(1, 2)?.sub(&w.col_range(0, 1)?)?;
            Ok(diff.into_data())
        } else {
            Ok(model.w.data().to_vec())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub experiment: Experiment,
    pub mode: Mode,
    pub seed: u64,
    pub gamma: f64,
    pub iterations: usize,
    pub minibatch: usize,
    pub eta: f64,
    pub n_parties: usize,
    pub metrics: Metrics,
    pub discrepancy: f64,
    pub ideal_loss: f64,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub loss_history: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leakage: Option<LeakageReport>,
    pub triples_used: BTreeMap<String, u64>,
    pub rounds: u64,
}

impl ExperimentReport {
    fn build(cfg: &ExperimentConfig, data: &ExperimentData, out: &TrainOutput) -> Result<Self> {
        let model = &out.model;
        Ok(ExperimentReport {
            schema: 1,
            experiment: cfg.experiment,
            mode: cfg.mode,
            seed: cfg.seed,
            gamma: cfg.gamma,
            iterations: cfg.iterations,
            minibatch: cfg.minibatch,
            eta: out.config.eta,
            n_parties: cfg.n_parties,
            metrics: metrics(model, &data.data)?,
            discrepancy: normalized_discrepancy(
                &ExperimentData::direction(model)?,
                &ExperimentData::direction(&data.ideal)?,
            )?,
            ideal_loss: average_loss(&data.ideal, &data.data)?,
            weights: model.w.data().to_vec(),
            bias: model.c.data().to_vec(),
            loss_history: out.loss_history.clone(),
            leakage: out.ledger.as_ref().map(|l| l.report()),
            triples_used: out.triples_used.iter().map(|(k, v)| (k.name().to_string(), *v)).collect(),
            rounds: out.rounds,
        })
    }
}

/// Runs one experiment, hosting all parties in-process in private mode.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let data = ExperimentData::generate(cfg)?;
    let link = cfg.experiment.link();
    let tcfg = cfg.train_config();
    let out = match cfg.mode {
        Mode::Public => train(&data.data, link, &tcfg)?,
        Mode::Private => train_private(&data.data, link, &tcfg, &cfg.session()?)?,
    };
    ExperimentReport::build(cfg, &data, &out)
}

/// Runs one experiment as a single party over TCP. Party 0 listens on
/// `addr` (or on `server` when given); every party regenerates the public
/// experiment data from the seed, but only party 0 feeds it in.
pub fn run_experiment_party_tcp(
    cfg: &ExperimentConfig,
    party: usize,
    addr: &str,
    server: Option<TcpServer>,
) -> Result<ExperimentReport> {
    if cfg.mode != Mode::Private {
        return Err(Error::InvalidArgument("a networked party runs in private mode".into()));
    }
    let data = ExperimentData::generate(cfg)?;
    let link = cfg.experiment.link();
    let tcfg = cfg.train_config();
    let shape = DataShape::of(&data.data)?;
    let session = cfg.session()?;
    let program = |ctx: &mut crate::runtime::PartyContext| {
        let mine = (ctx.party_id() == 0).then_some(&data.data);
        party_train(ctx, mine, shape, link, &tcfg)
    };
    let result = match server {
        Some(s) if party == 0 => run_party_tcp_server(&session, s, program)?,
        Some(_) => return Err(Error::InvalidArgument("only party 0 listens".into())),
        None => run_party_tcp(&session, party, addr, program)?,
    };
    let out = finish_private(result, &data.data, link, &tcfg)?;
    ExperimentReport::build(cfg, &data, &out)
}
