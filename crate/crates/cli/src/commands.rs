use std::path::{Path, PathBuf};
use std::time::Duration;

use fpmpc::approx::{logistic, normal_cdf, preset};
use fpmpc::arith::Engine;
use fpmpc::beaver::roundoff_certificate;
use fpmpc::glm::{
    metrics, run_experiment, run_experiment_party_tcp, train, Checkpoint, Dataset, Experiment, ExperimentConfig,
    Link, Mode, TrainConfig,
};
use fpmpc::ingest::{
    integer_columns, normalize_covariates, parse_csv_counts, parse_idx, parse_libsvm, records_to_dense,
    CovariateSet,
};
use fpmpc::leakage::{mutual_information, optimal_gamma, BoundedPrior, LeakagePlan};
use fpmpc::runtime::{run_parties_simulated, triple_file, SessionConfig, TripleSource};
use fpmpc::sharing::{deal_triples, TripleKind, TripleSpec, DEFAULT_GAMMA};
use fpmpc::tensor::uniform;
use fpmpc::{Error, NoiseSpec, RandomSource, Result, Tensor};
use serde_json::{json, Value};

use crate::config::Defaults;
use crate::{Cli, Command, DataArgs, ExperimentArgs};

const DEAL_STREAM: u64 = 2;

pub fn run(cli: Cli) -> Result<Value> {
    let d = Defaults::load(cli.config.as_deref())?;
    match cli.command {
        Command::Deal {
            kind,
            count,
            gamma,
            dims,
            right_dims,
            parties,
            seed,
            out_dir,
            experiment,
            iters,
            minibatch,
        } => {
            if let Some(name) = experiment {
                let args = ExperimentArgs {
                    experiment: name,
                    gamma,
                    seed,
                    iters,
                    minibatch,
                    eta: None,
                    parties,
                };
                return deal_experiment(&d, &args, &out_dir);
            }
            let kind = parse_kind(kind.as_deref().unwrap_or_default())?;
            let gamma = d.or(gamma, "gamma", DEFAULT_GAMMA)?;
            let parties = d.or(parties, "parties", 2)?;
            let seed = d.seed(seed)?;
            deal(kind, count, gamma, &dims, &right_dims, parties, seed, &out_dir)
        }
        Command::Simulate { exp, mode, triples } => {
            let mut cfg = experiment_config(&d, &exp)?;
            cfg.mode = parse_mode(&mode)?;
            if let Some(dir) = triples {
                cfg.triples = TripleSource::Files(dir);
            }
            log::info!("running {} in {mode} mode", cfg.experiment.name());
            Ok(serde_json::to_value(run_experiment(&cfg)?)?)
        }
        Command::RunParty {
            id,
            peers,
            triples,
            exp,
            timeout,
        } => {
            let mut cfg = experiment_config(&d, &exp)?;
            cfg.timeout = Duration::from_secs(timeout);
            if let Some(dir) = triples {
                cfg.triples = TripleSource::Files(dir);
            }
            let hub = peers
                .split(',')
                .next()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::InvalidArgument("--peers needs party 0's address".into()))?;
            log::info!("party {id} of {} via {hub}", cfg.n_parties);
            Ok(serde_json::to_value(run_experiment_party_tcp(&cfg, id, hub, None)?)?)
        }
        Command::Train {
            link,
            data,
            mode,
            gamma,
            seed,
            iters,
            minibatch,
            eta,
            rho,
            parties,
            out,
        } => {
            let link = Link::parse(&link)?;
            let dataset = load_dataset(&data, link, None)?;
            let mut cfg = TrainConfig::for_link(link);
            cfg.mode = parse_mode(&mode)?;
            cfg.gamma = d.or(gamma, "gamma", cfg.gamma)?;
            cfg.seed = d.seed(seed)?;
            cfg.iterations = d.or(iters, "iters", cfg.iterations)?;
            cfg.minibatch = d.or(minibatch, "minibatch", cfg.minibatch)?;
            cfg.eta = d.or(eta, "eta", cfg.eta)?;
            cfg.rho = d.or(rho, "rho", cfg.rho)?;
            cfg.n_parties = d.or(parties, "parties", cfg.n_parties)?;
            log::info!("training {} on {} rows", link.name(), dataset.rows());
            let out_data = train(&dataset, link, &cfg)?;
            let ckpt = Checkpoint::from_output(&out_data);
            if let Some(path) = &out {
                std::fs::write(path, serde_json::to_string_pretty(&ckpt)?)?;
            }
            Ok(json!({
                "schema": 1,
                "link": link,
                "mode": cfg.mode,
                "rows": dataset.rows(),
                "metrics": metrics(&out_data.model, &dataset)?,
                "loss_history": out_data.loss_history,
                "checkpoint": out.map(|p| p.display().to_string()),
                "leakage": out_data.ledger.map(|l| l.report()),
            }))
        }
        Command::Eval { checkpoint, data } => {
            let ckpt: Checkpoint = serde_json::from_str(&std::fs::read_to_string(&checkpoint)?)?;
            let model = ckpt.model()?;
            let classes = (model.link == Link::Multinomial).then_some(model.classes());
            let dataset = load_dataset(&data, model.link, Some((model.covariates(), classes)))?;
            Ok(json!({
                "schema": 1,
                "link": model.link,
                "rows": dataset.rows(),
                "metrics": metrics(&model, &dataset)?,
            }))
        }
        Command::LeakageReport { plan } => {
            let plan: LeakagePlan = serde_json::from_str(&std::fs::read_to_string(plan)?)?;
            Ok(serde_json::to_value(plan.ledger()?.report())?)
        }
        Command::Validate { suite, seed } => {
            let full = match suite.as_str() {
                "quick" => false,
                "full" => true,
                other => return Err(Error::InvalidArgument(format!("unknown suite {other:?}"))),
            };
            validate(full, d.seed(seed.or(Some(1)))?)
        }
    }
}

fn parse_kind(s: &str) -> Result<TripleKind> {
    TripleKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown triple kind {s:?}")))
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "public" => Ok(Mode::Public),
        "private" => Ok(Mode::Private),
        other => Err(Error::InvalidArgument(format!("mode must be public or private, got {other:?}"))),
    }
}

fn experiment_config(d: &Defaults, a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(Experiment::parse(&a.experiment)?, d.seed(a.seed)?);
    cfg.gamma = d.or(a.gamma, "gamma", cfg.gamma)?;
    cfg.iterations = d.or(a.iters, "iters", cfg.iterations)?;
    cfg.minibatch = d.or(a.minibatch, "minibatch", cfg.minibatch)?;
    cfg.eta = d.pick(a.eta, "eta")?;
    cfg.n_parties = d.or(a.parties, "parties", cfg.n_parties)?;
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
fn deal(
    kind: TripleKind,
    count: usize,
    gamma: f64,
    dims: &[usize],
    right: &[usize],
    parties: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Value> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument("--dims is required".into()));
    }
    let right = if right.is_empty() { dims } else { right };
    let spec = TripleSpec::new(kind, dims, right, gamma)?;
    std::fs::create_dir_all(out_dir)?;
    let stores = deal_triples(&spec, count, parties, RandomSource::new(seed, DEAL_STREAM))?;
    let mut files = Vec::new();
    for (p, store) in stores.iter().enumerate() {
        let path = triple_file(out_dir, p, kind);
        store.write_to(&path)?;
        files.push(path.display().to_string());
    }
    Ok(json!({
        "schema": 1,
        "kind": kind,
        "count": count,
        "gamma": gamma,
        "parties": parties,
        "files": files,
    }))
}

fn deal_experiment(d: &Defaults, args: &ExperimentArgs, out_dir: &Path) -> Result<Value> {
    std::fs::create_dir_all(out_dir)?;
    let mut cfg = experiment_config(d, args)?;
    cfg.mode = Mode::Private;
    cfg.triples = TripleSource::SeededTee(out_dir.to_path_buf());
    let report = run_experiment(&cfg)?;
    let files: Vec<String> = (0..cfg.n_parties)
        .flat_map(|p| TripleKind::ALL.map(|k| triple_file(out_dir, p, k)))
        .filter(|p| p.exists())
        .map(|p: PathBuf| p.display().to_string())
        .collect();
    Ok(json!({
        "schema": 1,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "gamma": cfg.gamma,
        "parties": cfg.n_parties,
        "triples_used": report.triples_used,
        "files": files,
    }))
}

/// Reads a data file and turns its labels into targets for `link`.
/// `expect` fixes the covariate and class counts when evaluating a model.
fn load_dataset(a: &DataArgs, link: Link, expect: Option<(usize, Option<usize>)>) -> Result<Dataset> {
    let (design, labels) = match a.format.as_str() {
        "idx" => {
            let images = parse_idx(&std::fs::read(&a.data)?)?;
            let path = a
                .labels
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("idx data needs --labels".into()))?;
            (images, parse_idx(&std::fs::read(path)?)?)
        }
        "libsvm" => {
            let records = parse_libsvm(&std::fs::read_to_string(&a.data)?)?;
            records_to_dense(&records, expect.map(|e| e.0))?
        }
        "csv" => {
            let set = CovariateSet::from_index(a.covariates)?;
            let ds = parse_csv_counts(&std::fs::read_to_string(&a.data)?, set)?;
            (ds.design().clone(), ds.targets().clone())
        }
        other => return Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
    };
    let design = if a.normalize {
        normalize_covariates(&design, &integer_columns(&design)?)?
    } else {
        design
    };
    let (targets, classes) = targets_for(link, &labels, a.positive, expect.and_then(|e| e.1))?;
    Dataset::new(design, targets, classes)
}

fn targets_for(link: Link, labels: &Tensor, positive: Option<f64>, classes: Option<usize>) -> Result<(Tensor, usize)> {
    match link {
        Link::Identity | Link::Log => Ok((labels.clone(), 1)),
        Link::Logit | Link::Probit => {
            if let Some(p) = positive {
                return Ok((labels.map(|v| if v == p { 1.0 } else { 0.0 })?, 1));
            }
            let vals = labels.data();
            if vals.iter().all(|&v| v == 0.0 || v == 1.0) {
                Ok((labels.clone(), 1))
            } else if vals.iter().all(|&v| v == -1.0 || v == 1.0) {
                Ok((labels.map(|v| if v > 0.0 { 1.0 } else { 0.0 })?, 1))
            } else {
                Err(Error::InvalidArgument(
                    "binary labels must be 0/1 or -1/+1; pass --positive to pick a class".into(),
                ))
            }
        }
        Link::Multinomial => {
            if let Some(bad) = labels.data().iter().find(|v| **v < 0.0 || v.fract() != 0.0) {
                return Err(Error::InvalidArgument(format!("class label {bad} is not a nonnegative integer")));
            }
            let seen = labels.data().iter().fold(0.0f64, |m, &v| m.max(v)) as usize + 1;
            Ok((labels.clone(), classes.unwrap_or(seen)))
        }
    }
}

fn check(name: &str, passed: bool, value: f64, bound: f64) -> Value {
    log::info!("{name}: {} ({value:e} vs {bound:e})", if passed { "pass" } else { "FAIL" });
    json!({ "check": name, "passed": passed, "value": value, "bound": bound })
}

fn validate(full: bool, seed: u64) -> Result<Value> {
    let mut checks = Vec::new();
    let gamma = DEFAULT_GAMMA;

    let mut rng = RandomSource::new(seed, 0);
    let x = uniform(&[1000], 1.0, &mut rng)?;
    let session = SessionConfig::new(2, seed, NoiseSpec::new(gamma, 1.0)?);
    let outs = run_parties_simulated(&session, |ctx| {
        let mine = (ctx.party_id() == 0).then_some(&x);
        let s = ctx.share_input(0, mine, &[1000], 1.0, "input")?;
        let sq = ctx.square(&s)?;
        ctx.reveal(&sq)
    })?;
    let err = outs[0].sub(&x.hadamard(&x)?)?.max_abs();
    let cert = roundoff_certificate(gamma, 1);
    checks.push(check("beaver square precision", err <= cert, err, cert));

    let mi = mutual_information(&BoundedPrior::Rademacher { beta: 1.0 }, gamma)?;
    checks.push(check("rademacher leakage equality", (mi - 1e-5).abs() <= 1e-9, mi, 1e-5));

    let mut worst = f64::NEG_INFINITY;
    for i in 0..20 {
        let k = 1 + rng.below(5);
        let beta = 0.1 + rng.unit() * 2.0;
        let points: Vec<f64> = (0..k).map(|_| rng.symmetric(beta)).collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.unit() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let prior = BoundedPrior::grid(beta, points, raw.iter().map(|p| p / total).collect())?;
        let g = 10f64.powi(1 + (i % 5));
        worst = worst.max(mutual_information(&prior, g)? - beta / g);
    }
    checks.push(check("masking bound on random priors", worst <= 1e-9, worst, 1e-9));

    for (name, f, tol) in [
        ("tanh", f64::tanh as fn(f64) -> f64, 1e-7),
        ("logistic", |v| logistic(v) - 0.5, 1e-4),
        ("probit", |v| normal_cdf(v) - 0.5, 1e-5),
    ] {
        let s = preset(name)?;
        let err = (0..=10_000)
            .map(|i| {
                let y = -s.z + 2.0 * s.z * i as f64 / 10_000.0;
                s.eval_scalar(y).map(|v| (v - f(y)).abs())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        checks.push(check(&format!("{name} series accuracy"), err <= tol, err, tol));
    }

    let g = optimal_gamma(2.2e-16)?;
    checks.push(check("balanced mask width", (1.6e5..=1.7e5).contains(&g), g, 1.7e5));

    if full {
        for exp in [Experiment::Linear, Experiment::Logit, Experiment::Probit, Experiment::Poisson] {
            let r = run_experiment(&ExperimentConfig::new(exp, seed))?;
            let name = format!("{} experiment discrepancy", exp.name());
            checks.push(check(&name, r.discrepancy <= 0.02, r.discrepancy, 0.02));
        }
    }
    let all = checks.iter().all(|c| c["passed"] == json!(true));
    Ok(json!({ "schema": 1, "seed": seed, "all_passed": all, "checks": checks }))
}
