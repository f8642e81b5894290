//! Leakage accounting in bits of mutual information.
//!
//! Masking a secret bounded by `beta` with uniform noise on `[-gamma, gamma]`
//! leaks at most `beta / gamma` bits. Leakage from several observations is
//! subadditive, and deterministic post-processing of observed values leaks
//! nothing further, so a session's budget is the sum of per-event bounds.

mod quadrature;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use quadrature::{binary_entropy, integrate, BoundedPrior};

/// Absolute tolerance on the entropy integral.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// `beta / gamma` bits for observing `X + Y`.
pub fn bound_masking(beta: f64, gamma: f64) -> Result<f64> {
    if !(beta >= 0.0 && beta < gamma && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "masking bound needs 0 <= beta < gamma, got beta={beta}, gamma={gamma}"
        )));
    }
    Ok(beta / gamma)
}

/// Bound for the party that sees both openings of a Beaver squaring.
pub fn bound_beaver_square(gamma: f64) -> Result<f64> {
    if !(gamma > 3.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("squaring bound needs gamma > 3, got {gamma}")));
    }
    Ok(5.0 / gamma + 1.0 / (gamma * gamma))
}

/// `6 n beta / gamma` bits for `n` squarings under a doubling noise schedule.
pub fn bound_exp_chain(n: u32, beta: f64, gamma: f64) -> Result<f64> {
    if !(beta >= 0.0 && gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "exp chain bound needs beta >= 0 and gamma > 0, got beta={beta}, gamma={gamma}"
        )));
    }
    Ok(6.0 * f64::from(n) * beta / gamma)
}

/// Mask width balancing roundoff `gamma^2 eps` against leakage `1 / gamma`.
pub fn optimal_gamma(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("machine epsilon must lie in (0, 1], got {eps}")));
    }
    Ok(eps.powf(-1.0 / 3.0))
}

/// Mutual information in bits between `X ~ prior` and `X + Y`, computed by
/// quadrature of `(1 / 2 gamma) * integral of h(F(y)) dy` over `[-beta, beta]`.
pub fn mutual_information(prior: &BoundedPrior, gamma: f64) -> Result<f64> {
    prior.validate()?;
    if !(prior.beta() < gamma && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "prior bound {} must be below gamma {gamma}",
            prior.beta()
        )));
    }
    Ok(quadrature::entropy_integral(prior, QUADRATURE_TOL)? / (2.0 * gamma))
}

/// Differential entropy in bits of `X + Y`.
pub fn entropy_sum_uniform(prior: &BoundedPrior, gamma: f64) -> Result<f64> {
    Ok(mutual_information(prior, gamma)? + (2.0 * gamma).log2())
}

/// One chargeable observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeakageEvent {
    Masking { beta: f64, gamma: f64 },
    BeaverSquare { gamma: f64 },
    ExpChain { n: u32, beta: f64, gamma: f64 },
    Deterministic,
}

impl LeakageEvent {
    pub fn bits(&self) -> Result<f64> {
        match *self {
            LeakageEvent::Masking { beta, gamma } => bound_masking(beta, gamma),
            LeakageEvent::BeaverSquare { gamma } => bound_beaver_square(gamma),
            LeakageEvent::ExpChain { n, beta, gamma } => bound_exp_chain(n, beta, gamma),
            LeakageEvent::Deterministic => Ok(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub description: String,
    pub event: LeakageEvent,
    pub count: u64,
    pub bits: f64,
}

/// Running upper bound on leaked bits, aggregated by description.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LeakageLedger {
    entries: BTreeMap<(String, String), LedgerEntry>,
}

impl LeakageLedger {
    pub fn new() -> Self {
        LeakageLedger::default()
    }

    /// Charges `count` independent occurrences of `event`.
    pub fn charge(&mut self, description: &str, event: LeakageEvent, count: u64) -> Result<()> {
        let per = event.bits()?;
        let key = (description.to_string(), serde_json::to_string(&event)?);
        let entry = self.entries.entry(key).or_insert_with(|| LedgerEntry {
            description: description.to_string(),
            event,
            count: 0,
            bits: 0.0,
        });
        entry.count += count;
        entry.bits = per * entry.count as f64;
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.values()
    }

    pub fn total_bits(&self) -> f64 {
        self.entries.values().map(|e| e.bits).sum()
    }

    /// Folds another ledger's charges into this one.
    pub fn merge(&mut self, other: &LeakageLedger) -> Result<()> {
        for e in other.entries() {
            self.charge(&e.description, e.event, e.count)?;
        }
        Ok(())
    }

    pub fn report(&self) -> LeakageReport {
        LeakageReport {
            schema: 1,
            events: self.entries.values().cloned().collect(),
            total_bits: self.total_bits(),
            total_is: "upper bound".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub schema: u32,
    pub events: Vec<LedgerEntry>,
    pub total_bits: f64,
    pub total_is: String,
}

/// A planned protocol run: events to be charged, for budgeting ahead of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakagePlan {
    pub events: Vec<PlannedEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedEvent {
    #[serde(default)]
    pub description: Option<String>,
    #[serde(flatten)]
    pub event: LeakageEvent,
    #[serde(default = "one")]
    pub count: u64,
}

fn one() -> u64 {
    1
}

impl LeakagePlan {
    pub fn ledger(&self) -> Result<LeakageLedger> {
        let mut ledger = LeakageLedger::new();
        for (i, p) in self.events.iter().enumerate() {
            let desc = p.description.clone().unwrap_or_else(|| format!("event {i}"));
            ledger.charge(&desc, p.event, p.count)?;
        }
        Ok(ledger)
    }
}
