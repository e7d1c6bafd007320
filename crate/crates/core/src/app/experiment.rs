//! Seeded trials over i.i.d. uniform valuations.

use num_bigint::BigInt;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::prop_condition;
use crate::divergence::chi_squared;
use crate::error::{Error, Result};
use crate::fairness::{verify, Notion};
use crate::lp::solve_prop;
use crate::mechanisms::{agent_harmonic_penalty, harmonic_means, inverse_trading_post, trading_post};
use crate::model::{Instance, Kind, Rational};
use crate::norms::{normalize_all, Norm};
use crate::rounding::round_proportional;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Target {
    PropCondition,
    PropAllocation,
    Chi2Bound,
    ChoresPenaltyBound,
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "PROP_CONDITION" => Ok(Target::PropCondition),
            "PROP_ALLOCATION" => Ok(Target::PropAllocation),
            "CHI2_BOUND" => Ok(Target::Chi2Bound),
            "CHORES_PENALTY_BOUND" => Ok(Target::ChoresPenaltyBound),
            other => Err(Error::Parse {
                location: "target".into(),
                message: format!("unknown experiment target {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub trials: u64,
    pub seed: u64,
    pub kind: Kind,
    pub target: Target,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInstance(format!("experiment config: {msg}")));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        match (self.target, self.kind) {
            (Target::Chi2Bound, Kind::Chores) => bad("CHI2_BOUND is a goods target"),
            (Target::ChoresPenaltyBound, Kind::Goods) => bad("CHORES_PENALTY_BOUND is a chores target"),
            _ => Ok(()),
        }
    }

    /// The bound a trial's quantity is compared against, where there is one.
    pub fn bound(&self) -> Option<f64> {
        let n = self.n as f64;
        match self.target {
            Target::Chi2Bound => Some((n - 3.0) / (3.0 * n)),
            Target::ChoresPenaltyBound => Some(5.0 / 16.0),
            Target::PropCondition => Some(0.0),
            Target::PropAllocation => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub success: bool,
    /// CHI2_BOUND: smallest chi-squared divergence from the average agent.
    /// CHORES_PENALTY_BOUND: smallest per-agent harmonic penalty.
    /// PROP_CONDITION: condition margin.
    /// PROP_ALLOCATION: `n` times the fractional optimum, 1 at exact
    /// proportionality.
    pub quantity: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub successes: u64,
    pub trials: u64,
    /// `successes / trials` in lowest terms.
    pub success_fraction: String,
    pub success_rate: f64,
    pub min_quantity: f64,
    pub median_quantity: f64,
    pub outcomes: Vec<TrialOutcome>,
}

/// Values for trial `trial`: a ChaCha8 stream keyed by `(seed, trial)`,
/// each entry a nonzero 53-bit dyadic rational in `(0, 1)`.
pub fn sample_instance(config: &ExperimentConfig, trial: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial);
    let denom = BigInt::from(1u64 << 53);
    let values = (0..config.n)
        .map(|_| {
            (0..config.m)
                .map(|_| {
                    let mut v = rng.next_u64() >> 11;
                    while v == 0 {
                        v = rng.next_u64() >> 11;
                    }
                    Rational::new(BigInt::from(v), denom.clone())
                })
                .collect()
        })
        .collect();
    Instance::unit(values, config.kind)
}

fn run_trial(config: &ExperimentConfig, trial: u64) -> Result<TrialOutcome> {
    let instance = sample_instance(config, trial)?;
    let n = config.n as f64;
    let bound = config.bound();
    let outcome = |success: bool, quantity: f64, note: Option<String>| TrialOutcome {
        trial,
        success,
        quantity,
        note,
    };
    match config.target {
        Target::Chi2Bound => {
            let rows = normalize_all(&instance, Norm::L1)?;
            let society: Vec<f64> = (0..config.m)
                .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
                .collect();
            let ones = vec![1.0; config.m];
            let mut min = f64::INFINITY;
            for row in &rows {
                min = min.min(chi_squared(row, &society, &ones)?);
            }
            Ok(outcome(min >= bound.unwrap_or(0.0), min, None))
        }
        Target::ChoresPenaltyBound => {
            let rows = normalize_all(&instance, Norm::L1)?;
            let h = harmonic_means(&rows);
            let min = rows
                .iter()
                .map(|row| agent_harmonic_penalty(row, &h))
                .fold(f64::INFINITY, f64::min);
            Ok(outcome(min >= bound.unwrap_or(0.0), min, None))
        }
        Target::PropCondition => {
            let report = prop_condition(&instance)?;
            Ok(outcome(report.satisfied, report.margin, None))
        }
        Target::PropAllocation => {
            let mechanism = match config.kind {
                Kind::Goods => trading_post(&instance)?,
                Kind::Chores => inverse_trading_post(&instance)?,
            };
            let solution = solve_prop(&instance)?;
            let rounded = round_proportional(&instance, &solution.allocation)?;
            let verdict = verify(&instance, &rounded.allocation, Notion::Prop)?;
            let diag = mechanism.analytic_bounds.iter().enumerate().map(|(i, r)| r[i] * n);
            let mechanism_worst = match config.kind {
                Kind::Goods => diag.fold(f64::INFINITY, f64::min),
                Kind::Chores => diag.fold(f64::NEG_INFINITY, f64::max),
            };
            let mut note = format!("mechanism n*value {mechanism_worst:.6}");
            if !solution.converged() {
                note.push_str(&format!("; program gap {:.3e}", solution.duality_gap));
            }
            Ok(outcome(verdict.holds, solution.alpha * n, Some(note)))
        }
    }
}

/// Run every trial (in parallel) and summarize. Output depends only on the
/// configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let outcomes = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, trial))
        .collect::<Result<Vec<_>>>()?;
    let successes = outcomes.iter().filter(|o| o.success).count() as u64;
    let mut quantities: Vec<f64> = outcomes.iter().map(|o| o.quantity).collect();
    quantities.sort_by(f64::total_cmp);
    let mid = quantities.len() / 2;
    let median = if quantities.len() % 2 == 1 {
        quantities[mid]
    } else {
        (quantities[mid - 1] + quantities[mid]) / 2.0
    };
    let fraction = Rational::new(BigInt::from(successes), BigInt::from(config.trials));
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: *config,
        successes,
        trials: config.trials,
        success_fraction: format!("{}/{}", fraction.numer(), fraction.denom()),
        success_rate: successes as f64 / config.trials as f64,
        min_quantity: quantities[0],
        median_quantity: median,
        outcomes,
    })
}
