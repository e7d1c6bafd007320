//! Closed-form fractional mechanisms.
//!
//! Shares are copies per agent: `shares[i][z]` copies of type `z` go to every
//! agent of group `i`, so group `i` holds `n_i * shares[i][z]` of the `k_z`.

use serde::{Deserialize, Serialize};

use crate::divergence::{chi_squared, kullback_leibler};
use crate::error::{Error, Result};
use crate::model::{FractionalAllocation, Instance, Kind};
use crate::norms::{group_norm, max_entry, min_entry, normalize_all, weighted_sq_distance, Norm};

/// Relative tolerance for shares that come out slightly negative.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mechanism {
    RelativeNorm,
    LogRelativeNorm,
    TradingPost,
    InverseTradingPost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismOutput {
    pub mechanism: Mechanism,
    pub allocation: FractionalAllocation,
    /// Relative Norm: lower bound on `Gap[i][i']`.
    /// Log-Relative Norm: exact value of `CGap[i][i']`.
    /// Trading posts: the diagonal holds the normalized utility (or cost) of
    /// agent `i`; off-diagonal entries are zero.
    pub analytic_bounds: Vec<Vec<f64>>,
    /// Largest normalized entry over all groups and types.
    pub normalized_max: f64,
    /// Smallest normalized entry over all groups and types.
    pub normalized_min: f64,
}

fn require_kind(instance: &Instance, kind: Kind) -> Result<()> {
    if instance.kind() != kind {
        return Err(Error::UnsupportedScope(format!(
            "mechanism expects {kind}, instance holds {}",
            instance.kind()
        )));
    }
    Ok(())
}

fn require_unit_scope(instance: &Instance) -> Result<()> {
    if !instance.is_single_agent_groups() || !instance.is_unit_copies() {
        return Err(Error::UnsupportedScope(
            "trading-post mechanisms need single-agent groups and one copy per item".into(),
        ));
    }
    Ok(())
}

/// Zero out shares in `[-CLAMP_TOLERANCE * k_z, 0)` and rescale each type so
/// the groups together hold exactly `k_z` copies.
fn clamp_and_fill(instance: &Instance, shares: &mut [Vec<f64>]) -> Result<()> {
    let sizes = instance.group_sizes();
    for (z, &k) in instance.type_copies().iter().enumerate() {
        let k = k as f64;
        for (i, row) in shares.iter_mut().enumerate() {
            if row[z] < 0.0 {
                if row[z] < -CLAMP_TOLERANCE * k {
                    return Err(Error::InvariantViolation(format!(
                        "share of group {i} in type {z} is {}",
                        row[z]
                    )));
                }
                row[z] = 0.0;
            }
        }
        let held: f64 = shares
            .iter()
            .zip(sizes)
            .map(|(row, &n)| n as f64 * row[z])
            .sum();
        if held > 0.0 {
            let scale = k / held;
            for row in shares.iter_mut() {
                row[z] *= scale;
            }
        }
    }
    Ok(())
}

/// Shares grow with each group's l2-normalized value relative to the
/// population-weighted average.
pub fn relative_norm(instance: &Instance) -> Result<MechanismOutput> {
    require_kind(instance, Kind::Goods)?;
    let normalized = normalize_all(instance, Norm::L2)?;
    let top = max_entry(&normalized);
    let scores: Vec<Vec<f64>> = normalized.iter().map(|r| r.iter().map(|v| v / top).collect()).collect();
    let mut shares = affine_shares(instance, &scores);
    clamp_and_fill(instance, &mut shares)?;

    let n = instance.agents() as f64;
    let weights: Vec<f64> = instance.type_copies().iter().map(|&k| k as f64).collect();
    let d = instance.groups();
    let mut bounds = vec![vec![0.0; d]; d];
    for i in 0..d {
        let norm = group_norm(instance, i, Norm::L2);
        for other in 0..d {
            if other != i {
                let dist = weighted_sq_distance(&normalized[i], &normalized[other], &weights);
                bounds[i][other] = norm * dist / (2.0 * n * top);
            }
        }
    }
    Ok(MechanismOutput {
        mechanism: Mechanism::RelativeNorm,
        allocation: FractionalAllocation::new(shares, true),
        analytic_bounds: bounds,
        normalized_max: top,
        normalized_min: min_entry(&normalized),
    })
}

/// `x_{i,z} = k_z (s_{i,z}/n + 1/n - sum_i' n_i' s_{i',z} / n^2)`.
fn affine_shares(instance: &Instance, scores: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = instance.agents() as f64;
    let sizes = instance.group_sizes();
    let copies = instance.type_copies();
    let average: Vec<f64> = (0..instance.types())
        .map(|z| {
            scores
                .iter()
                .zip(sizes)
                .map(|(row, &s)| s as f64 * row[z])
                .sum::<f64>()
        })
        .collect();
    scores
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(z, s)| copies[z] as f64 * (s / n + 1.0 / n - average[z] / (n * n)))
                .collect()
        })
        .collect()
}

/// Chores counterpart of [`relative_norm`] on log l1-normalized costs.
pub fn log_relative_norm(instance: &Instance) -> Result<MechanismOutput> {
    require_kind(instance, Kind::Chores)?;
    if instance.items() < 2 {
        return Err(Error::Precondition(
            "log-relative norm needs at least two items".into(),
        ));
    }
    let normalized = normalize_all(instance, Norm::L1)?;
    let low = min_entry(&normalized);
    let log_low = low.ln();
    let scores: Vec<Vec<f64>> = normalized
        .iter()
        .map(|r| r.iter().map(|c| c.ln() / log_low).collect())
        .collect();
    let mut shares = affine_shares(instance, &scores);
    clamp_and_fill(instance, &mut shares)?;

    let n = instance.agents() as f64;
    let weights: Vec<f64> = instance.type_copies().iter().map(|&k| k as f64).collect();
    let d = instance.groups();
    let mut bounds = vec![vec![0.0; d]; d];
    for i in 0..d {
        let norm = group_norm(instance, i, Norm::L1);
        for other in 0..d {
            if other != i {
                let kl = kullback_leibler(&normalized[i], &normalized[other], &weights)?;
                bounds[i][other] = norm * kl / (-n * log_low);
            }
        }
    }
    Ok(MechanismOutput {
        mechanism: Mechanism::LogRelativeNorm,
        allocation: FractionalAllocation::new(shares, true),
        analytic_bounds: bounds,
        normalized_max: max_entry(&normalized),
        normalized_min: low,
    })
}

/// Each item is split in proportion to the agents' l1-normalized values.
pub fn trading_post(instance: &Instance) -> Result<MechanismOutput> {
    require_kind(instance, Kind::Goods)?;
    require_unit_scope(instance)?;
    let normalized = normalize_all(instance, Norm::L1)?;
    let n = instance.agents() as usize;
    let m = instance.types();
    let column: Vec<f64> = (0..m).map(|j| normalized.iter().map(|r| r[j]).sum()).collect();
    if let Some(j) = column.iter().position(|&s| s <= 0.0) {
        return Err(Error::UndefinedShare(j));
    }
    let shares: Vec<Vec<f64>> = normalized
        .iter()
        .map(|r| r.iter().zip(&column).map(|(v, s)| v / s).collect())
        .collect();

    let society: Vec<f64> = column.iter().map(|s| s / n as f64).collect();
    let ones = vec![1.0; m];
    let mut bounds = vec![vec![0.0; n]; n];
    for (i, row) in normalized.iter().enumerate() {
        bounds[i][i] = (1.0 + chi_squared(row, &society, &ones)?) / n as f64;
    }
    Ok(MechanismOutput {
        mechanism: Mechanism::TradingPost,
        allocation: FractionalAllocation::new(shares, true),
        analytic_bounds: bounds,
        normalized_max: max_entry(&normalized),
        normalized_min: min_entry(&normalized),
    })
}

/// Per-item harmonic mean `H_j = n / sum_i (1 / c_{i,j})` of l1-normalized
/// costs.
pub fn harmonic_means(normalized: &[Vec<f64>]) -> Vec<f64> {
    let n = normalized.len() as f64;
    let m = normalized.first().map_or(0, Vec::len);
    (0..m)
        .map(|j| n / normalized.iter().map(|r| 1.0 / r[j]).sum::<f64>())
        .collect()
}

/// `sum_l sum_j (c_{l,j} - H_j)^2 / c_{l,j}` over l1-normalized costs.
pub fn harmonic_penalty(normalized: &[Vec<f64>], harmonic: &[f64]) -> f64 {
    normalized
        .iter()
        .map(|r| agent_harmonic_penalty(r, harmonic))
        .sum()
}

/// One agent's term `sum_j (c_j - H_j)^2 / c_j`.
pub fn agent_harmonic_penalty(row: &[f64], harmonic: &[f64]) -> f64 {
    row.iter()
        .zip(harmonic)
        .map(|(c, h)| (c - h) * (c - h) / c)
        .sum()
}

/// Each chore is split in proportion to the inverse normalized costs; every
/// agent ends up with the same normalized cost.
pub fn inverse_trading_post(instance: &Instance) -> Result<MechanismOutput> {
    require_kind(instance, Kind::Chores)?;
    require_unit_scope(instance)?;
    let normalized = normalize_all(instance, Norm::L1)?;
    let n = instance.agents() as usize;
    let inverse_sum: Vec<f64> = (0..instance.types())
        .map(|j| normalized.iter().map(|r| 1.0 / r[j]).sum())
        .collect();
    let shares: Vec<Vec<f64>> = normalized
        .iter()
        .map(|r| r.iter().zip(&inverse_sum).map(|(c, s)| 1.0 / c / s).collect())
        .collect();

    let harmonic = harmonic_means(&normalized);
    let penalty = harmonic_penalty(&normalized, &harmonic);
    let nf = n as f64;
    let cost = (1.0 - penalty / nf) / nf;
    let mut bounds = vec![vec![0.0; n]; n];
    for (i, row) in bounds.iter_mut().enumerate() {
        row[i] = cost;
    }
    Ok(MechanismOutput {
        mechanism: Mechanism::InverseTradingPost,
        allocation: FractionalAllocation::new(shares, true),
        analytic_bounds: bounds,
        normalized_max: max_entry(&normalized),
        normalized_min: min_entry(&normalized),
    })
}
