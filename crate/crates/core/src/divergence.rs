//! f-divergences between probability mass functions.
//!
//! Every function also has a weighted form where entry `z` stands for
//! `weights[z]` identical outcomes; that is how copy-expanded valuation
//! vectors are compared without materializing them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Divergence {
    ChiSquared,
    KullbackLeibler,
    TotalVariation,
}

const MASS_TOLERANCE: f64 = 1e-9;

fn check_distribution(p: &[f64], weights: &[f64], name: &str) -> Result<()> {
    if let Some(z) = p.iter().position(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::NotADistribution(format!(
            "{name}[{z}] = {} is not a nonnegative number",
            p[z]
        )));
    }
    let total: f64 = p.iter().zip(weights).map(|(x, w)| x * w).sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::NotADistribution(format!(
            "{name} sums to {total}"
        )));
    }
    Ok(())
}

pub fn divergence(kind: Divergence, p: &[f64], q: &[f64]) -> Result<f64> {
    let ones = vec![1.0; p.len()];
    weighted_divergence(kind, p, q, &ones)
}

pub fn weighted_divergence(kind: Divergence, p: &[f64], q: &[f64], weights: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "distributions of length {} and {} with {} weights",
            p.len(),
            q.len(),
            weights.len()
        )));
    }
    check_distribution(p, weights, "P")?;
    check_distribution(q, weights, "Q")?;
    Ok(match kind {
        Divergence::ChiSquared => chi_squared(p, q, weights)?,
        Divergence::KullbackLeibler => kullback_leibler(p, q, weights)?,
        Divergence::TotalVariation => total_variation(p, q, weights),
    })
}

/// `sum w (p - q)^2 / q`; entries with `p = q = 0` contribute nothing.
pub fn chi_squared(p: &[f64], q: &[f64], weights: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (z, ((&pi, &qi), &w)) in p.iter().zip(q).zip(weights).enumerate() {
        if qi == 0.0 {
            if pi > 0.0 {
                return Err(Error::DivergenceUndefined(z));
            }
            continue;
        }
        let diff = pi - qi;
        acc += w * diff * diff / qi;
    }
    Ok(acc)
}

/// `sum w p ln(p / q)` with `0 ln(0 / q) = 0`.
pub fn kullback_leibler(p: &[f64], q: &[f64], weights: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (z, ((&pi, &qi), &w)) in p.iter().zip(q).zip(weights).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::DivergenceUndefined(z));
        }
        acc += w * pi * (pi / qi).ln();
    }
    // Rounding can leave a tiny negative total for near-identical inputs.
    Ok(acc.max(0.0))
}

/// `(1/2) sum w |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64], weights: &[f64]) -> f64 {
    0.5 * p
        .iter()
        .zip(q)
        .zip(weights)
        .map(|((a, b), w)| w * (a - b).abs())
        .sum::<f64>()
}
