//! Copy-weighted normalizations and the Frobenius threshold of the group sizes.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Kind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
}

/// Norm of a per-type row where type `z` stands for `weights[z]` identical
/// entries.
pub fn weighted_norm(row: &[f64], weights: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::L1 => row.iter().zip(weights).map(|(v, w)| w * v.abs()).sum(),
        Norm::L2 => row
            .iter()
            .zip(weights)
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt(),
    }
}

pub fn normalize_row(row: &[f64], weights: &[f64], norm: Norm) -> Option<Vec<f64>> {
    let s = weighted_norm(row, weights, norm);
    if s <= 0.0 || !s.is_finite() {
        return None;
    }
    Some(row.iter().map(|v| v / s).collect())
}

fn copy_weights(instance: &Instance) -> Vec<f64> {
    instance.type_copies().iter().map(|&k| k as f64).collect()
}

/// Per-type value of one copy divided by the group's copy-weighted norm,
/// `v_{i,z} / ||v_i(k)||`.
pub fn normalize(instance: &Instance, group: usize, norm: Norm) -> Result<Vec<f64>> {
    if group >= instance.groups() {
        return Err(Error::DimensionMismatch(format!("no group {group}")));
    }
    if instance.kind() == Kind::Chores && norm == Norm::L2 {
        return Err(Error::UnsupportedScope(
            "chores are only normalized in l1".into(),
        ));
    }
    normalize_row(&instance.values_f64()[group], &copy_weights(instance), norm)
        .ok_or(Error::DegenerateAgent(group))
}

/// Normalization that ignores multiplicities (every type counted once).
pub fn normalize_unit(instance: &Instance, group: usize, norm: Norm) -> Result<Vec<f64>> {
    let ones = vec![1.0; instance.types()];
    normalize_row(&instance.values_f64()[group], &ones, norm).ok_or(Error::DegenerateAgent(group))
}

/// All groups at once, copy-weighted.
pub fn normalize_all(instance: &Instance, norm: Norm) -> Result<Vec<Vec<f64>>> {
    (0..instance.groups())
        .map(|i| normalize(instance, i, norm))
        .collect()
}

pub fn normalize_all_unit(instance: &Instance, norm: Norm) -> Result<Vec<Vec<f64>>> {
    (0..instance.groups())
        .map(|i| normalize_unit(instance, i, norm))
        .collect()
}

pub fn group_norm(instance: &Instance, group: usize, norm: Norm) -> f64 {
    weighted_norm(&instance.values_f64()[group], &copy_weights(instance), norm)
}

/// Squared distance between two per-type rows, each type counted `weights[z]`
/// times.
pub fn weighted_sq_distance(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(weights)
        .map(|((x, y), w)| w * (x - y) * (x - y))
        .sum()
}

pub fn max_entry(rows: &[Vec<f64>]) -> f64 {
    rows.iter()
        .flat_map(|r| r.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_entry(rows: &[Vec<f64>]) -> f64 {
    rows.iter()
        .flat_map(|r| r.iter().copied())
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    /// gcd of the group sizes.
    pub g: u64,
    /// Every multiple of `g` at or above `theta` is a nonnegative integer
    /// combination of the group sizes.
    pub theta: u64,
}

pub fn thresholds(group_sizes: &[u64]) -> Result<Thresholds> {
    if group_sizes.is_empty() || group_sizes.contains(&0) {
        return Err(Error::InvalidInstance(
            "group sizes must be nonempty and positive".into(),
        ));
    }
    let g = group_sizes.iter().fold(0u64, |acc, &s| acc.gcd(&s));
    let smallest = *group_sizes.iter().min().expect("nonempty");
    let largest = *group_sizes.iter().max().expect("nonempty");
    let theta = g * (smallest / g - 1) * (largest / g - 1);
    Ok(Thresholds { g, theta })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn normalization_examples() {
        let inst =
            Instance::from_integers(vec![1, 1], vec![1, 1], &[vec![1, 0], vec![3, 4]], Kind::Goods)
                .unwrap();
        assert!(close(&normalize(&inst, 0, Norm::L2).unwrap(), &[1.0, 0.0]));
        assert!(close(&normalize(&inst, 1, Norm::L2).unwrap(), &[0.6, 0.8]));

        let inst = Instance::from_integers(vec![1], vec![3, 1], &[vec![2, 2]], Kind::Goods).unwrap();
        assert!(close(&normalize(&inst, 0, Norm::L1).unwrap(), &[0.25, 0.25]));
    }

    #[test]
    fn chores_reject_l2() {
        let inst = Instance::from_integers(vec![1], vec![1], &[vec![2]], Kind::Chores).unwrap();
        assert!(normalize(&inst, 0, Norm::L2).is_err());
        assert!(normalize(&inst, 0, Norm::L1).is_ok());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(thresholds(&[5, 7]).unwrap(), Thresholds { g: 1, theta: 24 });
        assert_eq!(thresholds(&[1, 1, 1, 1]).unwrap(), Thresholds { g: 1, theta: 0 });
        assert_eq!(thresholds(&[4, 6]).unwrap(), Thresholds { g: 2, theta: 4 });
        assert_eq!(thresholds(&[3]).unwrap(), Thresholds { g: 3, theta: 0 });
    }
}
