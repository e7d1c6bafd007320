//! Instances and allocations.
//!
//! Copies of one item type are interchangeable, so everything here is stored
//! per type: a type with `k_z` copies is one column with capacity `k_z`.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Goods,
    Chores,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kind::Goods => f.write_str("goods"),
            Kind::Chores => f.write_str("chores"),
        }
    }
}

/// Groups of identical agents facing a multiset of typed items.
///
/// Groups are kept sorted by size (`n_1 <= ... <= n_d`); the constructor
/// permutes value rows along with the sizes and remembers the original order.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    group_sizes: Vec<u64>,
    type_copies: Vec<u64>,
    values: Vec<Vec<Rational>>,
    values_f64: Vec<Vec<f64>>,
    kind: Kind,
    original_order: Vec<usize>,
}

impl Instance {
    /// `values[i][z]` is the value (or cost) of one copy of type `z` for an
    /// agent of group `i`, in the order the groups are supplied.
    pub fn new(
        group_sizes: Vec<u64>,
        type_copies: Vec<u64>,
        values: Vec<Vec<Rational>>,
        kind: Kind,
    ) -> Result<Self> {
        if group_sizes.is_empty() {
            return Err(Error::InvalidInstance("no groups".into()));
        }
        if type_copies.is_empty() {
            return Err(Error::InvalidInstance("no item types".into()));
        }
        if let Some(i) = group_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidInstance(format!("group {i} has size 0")));
        }
        if let Some(z) = type_copies.iter().position(|&k| k == 0) {
            return Err(Error::InvalidInstance(format!("type {z} has 0 copies")));
        }
        if values.len() != group_sizes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} value rows for {} groups",
                values.len(),
                group_sizes.len()
            )));
        }
        let t = type_copies.len();
        for (i, row) in values.iter().enumerate() {
            if row.len() != t {
                return Err(Error::DimensionMismatch(format!(
                    "group {i} has {} values for {t} types",
                    row.len()
                )));
            }
            for (z, v) in row.iter().enumerate() {
                if v < &Rational::zero() {
                    return Err(Error::InvalidInstance(format!(
                        "negative value {v} for group {i}, type {z}"
                    )));
                }
                if kind == Kind::Chores && v.is_zero() {
                    return Err(Error::InvalidInstance(format!(
                        "chore cost for group {i}, type {z} must be strictly positive"
                    )));
                }
            }
            if row.iter().all(Zero::is_zero) {
                return Err(Error::DegenerateAgent(i));
            }
        }

        let mut order: Vec<usize> = (0..group_sizes.len()).collect();
        order.sort_by_key(|&i| group_sizes[i]);
        let sizes = order.iter().map(|&i| group_sizes[i]).collect();
        let values: Vec<Vec<Rational>> = order.iter().map(|&i| values[i].clone()).collect();
        let values_f64 = values
            .iter()
            .map(|row| row.iter().map(to_f64).collect())
            .collect();

        Ok(Self {
            group_sizes: sizes,
            type_copies,
            values,
            values_f64,
            kind,
            original_order: order,
        })
    }

    /// Single-agent groups with one copy of every item.
    pub fn unit(values: Vec<Vec<Rational>>, kind: Kind) -> Result<Self> {
        let n = values.len();
        let m = values.first().map_or(0, Vec::len);
        Self::new(vec![1; n], vec![1; m], values, kind)
    }

    pub fn from_integers(
        group_sizes: Vec<u64>,
        type_copies: Vec<u64>,
        values: &[Vec<i64>],
        kind: Kind,
    ) -> Result<Self> {
        let values = values
            .iter()
            .map(|row| row.iter().map(|&v| Rational::from_integer(v.into())).collect())
            .collect();
        Self::new(group_sizes, type_copies, values, kind)
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn group_sizes(&self) -> &[u64] {
        &self.group_sizes
    }

    pub fn type_copies(&self) -> &[u64] {
        &self.type_copies
    }

    pub fn values(&self) -> &[Vec<Rational>] {
        &self.values
    }

    pub fn value(&self, group: usize, item_type: usize) -> &Rational {
        &self.values[group][item_type]
    }

    pub fn values_f64(&self) -> &[Vec<f64>] {
        &self.values_f64
    }

    /// Position each sorted group held in the caller's original ordering.
    pub fn original_order(&self) -> &[usize] {
        &self.original_order
    }

    /// Number of groups `d`.
    pub fn groups(&self) -> usize {
        self.group_sizes.len()
    }

    /// Number of item types `t`.
    pub fn types(&self) -> usize {
        self.type_copies.len()
    }

    /// Total number of agents `n`.
    pub fn agents(&self) -> u64 {
        self.group_sizes.iter().sum()
    }

    /// Total number of items `m`.
    pub fn items(&self) -> u64 {
        self.type_copies.iter().sum()
    }

    pub fn largest_group(&self) -> u64 {
        *self.group_sizes.last().expect("nonempty")
    }

    pub fn is_single_agent_groups(&self) -> bool {
        self.group_sizes.iter().all(|&s| s == 1)
    }

    pub fn is_unit_copies(&self) -> bool {
        self.type_copies.iter().all(|&k| k == 1)
    }

    /// Same groups and values with a different copy vector.
    pub fn with_copies(&self, type_copies: Vec<u64>) -> Result<Self> {
        if type_copies.len() != self.types() {
            return Err(Error::DimensionMismatch(format!(
                "{} copy counts for {} types",
                type_copies.len(),
                self.types()
            )));
        }
        if type_copies.contains(&0) {
            return Err(Error::InvalidInstance("type with 0 copies".into()));
        }
        let mut out = self.clone();
        out.type_copies = type_copies;
        Ok(out)
    }

    /// Value of `group` for the whole multiset, `v_i(k, M)`.
    pub fn total_value(&self, group: usize) -> Rational {
        self.values[group]
            .iter()
            .zip(&self.type_copies)
            .map(|(v, &k)| v * Rational::from_integer(k.into()))
            .sum()
    }

    /// Value of `group` for a per-type bundle of copies.
    pub fn bundle_value(&self, group: usize, bundle: &[u64]) -> Rational {
        self.values[group]
            .iter()
            .zip(bundle)
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| v * Rational::from_integer(c.into()))
            .sum()
    }

    /// Value of `group` for a fractional per-type bundle.
    pub fn bundle_value_f64(&self, group: usize, bundle: &[f64]) -> f64 {
        self.values_f64[group]
            .iter()
            .zip(bundle)
            .map(|(v, x)| v * x)
            .sum()
    }

    pub fn max_value(&self, group: usize) -> &Rational {
        self.values[group].iter().max().expect("nonempty")
    }
}

pub(crate) fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Per-agent fractional copies `x_{i,z}` of each type for one agent of each
/// group; group `i` as a whole holds `n_i * x_{i,z}` copies of type `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalAllocation {
    pub shares: Vec<Vec<f64>>,
    /// Producer's claim that every type is fully allocated.
    pub complete: bool,
}

impl FractionalAllocation {
    pub fn new(shares: Vec<Vec<f64>>, complete: bool) -> Self {
        Self { shares, complete }
    }

    /// Copies of type `z` held by the whole of group `i`, `B_{i,z}`.
    pub fn group_mass(&self, instance: &Instance, group: usize, item_type: usize) -> f64 {
        instance.group_sizes()[group] as f64 * self.shares[group][item_type]
    }

    pub fn allocated(&self, instance: &Instance, item_type: usize) -> f64 {
        (0..instance.groups())
            .map(|i| self.group_mass(instance, i, item_type))
            .sum()
    }

    /// Largest capacity violation or negative share, relative to each type's
    /// copy count.
    pub fn feasibility_residual(&self, instance: &Instance) -> f64 {
        let mut worst = 0.0f64;
        for (z, &k) in instance.type_copies().iter().enumerate() {
            let over = (self.allocated(instance, z) - k as f64) / k as f64;
            worst = worst.max(over);
            for row in &self.shares {
                worst = worst.max(-row[z] / k as f64);
            }
        }
        worst
    }

    pub fn check_dimensions(&self, instance: &Instance) -> Result<()> {
        if self.shares.len() != instance.groups()
            || self.shares.iter().any(|r| r.len() != instance.types())
        {
            return Err(Error::DimensionMismatch(format!(
                "fractional allocation is not {}x{}",
                instance.groups(),
                instance.types()
            )));
        }
        Ok(())
    }
}

/// Integer copies `A_{i,z}` of each type received by every agent of group `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegralAllocation {
    pub counts: Vec<Vec<u64>>,
}

impl IntegralAllocation {
    pub fn new(counts: Vec<Vec<u64>>) -> Self {
        Self { counts }
    }

    pub fn bundle(&self, group: usize) -> &[u64] {
        &self.counts[group]
    }

    pub fn check_dimensions(&self, instance: &Instance) -> Result<()> {
        if self.counts.len() != instance.groups()
            || self.counts.iter().any(|r| r.len() != instance.types())
        {
            return Err(Error::DimensionMismatch(format!(
                "integral allocation is not {}x{}",
                instance.groups(),
                instance.types()
            )));
        }
        Ok(())
    }

    /// `sum_i n_i A_{i,z} = k_z` for every type.
    pub fn check_complete(&self, instance: &Instance) -> Result<()> {
        self.check_dimensions(instance)?;
        for (z, &k) in instance.type_copies().iter().enumerate() {
            let allocated: u64 = instance
                .group_sizes()
                .iter()
                .zip(&self.counts)
                .map(|(&n, row)| n * row[z])
                .sum();
            if allocated != k {
                return Err(Error::IncompleteAllocation {
                    item_type: z,
                    allocated,
                    copies: k,
                });
            }
        }
        Ok(())
    }

    pub fn to_fractional(&self) -> FractionalAllocation {
        FractionalAllocation {
            shares: self
                .counts
                .iter()
                .map(|r| r.iter().map(|&c| c as f64).collect())
                .collect(),
            complete: true,
        }
    }
}
