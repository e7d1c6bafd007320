//! From fractional shares to complete integral allocations.
//!
//! [`round_envy`] pools the fractional and leftover mass of every type and
//! hands it back in whole blocks of group size, so all agents in a group get
//! the same bundle. [`round_proportional`] rounds single-agent shares through
//! a slot matching and loses at most one item's worth per agent.

use std::collections::VecDeque;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frobenius::decompose;
use crate::model::{FractionalAllocation, Instance, IntegralAllocation, Kind, Rational};
use crate::norms::thresholds;

/// Group masses this close to an integer are taken to be that integer.
pub const SNAP_TOLERANCE: f64 = 1e-7;
/// Largest relative capacity violation accepted in the input.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundingTrace {
    /// Pool size `S_z` at the end of each of the three phases.
    pub pool_after_phase: [Vec<u64>; 3],
    /// Group masses after each phase; `masses[p][i][z]`.
    pub masses_after_phase: [Vec<Vec<u64>>; 3],
    /// Mass moved into the pool in Phase 2 (remainders mod `n_i`).
    pub phase2_pooled: Vec<Vec<u64>>,
    /// Mass moved into the pool in Phase 3 (whole blocks of `n_i`).
    pub phase3_removed: Vec<Vec<u64>>,
    /// Extra copies per agent handed back from the pool, `y[i][z]`.
    pub extra_copies: Vec<Vec<u64>>,
    /// `sum_z S_z` at the end of Phase 3.
    pub pooled_total: u64,
    /// `d(d-1) + t(theta + n + n_d - d - 1)`, the pooled-mass constant for
    /// per-copy pooling.
    pub per_copy_constant: u64,
    /// The per-type constant, which adds `t` for fractional parts pooled
    /// type by type.
    pub adjusted_constant: u64,
    /// Every phase boundary satisfied `sum_i B_iz + S_z = k_z`.
    pub mass_conserved: bool,
    /// Whether the precondition on the copy counts was waived.
    pub forced: bool,
}

impl RoundingTrace {
    pub fn within_adjusted_bound(&self) -> bool {
        self.pooled_total <= self.adjusted_constant
    }

    pub fn within_per_copy_bound(&self) -> bool {
        self.pooled_total <= self.per_copy_constant
    }
}

/// `d(d-1) + t(theta + n + n_d - d - 1)`
pub fn pooled_mass_constant(instance: &Instance) -> Result<u64> {
    let th = thresholds(instance.group_sizes())?;
    let d = instance.groups() as u64;
    let t = instance.types() as u64;
    let n = instance.agents();
    Ok(d * (d - 1) + t * (th.theta + n + instance.largest_group() - d - 1))
}

/// Check `k_z >= theta` and `k_z = 0 (mod g)` for every type.
pub fn check_copy_preconditions(instance: &Instance) -> Result<()> {
    let th = thresholds(instance.group_sizes())?;
    for (z, &k) in instance.type_copies().iter().enumerate() {
        if k < th.theta || k % th.g != 0 {
            return Err(Error::Precondition(format!(
                "type {z} has {k} copies; need at least {} and a multiple of {}",
                th.theta, th.g
            )));
        }
    }
    Ok(())
}

/// Three-phase rounding of a feasible fractional allocation into a complete
/// allocation in which all agents of a group get identical bundles.
pub fn round_envy(instance: &Instance, fractional: &FractionalAllocation) -> Result<(IntegralAllocation, RoundingTrace)> {
    check_copy_preconditions(instance)?;
    round_envy_inner(instance, fractional, false)
}

/// Like [`round_envy`] but without the copy-count precondition. Phase 3 keeps
/// removing blocks until the pool is representable; fails only when every
/// group is empty and the pool still is not.
pub fn round_envy_unchecked(
    instance: &Instance,
    fractional: &FractionalAllocation,
) -> Result<(IntegralAllocation, RoundingTrace)> {
    round_envy_inner(instance, fractional, true)
}

fn round_envy_inner(
    instance: &Instance,
    fractional: &FractionalAllocation,
    forced: bool,
) -> Result<(IntegralAllocation, RoundingTrace)> {
    fractional.check_dimensions(instance)?;
    let residual = fractional.feasibility_residual(instance);
    if residual > FEASIBILITY_TOLERANCE {
        return Err(Error::Precondition(format!(
            "fractional allocation violates capacity by {residual:e} (relative)"
        )));
    }
    let th = thresholds(instance.group_sizes())?;
    let sizes = instance.group_sizes();
    let copies = instance.type_copies();
    let d = instance.groups();
    let t = instance.types();

    let mut masses = vec![vec![0u64; t]; d];
    let mut pool = vec![0u64; t];
    let mut conserved = true;

    // Phase 1: integer parts stay, the rest goes to the pool.
    for z in 0..t {
        let mut held = 0u64;
        for i in 0..d {
            let b = fractional.group_mass(instance, i, z).max(0.0);
            let near = b.round();
            let whole = if (b - near).abs() <= SNAP_TOLERANCE { near } else { b.floor() };
            masses[i][z] = whole as u64;
            held += masses[i][z];
        }
        if held > copies[z] {
            return Err(Error::InvariantViolation(format!(
                "type {z}: integer parts {held} exceed {} copies",
                copies[z]
            )));
        }
        pool[z] = copies[z] - held;
    }
    let after1 = (masses.clone(), pool.clone());

    // Phase 2: each group keeps a multiple of its size.
    let mut phase2 = vec![vec![0u64; t]; d];
    for z in 0..t {
        for i in 0..d {
            let r = masses[i][z] % sizes[i];
            masses[i][z] -= r;
            pool[z] += r;
            phase2[i][z] = r;
        }
    }
    let after2 = (masses.clone(), pool.clone());

    // Phase 3: take whole blocks from the largest holder until the pool can
    // be handed back in blocks.
    let mut phase3 = vec![vec![0u64; t]; d];
    let mut extra = vec![vec![0u64; t]; d];
    for z in 0..t {
        loop {
            let ready = if forced {
                decompose(sizes, pool[z]).is_some()
            } else {
                pool[z] >= th.theta
            };
            if ready {
                break;
            }
            let Some(i) = (0..d).filter(|&i| masses[i][z] > 0).max_by(|&a, &b| {
                masses[a][z].cmp(&masses[b][z]).then(b.cmp(&a))
            }) else {
                return Err(Error::Precondition(format!(
                    "type {z}: {} copies cannot be split into whole group blocks",
                    copies[z]
                )));
            };
            masses[i][z] -= sizes[i];
            pool[z] += sizes[i];
            phase3[i][z] += sizes[i];
        }
        let dec = decompose(sizes, pool[z]).ok_or_else(|| {
            Error::InvariantViolation(format!("type {z}: pool {} is not representable", pool[z]))
        })?;
        for i in 0..d {
            extra[i][z] = dec.coefficients[i];
        }
    }
    let after3 = (masses.clone(), pool.clone());

    for (m, s) in [&after1, &after2, &after3] {
        for z in 0..t {
            let total: u64 = (0..d).map(|i| m[i][z]).sum::<u64>() + s[z];
            conserved &= total == copies[z];
        }
    }
    if !conserved {
        return Err(Error::InvariantViolation("mass not conserved across phases".into()));
    }

    let counts: Vec<Vec<u64>> = (0..d)
        .map(|i| (0..t).map(|z| masses[i][z] / sizes[i] + extra[i][z]).collect())
        .collect();
    let allocation = IntegralAllocation::new(counts);
    allocation.check_complete(instance)?;

    let constant = pooled_mass_constant(instance)?;
    let trace = RoundingTrace {
        pooled_total: after3.1.iter().sum(),
        pool_after_phase: [after1.1, after2.1, after3.1],
        masses_after_phase: [after1.0, after2.0, after3.0],
        phase2_pooled: phase2,
        phase3_removed: phase3,
        extra_copies: extra,
        per_copy_constant: constant,
        adjusted_constant: constant + t as u64,
        mass_conserved: conserved,
        forced,
    };
    Ok((allocation, trace))
}

/// Per-agent accounting of [`round_proportional`], in exact arithmetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionalRounding {
    pub allocation: IntegralAllocation,
    /// `v_i(x_i)` of the (snapped) fractional input.
    pub fractional_values: Vec<Rational>,
    /// `v_i(A_i)` of the output.
    pub integral_values: Vec<Rational>,
    /// `max_j v_ij`.
    pub max_values: Vec<Rational>,
}

impl ProportionalRounding {
    /// Goods: `v(x) - v(A)`. Chores: `c(A) - c(x)`. Never above `max_values`.
    pub fn loss(&self, kind: Kind, agent: usize) -> Rational {
        match kind {
            Kind::Goods => &self.fractional_values[agent] - &self.integral_values[agent],
            Kind::Chores => &self.integral_values[agent] - &self.fractional_values[agent],
        }
    }
}

fn snap_shares(instance: &Instance, fractional: &FractionalAllocation) -> Result<Vec<Vec<Rational>>> {
    let n = instance.groups();
    let m = instance.types();
    let mut x: Vec<Vec<Rational>> = fractional
        .shares
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    if !v.is_finite() || v < 1e-9 {
                        Rational::zero()
                    } else if v > 1.0 - 1e-9 {
                        Rational::one()
                    } else {
                        Rational::from_float(v).unwrap_or_else(Rational::zero)
                    }
                })
                .collect()
        })
        .collect();
    for j in 0..m {
        let sum: Rational = (0..n).map(|i| &x[i][j]).sum();
        let sum_f = sum.to_f64().unwrap_or(f64::NAN);
        let target = match instance.kind() {
            Kind::Goods if sum <= Rational::one() => continue,
            Kind::Goods | Kind::Chores => Rational::one(),
        };
        if (sum_f - 1.0).abs() > 1e-6 {
            return Err(Error::Precondition(format!("item {j} is covered {sum_f} times")));
        }
        let top = (0..n).max_by(|&a, &b| x[a][j].cmp(&x[b][j]).then(b.cmp(&a))).unwrap_or(0);
        x[top][j] += target - sum;
    }
    Ok(x)
}

/// Maximum matching by BFS augmenting paths.
struct Matching {
    item_of_slot: Vec<Option<usize>>,
    slot_of_item: Vec<Option<usize>>,
}

impl Matching {
    fn new(slots: usize, items: usize) -> Self {
        Self {
            item_of_slot: vec![None; slots],
            slot_of_item: vec![None; items],
        }
    }

    /// Try to match `slot`; matched slots and items stay matched.
    fn augment(&mut self, slot: usize, slot_items: &[Vec<usize>]) -> bool {
        let mut parent_slot: Vec<Option<usize>> = vec![None; self.slot_of_item.len()];
        let mut seen_slot = vec![false; self.item_of_slot.len()];
        let mut queue = VecDeque::from([slot]);
        seen_slot[slot] = true;
        while let Some(s) = queue.pop_front() {
            for &j in &slot_items[s] {
                if parent_slot[j].is_some() {
                    continue;
                }
                parent_slot[j] = Some(s);
                match self.slot_of_item[j] {
                    None => {
                        let mut item = j;
                        loop {
                            let s = parent_slot[item].expect("item on path has a parent");
                            let previous = self.item_of_slot[s];
                            self.item_of_slot[s] = Some(item);
                            self.slot_of_item[item] = Some(s);
                            match previous {
                                Some(p) if s != slot => item = p,
                                _ => return true,
                            }
                        }
                    }
                    Some(next) if !seen_slot[next] => {
                        seen_slot[next] = true;
                        queue.push_back(next);
                    }
                    Some(_) => {}
                }
            }
        }
        false
    }

    /// Try to match `item`; matched slots and items stay matched.
    fn augment_item(&mut self, item: usize, item_slots: &[Vec<usize>]) -> bool {
        let mut parent_item: Vec<Option<usize>> = vec![None; self.item_of_slot.len()];
        let mut seen_item = vec![false; self.slot_of_item.len()];
        let mut queue = VecDeque::from([item]);
        seen_item[item] = true;
        while let Some(j) = queue.pop_front() {
            for &s in &item_slots[j] {
                if parent_item[s].is_some() {
                    continue;
                }
                parent_item[s] = Some(j);
                match self.item_of_slot[s] {
                    None => {
                        let mut slot = s;
                        loop {
                            let j = parent_item[slot].expect("slot on path has a parent");
                            let previous = self.slot_of_item[j];
                            self.slot_of_item[j] = Some(slot);
                            self.item_of_slot[slot] = Some(j);
                            match previous {
                                Some(p) if j != item => slot = p,
                                _ => return true,
                            }
                        }
                    }
                    Some(next) if !seen_item[next] => {
                        seen_item[next] = true;
                        queue.push_back(next);
                    }
                    Some(_) => {}
                }
            }
        }
        false
    }
}

/// Round single-agent shares so every agent loses at most its most valuable
/// item (goods) or gains at most its costliest item (chores).
///
/// Each agent's items, sorted by its own value from high to low, fill unit
/// slots in order. A matching of items to slots that covers every full slot
/// but the last of each agent (goods), or every item (chores), gives each
/// agent one item per slot, worth at least the next slot's share.
pub fn round_proportional(instance: &Instance, fractional: &FractionalAllocation) -> Result<ProportionalRounding> {
    if !instance.is_single_agent_groups() || !instance.is_unit_copies() {
        return Err(Error::UnsupportedScope(
            "proportional rounding needs single-agent groups and one copy per item".into(),
        ));
    }
    fractional.check_dimensions(instance)?;
    let kind = instance.kind();
    let n = instance.groups();
    let m = instance.types();
    let x = snap_shares(instance, fractional)?;

    let mut slot_items: Vec<Vec<usize>> = Vec::new();
    let mut slot_owner: Vec<usize> = Vec::new();
    let mut required: Vec<usize> = Vec::new();
    for i in 0..n {
        let mut items: Vec<usize> = (0..m).filter(|&j| x[i][j].is_positive()).collect();
        items.sort_by(|&a, &b| instance.value(i, b).cmp(instance.value(i, a)).then(a.cmp(&b)));
        let first = slot_items.len();
        let mut filled = Rational::zero();
        for &j in &items {
            let start = filled.floor().to_integer().to_usize().unwrap_or(0);
            filled += &x[i][j];
            let end = filled.ceil().to_integer().to_usize().unwrap_or(0).max(start + 1);
            for s in start..end {
                while slot_items.len() <= first + s {
                    slot_items.push(Vec::new());
                    slot_owner.push(i);
                }
                slot_items[first + s].push(j);
            }
        }
        let count = slot_items.len() - first;
        if count > 1 {
            required.extend(first..first + count - 1);
        }
    }

    let mut matching = Matching::new(slot_items.len(), m);
    match kind {
        Kind::Goods => {
            for &s in &required {
                if !matching.augment(s, &slot_items) {
                    return Err(Error::InvariantViolation(format!(
                        "full slot {s} of agent {} cannot be matched",
                        slot_owner[s]
                    )));
                }
            }
            for s in 0..slot_items.len() {
                if matching.item_of_slot[s].is_none() {
                    matching.augment(s, &slot_items);
                }
            }
        }
        Kind::Chores => {
            let mut item_slots = vec![Vec::new(); m];
            for (s, items) in slot_items.iter().enumerate() {
                for &j in items {
                    item_slots[j].push(s);
                }
            }
            for j in 0..m {
                if !matching.augment_item(j, &item_slots) {
                    return Err(Error::InvariantViolation(format!("item {j} cannot be matched")));
                }
            }
        }
    }

    let mut counts = vec![vec![0u64; m]; n];
    for j in 0..m {
        let agent = match matching.slot_of_item[j] {
            Some(s) => slot_owner[s],
            // Unmatched goods go to the agent holding the largest share.
            None => (0..n).max_by(|&a, &b| x[a][j].cmp(&x[b][j]).then(b.cmp(&a))).unwrap_or(0),
        };
        counts[agent][j] = 1;
    }

    let mut fractional_values = Vec::with_capacity(n);
    let mut integral_values = Vec::with_capacity(n);
    let mut max_values = Vec::with_capacity(n);
    for i in 0..n {
        let fv: Rational = (0..m)
            .filter(|&j| x[i][j].is_positive())
            .map(|j| instance.value(i, j) * &x[i][j])
            .sum();
        let iv = instance.bundle_value(i, &counts[i]);
        let mx = instance.max_value(i).clone();
        let ok = match kind {
            Kind::Goods => iv >= &fv - &mx,
            Kind::Chores => iv <= &fv + &mx,
        };
        if !ok {
            return Err(Error::InvariantViolation(format!(
                "agent {i}: rounding moved its value from {fv} to {iv}, more than one item"
            )));
        }
        fractional_values.push(fv);
        integral_values.push(iv);
        max_values.push(mx);
    }
    let allocation = IntegralAllocation::new(counts);
    allocation.check_complete(instance)?;
    Ok(ProportionalRounding {
        allocation,
        fractional_values,
        integral_values,
        max_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn goods(sizes: &[u64], copies: &[u64], values: &[Vec<i64>]) -> Instance {
        Instance::from_integers(sizes.to_vec(), copies.to_vec(), values, Kind::Goods).unwrap()
    }

    fn per_agent(instance: &Instance, masses: &[Vec<f64>]) -> FractionalAllocation {
        let shares = masses
            .iter()
            .zip(instance.group_sizes())
            .map(|(row, &n)| row.iter().map(|b| b / n as f64).collect())
            .collect();
        FractionalAllocation::new(shares, true)
    }

    #[test]
    fn integral_input_is_kept() {
        let inst = goods(&[1, 1], &[5, 3], &[vec![1, 2], vec![2, 1]]);
        let frac = per_agent(&inst, &[vec![5.0, 1.0], vec![0.0, 2.0]]);
        let (alloc, trace) = round_envy(&inst, &frac).unwrap();
        assert_eq!(alloc.counts, vec![vec![5, 1], vec![0, 2]]);
        assert_eq!(trace.pooled_total, 0);
    }

    #[test]
    fn two_singletons_half_split() {
        // Phase 1 pools 1; the pool goes to the second group, which is the
        // lexicographically smallest decomposition of 1 over sizes (1, 1).
        let inst = goods(&[1, 1], &[24], &[vec![1], vec![1]]);
        let frac = per_agent(&inst, &[vec![11.5], vec![12.5]]);
        let (alloc, trace) = round_envy(&inst, &frac).unwrap();
        assert_eq!(trace.pool_after_phase, [vec![1], vec![1], vec![1]]);
        assert_eq!(trace.extra_copies, vec![vec![0], vec![1]]);
        assert_eq!(alloc.counts, vec![vec![11], vec![13]]);
    }

    #[test]
    fn sizes_five_and_seven() {
        let inst = goods(&[5, 7], &[35], &[vec![1], vec![2]]);
        let frac = per_agent(&inst, &[vec![15.0], vec![20.0]]);
        let (alloc, trace) = round_envy(&inst, &frac).unwrap();
        assert_eq!(trace.pool_after_phase[0], vec![0]);
        assert_eq!(trace.pool_after_phase[1], vec![6]);
        assert!(trace.pool_after_phase[2][0] >= 24);
        assert_eq!(trace.masses_after_phase[2], vec![vec![5], vec![0]]);
        assert_eq!(trace.extra_copies, vec![vec![6], vec![0]]);
        assert_eq!(alloc.counts, vec![vec![7], vec![0]]);
        alloc.check_complete(&inst).unwrap();
    }

    #[test]
    fn copy_count_precondition() {
        let inst = goods(&[5, 7], &[12], &[vec![1], vec![2]]);
        let frac = per_agent(&inst, &[vec![5.0], vec![7.0]]);
        assert!(matches!(round_envy(&inst, &frac), Err(Error::Precondition(_))));
        let (alloc, trace) = round_envy_unchecked(&inst, &frac).unwrap();
        assert_eq!(alloc.counts, vec![vec![1], vec![1]]);
        assert!(trace.forced);
    }

    #[test]
    fn unchecked_fails_when_nothing_fits() {
        let inst = goods(&[5, 7], &[23], &[vec![1], vec![2]]);
        let frac = per_agent(&inst, &[vec![10.0], vec![13.0]]);
        assert!(matches!(round_envy_unchecked(&inst, &frac), Err(Error::Precondition(_))));
    }

    #[test]
    fn proportional_examples() {
        let orth = goods(&[1, 1], &[1, 1], &[vec![1, 0], vec![0, 1]]);
        let frac = FractionalAllocation::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], true);
        let r = round_proportional(&orth, &frac).unwrap();
        assert_eq!(r.allocation.counts, vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(r.loss(Kind::Goods, 0), Rational::zero());

        let same = goods(&[1, 1], &[1, 1], &[vec![1, 1], vec![1, 1]]);
        let frac = FractionalAllocation::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], true);
        let r = round_proportional(&same, &frac).unwrap();
        assert_eq!(r.allocation.bundle(0).iter().sum::<u64>(), 1);
        assert_eq!(r.allocation.bundle(1).iter().sum::<u64>(), 1);
        // one whole item is worth exactly the two halves it replaces
        assert_eq!(r.loss(Kind::Goods, 0), Rational::zero());
        assert_eq!(r.loss(Kind::Goods, 1), Rational::zero());
    }

    #[test]
    fn proportional_chores_cover_everything() {
        let inst = Instance::from_integers(
            vec![1, 1, 1],
            vec![1; 4],
            &[vec![1, 2, 3, 4], vec![4, 3, 2, 1], vec![2, 2, 2, 2]],
            Kind::Chores,
        )
        .unwrap();
        let frac = FractionalAllocation::new(
            vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.5], vec![0.5, 0.5, 0.5, 0.5]],
            true,
        );
        let r = round_proportional(&inst, &frac).unwrap();
        for i in 0..3 {
            assert!(r.loss(Kind::Chores, i) <= r.max_values[i]);
        }
    }
}
