use serde::{Deserialize, Serialize};

use super::{solve, Direction, LinearProgram, LpSolution, Relation, Status};
use crate::error::{Error, Result};
use crate::model::{FractionalAllocation, Instance, Kind};
use crate::norms::{normalize_all, Norm};

/// Values below this (relative to the type's copy count) count as zero when
/// counting positive variables and shared types.
const ZERO_TOL: f64 = 1e-9;

/// The max-min gap program over per-agent shares.
///
/// Variable `0` is `alpha`; `y[i][z] = x[i][z] / k_z` sits at `1 + i * t + z`.
/// Working in per-type fractions keeps the coefficients near one however
/// many copies a type has.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapLp {
    pub lp: LinearProgram,
    pub kind: Kind,
    pub groups: usize,
    pub types: usize,
    /// Copy-weighted normalized rows used as coefficients (l2 for goods,
    /// l1 for chores).
    pub normalized: Vec<Vec<f64>>,
    /// Copies per type, the scale between `y` and the shares.
    pub copies: Vec<f64>,
}

impl GapLp {
    pub fn x_index(&self, group: usize, item_type: usize) -> usize {
        1 + group * self.types + item_type
    }

    pub fn pair_rows(&self) -> usize {
        self.groups * (self.groups - 1)
    }

    pub fn shares(&self, solution: &LpSolution) -> Vec<Vec<f64>> {
        (0..self.groups)
            .map(|i| {
                (0..self.types)
                    .map(|z| solution.variable_values[self.x_index(i, z)].max(0.0) * self.copies[z])
                    .collect()
            })
            .collect()
    }
}

/// Pair-advantage coefficients: `sum_z coef[z] * x[a][z] - coef[z] * x[b][z]`
/// is the advantage of group `i` over `other` in normalized units.
fn pair_terms(gap: &GapLp, i: usize, other: usize, offset: usize) -> Vec<(usize, f64)> {
    let sign = match gap.kind {
        Kind::Goods => 1.0,
        Kind::Chores => -1.0,
    };
    let mut terms = Vec::with_capacity(2 * gap.types);
    for z in 0..gap.types {
        let w = gap.normalized[i][z] * gap.copies[z];
        if w != 0.0 {
            terms.push((gap.x_index(i, z) - 1 + offset, sign * w));
            terms.push((gap.x_index(other, z) - 1 + offset, -sign * w));
        }
    }
    terms
}

fn capacity_terms(instance: &Instance, gap: &GapLp, z: usize, offset: usize) -> Vec<(usize, f64)> {
    instance
        .group_sizes()
        .iter()
        .enumerate()
        .map(|(i, &n)| (gap.x_index(i, z) - 1 + offset, n as f64))
        .collect()
}

/// Maximize the smallest normalized pairwise advantage subject to
/// `sum_i n_i x[i][z] <= k_z`, posed as `sum_i n_i y[i][z] <= 1`.
pub fn build_gap_lp(instance: &Instance) -> Result<GapLp> {
    let kind = instance.kind();
    let norm = match kind {
        Kind::Goods => Norm::L2,
        Kind::Chores => Norm::L1,
    };
    let normalized = normalize_all(instance, norm)?;
    let d = instance.groups();
    let t = instance.types();
    let mut objective = vec![0.0; 1 + d * t];
    objective[0] = 1.0;
    let mut gap = GapLp {
        lp: LinearProgram::new(Direction::Maximize, objective),
        kind,
        groups: d,
        types: t,
        normalized,
        copies: instance.type_copies().iter().map(|&k| k as f64).collect(),
    };
    for i in 0..d {
        for other in 0..d {
            if other == i {
                continue;
            }
            // alpha - advantage <= 0
            let mut row = vec![(0, 1.0)];
            row.extend(pair_terms(&gap, i, other, 1).into_iter().map(|(j, a)| (j, -a)));
            gap.lp.add(row, Relation::Le, 0.0);
        }
    }
    for z in 0..t {
        let row = capacity_terms(instance, &gap, z, 1);
        gap.lp.add(row, Relation::Le, 1.0);
    }
    if d == 1 {
        gap.lp.add(vec![(0, 1.0)], Relation::Le, 0.0);
    }
    Ok(gap)
}

/// Maximize the allocated fraction of every type while keeping each pairwise
/// advantage at least `alpha`. Variables are the fractions `y` alone, laid
/// out as in [`GapLp`] shifted down by one.
pub fn build_completion_lp(instance: &Instance, gap: &GapLp, alpha: f64) -> LinearProgram {
    let d = gap.groups;
    let t = gap.types;
    let sizes = instance.group_sizes();
    let mut objective = vec![0.0; d * t];
    for i in 0..d {
        for z in 0..t {
            objective[i * t + z] = sizes[i] as f64;
        }
    }
    let mut lp = LinearProgram::new(Direction::Maximize, objective);
    let floor = alpha - 1e-9 * alpha.abs().max(1.0);
    for i in 0..d {
        for other in 0..d {
            if other != i {
                lp.add(pair_terms(gap, i, other, 0), Relation::Ge, floor);
            }
        }
    }
    for z in 0..t {
        lp.add(capacity_terms(instance, gap, z, 0), Relation::Le, 1.0);
    }
    lp
}

/// A complete fractional allocation read off a vertex of the gap program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sparsified {
    pub allocation: FractionalAllocation,
    /// Optimal value of the gap program.
    pub alpha: f64,
    /// Strictly positive share variables at the vertex used.
    pub positive_variables: usize,
    /// Types whose group mass `n_i x[i][z]` is fractional for some group.
    pub shared_type_count: usize,
    /// Whether the completion program had to be solved.
    pub completed: bool,
    /// Types that were entirely unallocated and reset to the uniform split.
    pub reset_types: Vec<usize>,
}

fn count_positive(shares: &[Vec<f64>], copies: &[u64]) -> usize {
    shares
        .iter()
        .map(|row| {
            row.iter()
                .zip(copies)
                .filter(|(&x, &k)| x > ZERO_TOL * k as f64)
                .count()
        })
        .sum()
}

fn is_complete(instance: &Instance, shares: &[Vec<f64>]) -> bool {
    let alloc = FractionalAllocation::new(shares.to_vec(), false);
    instance
        .type_copies()
        .iter()
        .enumerate()
        .all(|(z, &k)| alloc.allocated(instance, z) >= k as f64 * (1.0 - ZERO_TOL))
}

/// Turn an optimal vertex of the gap program into a complete allocation
/// with few shared types.
///
/// Unused capacity is filled by a second vertex solve that keeps every pair
/// at the optimal advantage. Types left wholly unallocated are split
/// uniformly across agents.
pub fn sparsify_to_vertex(gap: &GapLp, solution: &LpSolution, instance: &Instance) -> Result<Sparsified> {
    if solution.status != Status::Optimal {
        return Err(Error::NonBasic(format!("solver status is {:?}", solution.status)));
    }
    let d = gap.groups;
    let t = gap.types;
    let copies = instance.type_copies();
    let rows = gap.lp.constraints.len();
    let mut shares = gap.shares(solution);
    let mut positives = count_positive(&shares, copies);
    if positives + usize::from(solution.variable_values[0] > ZERO_TOL) > rows {
        return Err(Error::NonBasic(format!("{positives} positive variables but only {rows} rows")));
    }
    let alpha = solution.objective_value;

    let mut completed = false;
    if !is_complete(instance, &shares) {
        let completion = build_completion_lp(instance, gap, alpha);
        let sol = solve(&completion)?;
        if sol.status != Status::Optimal {
            return Err(Error::InvariantViolation(format!(
                "completion program returned {:?}",
                sol.status
            )));
        }
        shares = (0..d)
            .map(|i| {
                (0..t)
                    .map(|z| sol.variable_values[i * t + z].max(0.0) * gap.copies[z])
                    .collect()
            })
            .collect();
        positives = count_positive(&shares, copies);
        if positives > completion.constraints.len() {
            return Err(Error::NonBasic(format!(
                "completion vertex has {positives} positive variables"
            )));
        }
        completed = true;
    }

    let n = instance.agents() as f64;
    let sizes = instance.group_sizes();
    let mut reset_types = Vec::new();
    for (z, &k) in copies.iter().enumerate() {
        let total: f64 = (0..d).map(|i| sizes[i] as f64 * shares[i][z]).sum();
        if total <= ZERO_TOL * k as f64 {
            for row in shares.iter_mut() {
                row[z] = k as f64 / n;
            }
            reset_types.push(z);
        }
    }

    let bound = t + d * (d - 1);
    if positives > bound {
        return Err(Error::InvariantViolation(format!(
            "{positives} positive share variables exceed t + d(d-1) = {bound}"
        )));
    }

    let shared_type_count = (0..t)
        .filter(|&z| {
            (0..d).any(|i| {
                let mass = sizes[i] as f64 * shares[i][z];
                (mass - mass.round()).abs() > ZERO_TOL * copies[z] as f64
            })
        })
        .count();

    Ok(Sparsified {
        allocation: FractionalAllocation::new(shares, true),
        alpha,
        positive_variables: positives,
        shared_type_count,
        completed,
        reset_types,
    })
}

/// The max-min proportional-share program for single agents and single
/// copies. Variable `0` is `alpha`; `x[i][j]` sits at `1 + i * m + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropLp {
    pub lp: LinearProgram,
    pub kind: Kind,
    pub agents: usize,
    pub items: usize,
    /// l1-normalized rows.
    pub normalized: Vec<Vec<f64>>,
}

impl PropLp {
    pub fn x_index(&self, agent: usize, item: usize) -> usize {
        1 + agent * self.items + item
    }

    pub fn allocation(&self, solution: &LpSolution) -> FractionalAllocation {
        let shares = (0..self.agents)
            .map(|i| {
                (0..self.items)
                    .map(|j| solution.variable_values[self.x_index(i, j)].max(0.0))
                    .collect()
            })
            .collect();
        FractionalAllocation::new(shares, self.kind == Kind::Chores)
    }
}

/// Goods: maximize the smallest normalized utility with `sum_i x[i][j] <= 1`.
/// Chores: minimize the largest normalized cost with `sum_i x[i][j] = 1`.
pub fn build_prop_lp(instance: &Instance) -> Result<PropLp> {
    if !instance.is_single_agent_groups() || !instance.is_unit_copies() {
        return Err(Error::UnsupportedScope(
            "proportionality programs need single-agent groups and one copy per item".into(),
        ));
    }
    let kind = instance.kind();
    let normalized = normalize_all(instance, Norm::L1)?;
    let n = instance.groups();
    let m = instance.types();
    let direction = match kind {
        Kind::Goods => Direction::Maximize,
        Kind::Chores => Direction::Minimize,
    };
    let mut objective = vec![0.0; 1 + n * m];
    objective[0] = 1.0;
    let mut prop = PropLp {
        lp: LinearProgram::new(direction, objective),
        kind,
        agents: n,
        items: m,
        normalized,
    };
    let agent_relation = match kind {
        Kind::Goods => Relation::Le,
        Kind::Chores => Relation::Ge,
    };
    for i in 0..n {
        let mut row = vec![(0, 1.0)];
        for j in 0..m {
            let w = prop.normalized[i][j];
            if w != 0.0 {
                row.push((prop.x_index(i, j), -w));
            }
        }
        prop.lp.add(row, agent_relation, 0.0);
    }
    let item_relation = match kind {
        Kind::Goods => Relation::Le,
        Kind::Chores => Relation::Eq,
    };
    for j in 0..m {
        let row = (0..n).map(|i| (prop.x_index(i, j), 1.0)).collect();
        prop.lp.add(row, item_relation, 1.0);
    }
    Ok(prop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve;

    fn goods(values: &[Vec<i64>], sizes: &[u64], copies: &[u64]) -> Instance {
        Instance::from_integers(sizes.to_vec(), copies.to_vec(), values, Kind::Goods).unwrap()
    }

    #[test]
    fn gap_lp_dimensions() {
        let inst = goods(&[vec![1, 2], vec![3, 1]], &[1, 1], &[1, 1]);
        let gap = build_gap_lp(&inst).unwrap();
        assert_eq!(gap.lp.variables(), 5);
        assert_eq!(gap.lp.constraints.len(), 4);
    }

    #[test]
    fn orthogonal_instance_reaches_one() {
        let inst = goods(&[vec![1, 0], vec![0, 1]], &[1, 1], &[1, 1]);
        let gap = build_gap_lp(&inst).unwrap();
        let sol = solve(&gap.lp).unwrap();
        assert!((sol.objective_value - 1.0).abs() < 1e-9);
        assert!(sol.certified());
        let sp = sparsify_to_vertex(&gap, &sol, &inst).unwrap();
        assert_eq!(sp.positive_variables, 2);
        assert_eq!(sp.shared_type_count, 0);
        assert!(!sp.completed);
        assert_eq!(sp.allocation.shares, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn identical_rows_have_zero_optimum() {
        let inst = goods(&[vec![2, 5, 1], vec![4, 10, 2]], &[1, 2], &[3, 3, 6]);
        let gap = build_gap_lp(&inst).unwrap();
        let sol = solve(&gap.lp).unwrap();
        assert!(sol.objective_value.abs() < 1e-9);
        let sp = sparsify_to_vertex(&gap, &sol, &inst).unwrap();
        for z in 0..3 {
            let k = inst.type_copies()[z] as f64;
            assert!((sp.allocation.allocated(&inst, z) - k).abs() < 1e-9 * k);
        }
    }

    #[test]
    fn chores_gap_is_complete_after_sparsify() {
        let inst = Instance::from_integers(vec![1, 1], vec![4, 4], &[vec![1, 3], vec![3, 1]], Kind::Chores).unwrap();
        let gap = build_gap_lp(&inst).unwrap();
        let sol = solve(&gap.lp).unwrap();
        assert!(sol.objective_value > 0.0);
        let sp = sparsify_to_vertex(&gap, &sol, &inst).unwrap();
        assert!(sp.allocation.feasibility_residual(&inst) < 1e-9);
        for z in 0..2 {
            assert!((sp.allocation.allocated(&inst, z) - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn prop_lp_examples() {
        let single = goods(&[vec![1, 2, 3]], &[1], &[1, 1, 1]);
        let p = build_prop_lp(&single).unwrap();
        assert!((solve(&p.lp).unwrap().objective_value - 1.0).abs() < 1e-9);

        let orth = goods(&[vec![1, 0], vec![0, 1]], &[1, 1], &[1, 1]);
        let p = build_prop_lp(&orth).unwrap();
        assert!((solve(&p.lp).unwrap().objective_value - 1.0).abs() < 1e-9);

        let same = goods(&[vec![1, 1], vec![1, 1]], &[1, 1], &[1, 1]);
        let p = build_prop_lp(&same).unwrap();
        assert!((solve(&p.lp).unwrap().objective_value - 0.5).abs() < 1e-9);
    }

    #[test]
    fn prop_lp_rejects_groups() {
        let inst = goods(&[vec![1, 1], vec![1, 2]], &[1, 2], &[1, 1]);
        assert!(matches!(build_prop_lp(&inst), Err(Error::UnsupportedScope(_))));
        let inst = goods(&[vec![1, 1], vec![1, 2]], &[1, 1], &[2, 1]);
        assert!(matches!(build_prop_lp(&inst), Err(Error::UnsupportedScope(_))));
    }
}
