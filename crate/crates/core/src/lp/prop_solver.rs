//! Solves the proportionality program at sizes where a dense tableau over
//! every `(agent, item)` pair would not fit.
//!
//! The dual of the goods program is `min_y sum_j max_i w[i][j] y[i]` over the
//! simplex (chores: `max_y sum_j min_i`). Its pieces are the integral
//! assignments that give each item to a best agent, so the primal optimum is
//! a mixture of few such assignments.

use serde::{Deserialize, Serialize};

use super::{solve, Direction, LinearProgram, Relation, Status};
use crate::error::{Error, Result};
use crate::model::{FractionalAllocation, Instance, Kind};
use crate::norms::{normalize_all, Norm};

/// Absolute tolerance on `dual_bound - alpha`.
pub const PROP_GAP_TOLERANCE: f64 = 1e-7;
const MAX_ROUNDS: usize = 20_000;
/// Columns kept in the master, as a multiple of the agent count; the oldest
/// unused ones are dropped beyond this.
const COLUMN_POOL_FACTOR: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropSolution {
    pub kind: Kind,
    /// Primal value: the smallest normalized utility (goods) or largest
    /// normalized cost (chores) of `allocation`.
    pub alpha: f64,
    pub allocation: FractionalAllocation,
    /// Best dual value seen; an upper bound on the optimum for goods and a
    /// lower bound for chores.
    pub dual_bound: f64,
    pub duality_gap: f64,
    /// Assignments generated.
    pub columns: usize,
    /// Master solves performed.
    pub rounds: usize,
}

impl PropSolution {
    pub fn converged(&self) -> bool {
        self.duality_gap <= PROP_GAP_TOLERANCE
    }
}

struct Problem {
    kind: Kind,
    n: usize,
    m: usize,
    /// Column-major: `w[j * n + i]`.
    w: Vec<f64>,
}

/// An integral assignment of every item and the normalized load it gives
/// each agent.
struct Column {
    owner: Vec<u32>,
    load: Vec<f64>,
}

impl Problem {
    fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[j * self.n + i]
    }

    /// Each item to the agent with the best weighted value under `y`
    /// (ties to the smallest index), with the resulting dual value.
    fn best_response(&self, y: &[f64]) -> (Column, f64) {
        let mut owner = Vec::with_capacity(self.m);
        let mut load = vec![0.0; self.n];
        let mut value = 0.0;
        for j in 0..self.m {
            let col = &self.w[j * self.n..(j + 1) * self.n];
            let mut best = (0, col[0] * y[0]);
            for i in 1..self.n {
                let v = col[i] * y[i];
                let better = match self.kind {
                    Kind::Goods => v > best.1,
                    Kind::Chores => v < best.1,
                };
                if better {
                    best = (i, v);
                }
            }
            owner.push(best.0 as u32);
            load[best.0] += col[best.0];
            value += best.1;
        }
        (Column { owner, load }, value)
    }
}

/// Solve the proportionality program to within [`PROP_GAP_TOLERANCE`].
///
/// Column generation: the master program mixes integral assignments, and
/// each round adds the best response to the master's agent duals. The dual
/// value of that response bounds the optimum, so the reported gap is always
/// a certified one.
pub fn solve_prop(instance: &Instance) -> Result<PropSolution> {
    if !instance.is_single_agent_groups() || !instance.is_unit_copies() {
        return Err(Error::UnsupportedScope(
            "proportionality programs need single-agent groups and one copy per item".into(),
        ));
    }
    let normalized = normalize_all(instance, Norm::L1)?;
    let n = instance.groups();
    let m = instance.types();
    let mut w = vec![0.0; n * m];
    for (i, row) in normalized.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            w[j * n + i] = v;
        }
    }
    let problem = Problem {
        kind: instance.kind(),
        n,
        m,
        w,
    };
    let goods = problem.kind == Kind::Goods;

    let uniform = vec![1.0 / n as f64; n];
    let (first, first_value) = problem.best_response(&uniform);
    let mut bound = first_value;
    let mut columns = vec![first];
    let mut generated = 1;

    for round in 1.. {
        let (alpha, weights, y) = solve_master(&problem, &columns)?;
        let (response, value) = problem.best_response(&y);
        bound = if goods { bound.min(value) } else { bound.max(value) };
        let gap = if goods { bound - alpha } else { alpha - bound };
        let fresh = columns.iter().all(|c| c.owner != response.owner);
        if gap <= PROP_GAP_TOLERANCE || !fresh || round >= MAX_ROUNDS {
            let allocation = mix(&problem, &columns, &weights);
            let utilities: Vec<f64> = (0..n)
                .map(|i| (0..m).map(|j| problem.weight(i, j) * allocation[i][j]).sum())
                .collect();
            let alpha = if goods {
                utilities.iter().copied().fold(f64::INFINITY, f64::min)
            } else {
                utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            let gap = if goods { bound - alpha } else { alpha - bound };
            return Ok(PropSolution {
                kind: problem.kind,
                alpha,
                allocation: FractionalAllocation::new(allocation, !goods),
                dual_bound: bound,
                duality_gap: gap.max(0.0),
                columns: generated,
                rounds: round,
            });
        }
        let limit = COLUMN_POOL_FACTOR * n;
        if columns.len() >= limit {
            // Drop the oldest columns with zero weight until under the limit.
            let mut dropped = 0;
            let target = columns.len() + 1 - limit;
            let keep: Vec<bool> = weights
                .iter()
                .map(|&v| {
                    if v > 0.0 || dropped >= target {
                        true
                    } else {
                        dropped += 1;
                        false
                    }
                })
                .collect();
            let mut it = keep.iter();
            columns.retain(|_| *it.next().unwrap_or(&true));
        }
        columns.push(response);
        generated += 1;
    }
    unreachable!("the round loop only exits by returning")
}

/// Goods: max alpha with every agent's mixed load at least alpha.
/// Chores: min alpha with every agent's mixed load at most alpha.
/// Returns the value, the mixing weights and the normalized agent duals.
fn solve_master(problem: &Problem, columns: &[Column]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let n = problem.n;
    let (direction, relation) = match problem.kind {
        Kind::Goods => (Direction::Maximize, Relation::Le),
        Kind::Chores => (Direction::Minimize, Relation::Ge),
    };
    let mut objective = vec![0.0; 1 + columns.len()];
    objective[0] = 1.0;
    let mut lp = LinearProgram::new(direction, objective);
    for i in 0..n {
        let mut row = vec![(0, 1.0)];
        for (k, col) in columns.iter().enumerate() {
            if col.load[i] != 0.0 {
                row.push((1 + k, -col.load[i]));
            }
        }
        lp.add(row, relation, 0.0);
    }
    lp.add((1..=columns.len()).map(|k| (k, 1.0)).collect(), Relation::Eq, 1.0);
    let sol = solve(&lp)?;
    if sol.status != Status::Optimal {
        return Err(Error::InvariantViolation(format!(
            "proportionality master program returned {:?}",
            sol.status
        )));
    }
    let weights = sol.variable_values[1..].to_vec();
    let duals: Vec<f64> = sol
        .certificate
        .map(|c| c.duals[..n].iter().map(|v| v.abs()).collect())
        .unwrap_or_default();
    let total: f64 = duals.iter().sum();
    let y = if total > 0.0 {
        duals.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / n as f64; n]
    };
    Ok((sol.objective_value, weights, y))
}

fn mix(problem: &Problem, columns: &[Column], weights: &[f64]) -> Vec<Vec<f64>> {
    let mut x = vec![vec![0.0; problem.m]; problem.n];
    let total: f64 = weights.iter().map(|v| v.max(0.0)).sum();
    for (col, &lambda) in columns.iter().zip(weights) {
        if lambda <= 0.0 {
            continue;
        }
        let lambda = lambda / total;
        for (j, &i) in col.owner.iter().enumerate() {
            x[i as usize][j] += lambda;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{build_prop_lp, solve};
    use crate::model::Rational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, n: usize, m: usize, kind: Kind) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n)
            .map(|_| (0..m).map(|_| Rational::from_integer(rng.gen_range(1..=1000).into())).collect())
            .collect();
        Instance::unit(values, kind).unwrap()
    }

    #[test]
    fn matches_full_program() {
        for kind in [Kind::Goods, Kind::Chores] {
            for seed in 0..20 {
                let inst = random_instance(seed, 4, 12, kind);
                let full = solve(&build_prop_lp(&inst).unwrap().lp).unwrap();
                let fast = solve_prop(&inst).unwrap();
                assert!(fast.converged(), "{kind} seed {seed}: gap {}", fast.duality_gap);
                assert!(
                    (full.objective_value - fast.alpha).abs() < 1e-7,
                    "{kind} seed {seed}: {} vs {}",
                    full.objective_value,
                    fast.alpha
                );
            }
        }
    }

    #[test]
    fn allocation_is_feasible() {
        let inst = random_instance(7, 5, 40, Kind::Chores);
        let sol = solve_prop(&inst).unwrap();
        for j in 0..40 {
            let s: f64 = (0..5).map(|i| sol.allocation.shares[i][j]).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
