//! Linear programs: a dense two-phase simplex with dual certificates, the
//! gap and proportionality programs, and the vertex post-processing used by
//! the rounding step.

mod builders;
mod prop_solver;
mod simplex;

pub use builders::{
    build_completion_lp, build_gap_lp, build_prop_lp, sparsify_to_vertex, GapLp, PropLp, Sparsified,
};
pub use prop_solver::{solve_prop, PropSolution};
pub use simplex::solve;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// Sparse row: `(variable, coefficient)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coefficients: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `direction c.x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub direction: Direction,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(direction: Direction, objective: Vec<f64>) -> Self {
        Self {
            direction,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coefficients: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coefficients,
            relation,
            rhs,
        });
    }

    /// Largest violation of any constraint at `x` (negative entries count as
    /// violations of the implicit bounds).
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0f64, |w, &v| w.max(-v));
        for row in &self.constraints {
            let lhs: f64 = row.coefficients.iter().map(|&(j, a)| a * x[j]).sum();
            let violation = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(violation);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Unbounded,
    Infeasible,
}

/// Dual solution checked against the primal.
///
/// Sign convention: for a maximization, `<=` rows carry `y >= 0` and `>=`
/// rows `y <= 0`, and `A^T y >= c`; for a minimization every sign flips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub duals: Vec<f64>,
    pub dual_objective: f64,
    /// `|c.x - b.y| / max(1, |c.x|)`.
    pub duality_gap: f64,
    /// Largest violation of dual feasibility, relative to `max(1, max |c|)`.
    pub dual_infeasibility: f64,
    pub primal_residual: f64,
}

pub const GAP_TOLERANCE: f64 = 1e-6;
pub const DUAL_FEASIBILITY_TOLERANCE: f64 = 1e-7;
pub const PRIMAL_TOLERANCE: f64 = 1e-9;

impl Certificate {
    pub fn holds(&self) -> bool {
        self.duality_gap <= GAP_TOLERANCE
            && self.dual_infeasibility <= DUAL_FEASIBILITY_TOLERANCE
            && self.primal_residual <= PRIMAL_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: Status,
    pub objective_value: f64,
    pub variable_values: Vec<f64>,
    /// Basic columns, one per row. Columns `0..n` are the variables, `n + r`
    /// is the slack, surplus or equality artificial of row `r`, and
    /// `n + rows + r` the artificial of a `>=` row.
    pub basis: Vec<usize>,
    pub certificate: Option<Certificate>,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn certified(&self) -> bool {
        self.certificate.as_ref().is_some_and(Certificate::holds)
    }
}
