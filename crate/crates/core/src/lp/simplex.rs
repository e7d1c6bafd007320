use super::{Certificate, Direction, LinearProgram, LpSolution, Relation, Status};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColumnKind {
    Structural,
    Logical,
    Artificial,
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    kinds: Vec<ColumnKind>,
    pivots: usize,
    bland: bool,
    degenerate_streak: usize,
    guard: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.width - 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn obj(&self, c: usize) -> f64 {
        self.at(self.rows, c)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let inv = 1.0 / self.at(r, c);
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v *= inv;
        }
        self.data[r * w + c] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let factor = row[c];
            if factor != 0.0 {
                for (v, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= factor * p;
                }
                row[c] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        let rhs = self.rhs_col();
        for i in 0..self.rows {
            let v = &mut self.data[i * w + rhs];
            if *v < 0.0 && *v > -1e-11 {
                *v = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Rebuild the objective row for maximizing `costs . x`.
    fn price_out(&mut self, costs: &[f64]) {
        let w = self.width;
        let mut row = vec![0.0; w];
        for (j, c) in costs.iter().enumerate() {
            row[j] = -c;
        }
        for r in 0..self.rows {
            let cb = costs[self.basis[r]];
            if cb != 0.0 {
                for (v, a) in row.iter_mut().zip(&self.data[r * w..(r + 1) * w]) {
                    *v += cb * a;
                }
            }
        }
        for v in &mut row[..w - 1] {
            if v.abs() < 1e-14 {
                *v = 0.0;
            }
        }
        let start = self.rows * w;
        self.data[start..start + w].copy_from_slice(&row);
    }

    fn entering(&self, allowed: impl Fn(ColumnKind) -> bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.width - 1 {
            if !allowed(self.kinds[j]) {
                continue;
            }
            let d = self.obj(j);
            if d < -COST_TOL {
                if self.bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, b)| d < b) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn leaving(&self, c: usize) -> Option<(usize, f64)> {
        let rhs = self.rhs_col();
        let mut best: Option<(usize, f64, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, c);
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.at(r, rhs).max(0.0) / a;
            let better = match best {
                None => true,
                Some((br, bratio, ba)) => {
                    let tie = (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs());
                    if tie {
                        if self.bland {
                            self.basis[r] < self.basis[br]
                        } else {
                            a > ba
                        }
                    } else {
                        ratio < bratio
                    }
                }
            };
            if better {
                best = Some((r, ratio, a));
            }
        }
        best.map(|(r, ratio, _)| (r, ratio))
    }

    fn run(&mut self, allowed: impl Fn(ColumnKind) -> bool + Copy) -> Result<Outcome> {
        loop {
            let Some(c) = self.entering(allowed) else {
                return Ok(Outcome::Optimal);
            };
            let Some((r, ratio)) = self.leaving(c) else {
                return Ok(Outcome::Unbounded);
            };
            if self.pivots >= self.guard {
                return Err(Error::CyclingGuard(self.pivots));
            }
            if ratio <= 1e-12 {
                self.degenerate_streak += 1;
                if self.degenerate_streak > DEGENERATE_STREAK {
                    self.bland = true;
                }
            } else {
                self.degenerate_streak = 0;
            }
            self.pivot(r, c);
        }
    }
}

fn power_of_two_near(x: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        1.0
    } else {
        2f64.powi(-(x.log2().round() as i32))
    }
}

/// Solve with a two-phase dense simplex. Rows and columns are equilibrated
/// by powers of two (exact in binary floating point) before solving.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let nv = lp.variables();
    if nv == 0 {
        return Err(Error::InvalidInstance("linear program has no variables".into()));
    }
    let m = lp.constraints.len();
    for (r, row) in lp.constraints.iter().enumerate() {
        if !row.rhs.is_finite() || row.coefficients.iter().any(|&(j, a)| j >= nv || !a.is_finite()) {
            return Err(Error::InvalidInstance(format!("constraint {r} is malformed")));
        }
    }
    if lp.objective.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInstance("objective is not finite".into()));
    }

    // column scale, then row scale
    let mut col_max = vec![0.0f64; nv];
    for row in &lp.constraints {
        for &(j, a) in &row.coefficients {
            col_max[j] = col_max[j].max(a.abs());
        }
    }
    let col_scale: Vec<f64> = col_max.iter().map(|&v| power_of_two_near(v)).collect();
    let row_scale: Vec<f64> = lp
        .constraints
        .iter()
        .map(|row| {
            let mx = row
                .coefficients
                .iter()
                .fold(0.0f64, |acc, &(j, a)| acc.max((a * col_scale[j]).abs()));
            power_of_two_near(mx)
        })
        .collect();

    // After flipping, every row has a nonnegative right-hand side.
    let mut flipped = vec![false; m];
    let mut relations = Vec::with_capacity(m);
    for (r, row) in lp.constraints.iter().enumerate() {
        let flip = row.rhs < 0.0;
        flipped[r] = flip;
        relations.push(match (row.relation, flip) {
            (Relation::Le, false) | (Relation::Ge, true) => Relation::Le,
            (Relation::Ge, false) | (Relation::Le, true) => Relation::Ge,
            (Relation::Eq, _) => Relation::Eq,
        });
    }
    let ge_rows: Vec<usize> = (0..m).filter(|&r| relations[r] == Relation::Ge).collect();
    let mut ge_art = vec![usize::MAX; m];
    for (k, &r) in ge_rows.iter().enumerate() {
        ge_art[r] = nv + m + k;
    }
    let ncols = nv + m + ge_rows.len();
    let width = ncols + 1;
    let mut kinds = vec![ColumnKind::Structural; ncols];
    for r in 0..m {
        kinds[nv + r] = if relations[r] == Relation::Eq {
            ColumnKind::Artificial
        } else {
            ColumnKind::Logical
        };
    }
    for &r in &ge_rows {
        kinds[ge_art[r]] = ColumnKind::Artificial;
    }

    let mut data = vec![0.0; (m + 1) * width];
    let mut basis = vec![0; m];
    for (r, row) in lp.constraints.iter().enumerate() {
        let sign = if flipped[r] { -1.0 } else { 1.0 };
        let base = r * width;
        for &(j, a) in &row.coefficients {
            data[base + j] += sign * a * col_scale[j] * row_scale[r];
        }
        data[base + ncols] = sign * row.rhs * row_scale[r];
        match relations[r] {
            Relation::Le => {
                data[base + nv + r] = 1.0;
                basis[r] = nv + r;
            }
            Relation::Eq => {
                data[base + nv + r] = 1.0;
                basis[r] = nv + r;
            }
            Relation::Ge => {
                data[base + nv + r] = -1.0;
                data[base + ge_art[r]] = 1.0;
                basis[r] = ge_art[r];
            }
        }
    }

    let mut tab = Tableau {
        rows: m,
        width,
        data,
        basis,
        kinds,
        pivots: 0,
        bland: false,
        degenerate_streak: 0,
        guard: 50 * (m + ncols) + 1000,
    };

    // Phase 1: maximize minus the sum of artificials.
    let has_artificial = tab.basis.iter().any(|&b| tab.kinds[b] == ColumnKind::Artificial);
    if has_artificial {
        let costs: Vec<f64> = tab
            .kinds
            .iter()
            .map(|&k| if k == ColumnKind::Artificial { -1.0 } else { 0.0 })
            .collect();
        tab.price_out(&costs);
        tab.run(|_| true)?;
        let b_scale = lp
            .constraints
            .iter()
            .zip(&row_scale)
            .fold(1.0f64, |acc, (row, s)| acc.max((row.rhs * s).abs()));
        if tab.obj(tab.rhs_col()) < -1e-9 * b_scale {
            return Ok(LpSolution {
                status: Status::Infeasible,
                objective_value: f64::NAN,
                variable_values: vec![],
                basis: vec![],
                certificate: None,
                pivots: tab.pivots,
            });
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if tab.kinds[tab.basis[r]] != ColumnKind::Artificial {
                continue;
            }
            let rhs = tab.rhs_col();
            tab.data[r * width + rhs] = 0.0;
            let candidate = (0..ncols)
                .filter(|&j| tab.kinds[j] != ColumnKind::Artificial)
                .max_by(|&a, &b| tab.at(r, a).abs().total_cmp(&tab.at(r, b).abs()));
            if let Some(j) = candidate {
                if tab.at(r, j).abs() > PIVOT_TOL {
                    tab.pivot(r, j);
                }
            }
        }
        tab.bland = false;
        tab.degenerate_streak = 0;
    }

    // Phase 2.
    let sense = match lp.direction {
        Direction::Maximize => 1.0,
        Direction::Minimize => -1.0,
    };
    let mut costs = vec![0.0; ncols];
    for j in 0..nv {
        costs[j] = sense * lp.objective[j] * col_scale[j];
    }
    tab.price_out(&costs);
    let outcome = tab.run(|k| k != ColumnKind::Artificial)?;
    if let Outcome::Unbounded = outcome {
        return Ok(LpSolution {
            status: Status::Unbounded,
            objective_value: sense * f64::INFINITY,
            variable_values: vec![],
            basis: tab.basis.clone(),
            certificate: None,
            pivots: tab.pivots,
        });
    }

    let rhs = tab.rhs_col();
    let mut x = vec![0.0; nv];
    for r in 0..m {
        let b = tab.basis[r];
        if b < nv {
            x[b] = tab.at(r, rhs).max(0.0) * col_scale[b];
        }
    }
    let objective_value: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    let mut duals = vec![0.0; m];
    for r in 0..m {
        let d = tab.obj(nv + r);
        let y_scaled = match relations[r] {
            Relation::Ge => -d,
            _ => d,
        };
        let y_row = if flipped[r] { -y_scaled } else { y_scaled };
        duals[r] = sense * y_row * row_scale[r];
    }

    let certificate = certify(lp, &x, objective_value, duals);
    Ok(LpSolution {
        status: Status::Optimal,
        objective_value,
        variable_values: x,
        basis: tab.basis.clone(),
        certificate: Some(certificate),
        pivots: tab.pivots,
    })
}

fn certify(lp: &LinearProgram, x: &[f64], primal: f64, duals: Vec<f64>) -> Certificate {
    let nv = lp.variables();
    let sense = match lp.direction {
        Direction::Maximize => 1.0,
        Direction::Minimize => -1.0,
    };
    let mut aty = vec![0.0; nv];
    let mut dual_objective = 0.0;
    let mut infeasibility = 0.0f64;
    for (row, &y) in lp.constraints.iter().zip(&duals) {
        dual_objective += row.rhs * y;
        for &(j, a) in &row.coefficients {
            aty[j] += a * y;
        }
        // In maximization form, <= rows need y >= 0 and >= rows y <= 0.
        let oriented = sense * y;
        let wrong_sign = match row.relation {
            Relation::Le => (-oriented).max(0.0),
            Relation::Ge => oriented.max(0.0),
            Relation::Eq => 0.0,
        };
        infeasibility = infeasibility.max(wrong_sign);
    }
    let c_scale = lp.objective.iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
    for j in 0..nv {
        let slack = sense * (aty[j] - lp.objective[j]);
        infeasibility = infeasibility.max(-slack);
    }
    Certificate {
        duals,
        dual_objective,
        duality_gap: (primal - dual_objective).abs() / primal.abs().max(1.0),
        dual_infeasibility: infeasibility / c_scale,
        primal_residual: lp.primal_residual(x),
    }
}
