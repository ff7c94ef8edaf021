use crate::error::{Error, Result};

use super::solver::{LpSolution, LpSolver};
use super::LpProblem;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

/// Dense two-phase tableau simplex for `max c·v, A v = b, v >= 0`.
///
/// Rows whose right-hand side is negative are negated first. A row that owns
/// a singleton column with a positive coefficient starts with that column
/// basic; every other row gets an artificial column. Pricing is Dantzig's
/// rule, switching to Bland's rule after a run of degenerate pivots.
#[derive(Clone, Debug)]
pub struct DenseSimplex {
    /// Refuse tableaus with more entries than this.
    pub max_entries: usize,
    /// Pivot budget as a multiple of `rows + columns`.
    pub iteration_factor: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex {
            max_entries: 40_000_000,
            iteration_factor: 50,
        }
    }
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.a[i][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = 1.0 / self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v *= inv;
        }
        self.a[r][c] = 1.0;
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let factor = row[c];
            if factor != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost·v` over columns with `allowed[j]`, starting from the
    /// current basic feasible solution.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool], budget: usize) -> Result<()> {
        let m = self.a.len();
        let mut degenerate_run = 0usize;
        for _ in 0..budget {
            // reduced costs d_j = c_j - c_B B^-1 A_j
            let mut best: Option<(usize, f64)> = None;
            let bland = degenerate_run > 50;
            for j in 0..self.cols {
                if !allowed[j] {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..m {
                    let a = self.a[i][j];
                    if a != 0.0 {
                        d -= cost[self.basis[i]] * a;
                    }
                }
                if d > COST_TOL {
                    if bland {
                        best = Some((j, d));
                        break;
                    }
                    if best.is_none_or(|(_, b)| d > b) {
                        best = Some((j, d));
                    }
                }
            }
            let Some((enter, _)) = best else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.a[i][enter];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((l, r)) => {
                            ratio < r - 1e-15
                                || (ratio <= r + 1e-15 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, ratio)) = leave else {
                return Err(Error::Unbounded);
            };
            if ratio <= 1e-15 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, enter);
        }
        Err(Error::Solver(format!("simplex exceeded {budget} pivots")))
    }
}

impl DenseSimplex {
    pub fn solve_problem(&self, lp: &LpProblem) -> Result<LpSolution> {
        let rows = lp.num_rows;
        let n = lp.num_vars;
        let mut dense = vec![vec![0.0; n]; rows];
        for &(i, j, a) in &lp.triplets {
            dense[i][j] += a;
        }
        let mut rhs = lp.rhs.clone();
        for (row, b) in dense.iter_mut().zip(rhs.iter_mut()) {
            if *b < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
                *b = -*b;
            }
        }
        // singleton columns with a positive coefficient
        let mut owner: Vec<Option<(usize, f64)>> = vec![None; n];
        let mut count = vec![0usize; n];
        for (i, row) in dense.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    count[j] += 1;
                    owner[j] = Some((i, a));
                }
            }
        }
        let mut start: Vec<Option<usize>> = vec![None; rows];
        for j in 0..n {
            if let (1, Some((i, a))) = (count[j], owner[j]) {
                if a > 0.0 && start[i].is_none() {
                    start[i] = Some(j);
                }
            }
        }
        let artificials: Vec<usize> = (0..rows).filter(|&i| start[i].is_none()).collect();
        let cols = n + artificials.len();
        if rows.saturating_mul(cols + 1) > self.max_entries {
            return Err(Error::ProblemTooLarge {
                vars: n,
                limit: self.max_entries / rows.max(1),
            });
        }
        let mut a = Vec::with_capacity(rows);
        let mut basis = vec![0; rows];
        for (i, row) in dense.into_iter().enumerate() {
            let mut full = row;
            full.resize(cols + 1, 0.0);
            full[cols] = rhs[i];
            a.push(full);
        }
        for (k, &i) in artificials.iter().enumerate() {
            a[i][n + k] = 1.0;
            basis[i] = n + k;
        }
        for i in 0..rows {
            if let Some(j) = start[i] {
                let inv = 1.0 / a[i][j];
                a[i].iter_mut().for_each(|v| *v *= inv);
                a[i][j] = 1.0;
                basis[i] = j;
            }
        }
        let mut tab = Tableau { a, basis, cols };
        let budget = self.iteration_factor * (rows + cols);

        if !artificials.is_empty() {
            let mut cost = vec![0.0; cols];
            cost[n..].iter_mut().for_each(|c| *c = -1.0);
            let allowed = vec![true; cols];
            tab.optimize(&cost, &allowed, budget)?;
            let infeasibility: f64 = (0..rows)
                .filter(|&i| tab.basis[i] >= n)
                .map(|i| tab.rhs(i))
                .sum();
            if infeasibility > FEAS_TOL * (1.0 + rhs.iter().map(|b| b.abs()).sum::<f64>()) {
                return Err(Error::Infeasible);
            }
            // drive zero-level artificials out of the basis where possible
            for i in 0..rows {
                if tab.basis[i] >= n {
                    if let Some(j) = (0..n).find(|&j| tab.a[i][j].abs() > PIVOT_TOL) {
                        tab.pivot(i, j);
                    }
                }
            }
        }

        let mut cost = lp.objective.clone();
        cost.resize(cols, 0.0);
        let allowed: Vec<bool> = (0..cols).map(|j| j < n).collect();
        tab.optimize(&cost, &allowed, budget)?;

        let mut x = vec![0.0; n];
        for i in 0..rows {
            if tab.basis[i] < n {
                x[tab.basis[i]] = tab.rhs(i);
            }
        }
        let objective = lp.objective_value(&x);
        Ok(LpSolution { x, objective })
    }
}

impl LpSolver for DenseSimplex {
    fn solve(&self, lp: &LpProblem) -> Result<LpSolution> {
        self.solve_problem(lp)
    }

    fn name(&self) -> &'static str {
        "dense"
    }
}
