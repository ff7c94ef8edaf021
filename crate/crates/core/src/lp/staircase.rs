use crate::error::{Error, Result};

use super::{LpProblem, LpSolution, LpSolver};

/// Block-pivoting primal simplex for staircase problems.
///
/// A column's own row is the first row it touches. The solver requires every
/// column to be positive in its own row and nonpositive below it, every row
/// to own at least one column, and `b >= 0`. A basis that picks one owned
/// column per row is then lower triangular with a nonnegative inverse, so
/// every such basis is primal feasible. Each pass swaps in, row by row, the
/// owned column with the largest positive reduced cost; optimality is
/// certified when no reduced cost is positive.
#[derive(Clone, Copy, Debug)]
pub struct StaircaseSimplex {
    pub max_passes: usize,
}

impl Default for StaircaseSimplex {
    fn default() -> Self {
        StaircaseSimplex {
            max_passes: 100_000,
        }
    }
}

struct Staircase {
    /// Entries of each column as `(row, coef)`, own row first.
    cols: Vec<Vec<(usize, f64)>>,
    /// Entries of each row as `(col, coef)`.
    rows: Vec<Vec<(usize, f64)>>,
    owned: Vec<Vec<usize>>,
}

impl Staircase {
    /// Checks the sign pattern and returns `None` when the problem is not a
    /// staircase.
    fn detect(lp: &LpProblem) -> Option<Staircase> {
        if lp.rhs.iter().any(|&b| !(b >= 0.0)) {
            return None;
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_vars];
        for &(i, j, a) in &lp.triplets {
            cols[j].push((i, a));
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_rows];
        let mut owned = vec![Vec::new(); lp.num_rows];
        for (j, col) in cols.iter_mut().enumerate() {
            col.sort_by_key(|e| e.0);
            col.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            col.retain(|e| e.1 != 0.0);
            let Some(&(own, diag)) = col.first() else {
                continue;
            };
            if !(diag > 0.0) || col[1..].iter().any(|e| e.1 > 0.0) {
                return None;
            }
            owned[own].push(j);
            for &(i, a) in col.iter() {
                rows[i].push((j, a));
            }
        }
        if owned.iter().any(Vec::is_empty) {
            return None;
        }
        Some(Staircase { cols, rows, owned })
    }

    fn primal(&self, basis: &[usize], rhs: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
        for (r, &b) in basis.iter().enumerate() {
            let mut s = rhs[r];
            let mut diag = 0.0;
            for &(j, a) in &self.rows[r] {
                if j == b {
                    diag = a;
                } else {
                    s -= a * x[j];
                }
            }
            x[b] = (s / diag).max(0.0);
        }
    }

    fn dual(&self, basis: &[usize], objective: &[f64], y: &mut [f64]) {
        for r in (0..basis.len()).rev() {
            let col = &self.cols[basis[r]];
            let below: f64 = col[1..].iter().map(|&(s, a)| a * y[s]).sum();
            y[r] = (objective[basis[r]] - below) / col[0].1;
        }
    }

    fn reduced_cost(&self, j: usize, objective: &[f64], y: &[f64]) -> (f64, f64) {
        let mut dot = 0.0;
        let mut scale = objective[j].abs();
        for &(i, a) in &self.cols[j] {
            dot += a * y[i];
            scale += (a * y[i]).abs();
        }
        (objective[j] - dot, scale)
    }
}

impl LpSolver for StaircaseSimplex {
    fn solve(&self, lp: &LpProblem) -> Result<LpSolution> {
        let stairs = Staircase::detect(lp)
            .ok_or_else(|| Error::Solver("problem is not a staircase".into()))?;
        for (j, col) in stairs.cols.iter().enumerate() {
            if col.is_empty() && lp.objective[j] > 0.0 {
                return Err(Error::Unbounded);
            }
        }
        let mut basis: Vec<usize> = stairs
            .owned
            .iter()
            .map(|own| *own.iter().min_by_key(|&&j| stairs.cols[j].len()).unwrap())
            .collect();
        let mut x = vec![0.0; lp.num_vars];
        let mut y = vec![0.0; lp.num_rows];
        for _ in 0..self.max_passes {
            stairs.dual(&basis, &lp.objective, &mut y);
            let mut swapped = false;
            for (r, own) in stairs.owned.iter().enumerate() {
                let mut best = (basis[r], 0.0);
                for &j in own {
                    if j == basis[r] {
                        continue;
                    }
                    let (rc, scale) = stairs.reduced_cost(j, &lp.objective, &y);
                    if rc > 1e-12 * scale.max(1e-300) && rc > best.1 {
                        best = (j, rc);
                    }
                }
                if best.0 != basis[r] {
                    basis[r] = best.0;
                    swapped = true;
                }
            }
            if !swapped {
                for (j, col) in stairs.cols.iter().enumerate() {
                    if col.is_empty() {
                        continue;
                    }
                    let (rc, scale) = stairs.reduced_cost(j, &lp.objective, &y);
                    if rc > 1e-9 * scale.max(1.0) {
                        return Err(Error::Solver(format!(
                            "staircase simplex stalled with reduced cost {rc:e}"
                        )));
                    }
                }
                stairs.primal(&basis, &lp.rhs, &mut x);
                let objective = lp.objective_value(&x);
                let dual_bound: f64 = lp.rhs.iter().zip(&y).map(|(b, y)| b * y).sum();
                if (objective - dual_bound).abs() > 1e-9 * objective.abs().max(1.0) {
                    return Err(Error::Numerical(format!(
                        "staircase duality gap {:e}",
                        objective - dual_bound
                    )));
                }
                return Ok(LpSolution { x, objective });
            }
        }
        Err(Error::Solver(format!(
            "staircase simplex did not converge in {} passes",
            self.max_passes
        )))
    }

    fn name(&self) -> &'static str {
        "staircase"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::testing::*;
    use crate::lp::{assemble_constraints, DenseSimplex, DEFAULT_VAR_LIMIT};

    #[test]
    fn matches_dense_simplex() {
        let mut rng = rng(7);
        for _ in 0..20 {
            let chain = three_state_chain(&mut rng);
            let tree = small_tree(5, 0.4);
            let tables = random_tables(&tree, 3, &mut rng);
            let mut lp = assemble_constraints(&chain, &tree, DEFAULT_VAR_LIMIT).unwrap();
            lp.set_objective(&tables);
            let dense = DenseSimplex::default().solve(&lp).unwrap();
            let stairs = StaircaseSimplex::default().solve(&lp).unwrap();
            assert!((dense.objective - stairs.objective).abs() < 1e-10);
            assert!(lp.max_residual(&stairs.x) < 1e-12);
            assert!(stairs.x.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn rejects_other_shapes() {
        let lp = LpProblem::from_parts(
            1,
            2,
            vec![(0, 0, 1.0), (0, 1, -1.0)],
            vec![1.0],
            vec![1.0, 0.0],
        );
        assert!(matches!(
            StaircaseSimplex::default().solve(&lp),
            Err(Error::Solver(_))
        ));
    }

    #[test]
    fn solves_a_two_row_staircase() {
        // x0 + x1 = 1, -x1 + x2 + x3 = 0: continuing pays 1 then 2
        let lp = LpProblem::from_parts(
            2,
            4,
            vec![
                (0, 0, 1.0),
                (0, 1, 1.0),
                (1, 1, -1.0),
                (1, 2, 1.0),
                (1, 3, 1.0),
            ],
            vec![1.0, 0.0],
            vec![0.5, 1.0, 0.0, 2.0],
        );
        let s = StaircaseSimplex::default().solve(&lp).unwrap();
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert_eq!(s.x, vec![0.0, 1.0, 0.0, 1.0]);
    }
}
