use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario_tree::CommonNoiseTree;
use crate::state_chains::GridChain;

use super::{
    assemble_constraints, DenseSimplex, LpProblem, OccupationPair, RewardTables, StaircaseSimplex,
};

/// Largest row residual accepted from a solver before the vertex is rejected.
pub const RESIDUAL_TOL: f64 = 1e-7;

/// Tableaus up to this many entries go to the dense solver under `Auto`.
const AUTO_DENSE_ENTRIES: usize = 4_000_000;

/// Primal solution of `max c·v, A v = b, v >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Anything that can maximize an equality-form problem with nonnegative
/// variables.
pub trait LpSolver {
    fn solve(&self, lp: &LpProblem) -> Result<LpSolution>;

    fn name(&self) -> &'static str;
}

/// Sparse revised simplex from the `microlp` crate.
#[derive(Clone, Copy, Debug, Default)]
pub struct SparseSimplex;

impl LpSolver for SparseSimplex {
    fn solve(&self, lp: &LpProblem) -> Result<LpSolution> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem};

        let mut problem = Problem::new(OptimizationDirection::Maximize);
        let vars: Vec<_> = lp
            .objective
            .iter()
            .map(|&c| problem.add_var(c, (0.0, f64::INFINITY)))
            .collect();
        let mut rows: Vec<Vec<(microlp::Variable, f64)>> = vec![Vec::new(); lp.num_rows];
        for &(i, j, a) in &lp.triplets {
            rows[i].push((vars[j], a));
        }
        for (row, &b) in rows.iter().zip(&lp.rhs) {
            problem.add_constraint(row.as_slice(), ComparisonOp::Eq, b);
        }
        let solution = match problem.solve() {
            Ok(outcome) => outcome
                .into_solution()
                .map_err(|_| Error::Solver("sparse simplex interrupted".into()))?,
            Err(microlp::Error::Infeasible) => return Err(Error::Infeasible),
            Err(microlp::Error::Unbounded) => return Err(Error::Unbounded),
            Err(e) => return Err(Error::Solver(e.to_string())),
        };
        let x: Vec<f64> = vars.iter().map(|&v| solution.var_value(v)).collect();
        let objective = lp.objective_value(&x);
        Ok(LpSolution { x, objective })
    }

    fn name(&self) -> &'static str {
        "sparse"
    }
}

struct StaircaseOr(Box<dyn LpSolver>);

impl LpSolver for StaircaseOr {
    fn solve(&self, lp: &LpProblem) -> Result<LpSolution> {
        match StaircaseSimplex::default().solve(lp) {
            Err(Error::Solver(_)) => self.0.solve(lp),
            other => other,
        }
    }

    fn name(&self) -> &'static str {
        "staircase"
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverBackend {
    /// Staircase simplex; on other shapes the dense tableau for small
    /// problems and the sparse simplex otherwise.
    #[default]
    Auto,
    Dense,
    Sparse,
    Staircase,
}

impl SolverBackend {
    pub fn solver_for(self, lp: &LpProblem) -> Box<dyn LpSolver> {
        match self {
            SolverBackend::Dense => Box::new(DenseSimplex::default()),
            SolverBackend::Sparse => Box::new(SparseSimplex),
            SolverBackend::Staircase => Box::new(StaircaseSimplex::default()),
            SolverBackend::Auto => {
                let fallback: Box<dyn LpSolver> =
                    if lp.num_rows.saturating_mul(lp.num_vars) <= AUTO_DENSE_ENTRIES {
                        Box::new(DenseSimplex::default())
                    } else {
                        Box::new(SparseSimplex)
                    };
                Box::new(StaircaseOr(fallback))
            }
        }
    }
}

/// Optimal value and vertex of the occupation-measure LP.
#[derive(Clone, Debug)]
pub struct LpBestResponse {
    pub value: f64,
    pub occupation: OccupationPair,
    pub max_residual: f64,
}

/// Best response through the linear program `max Γ over R`.
pub fn best_response_lp(
    tables: &RewardTables,
    chain: &GridChain,
    tree: &CommonNoiseTree,
    solver: &dyn LpSolver,
    var_limit: usize,
) -> Result<LpBestResponse> {
    let mut lp = assemble_constraints(chain, tree, var_limit)?;
    lp.set_objective(tables);
    let solution = solver.solve(&lp).map_err(|e| match e {
        // the feasible set always contains the never-stop occupation
        Error::Infeasible => Error::Solver("occupation LP reported infeasible".into()),
        other => other,
    })?;
    let max_residual = lp.max_residual(&solution.x);
    if max_residual > RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "{} solver vertex violates constraints by {max_residual:e}",
            solver.name()
        )));
    }
    let mut occupation = lp.unpack(&solution.x);
    occupation.clamp()?;
    Ok(LpBestResponse {
        value: solution.objective,
        occupation,
        max_residual,
    })
}
