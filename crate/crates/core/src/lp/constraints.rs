use crate::error::{Error, Result};
use crate::scenario_tree::CommonNoiseTree;
use crate::state_chains::GridChain;

use super::{OccupationPair, RewardTables};

/// Default cap on the number of LP columns.
pub const DEFAULT_VAR_LIMIT: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    /// Active mass `m_t(u)(x)`.
    Active,
    /// Stopping mass `μ_t(u)(x)`.
    Stop,
}

/// Occupation-measure LP in equality form: maximize `c·v` subject to
/// `A v = b`, `v >= 0`.
///
/// There is one row per indicator test function `1_{(t, x, u)}`:
///
/// ```text
/// p_t(u) μ_t(u)(x) + p_t(u) m_t(u)(x)
///     - p_{t-1}(u⁻) π^U_t(u⁻; u) Σ_{x⁻} π^X(x⁻; x) m_{t-1}(u⁻)(x⁻)  =  [t = 0] m_0(x)
/// ```
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub num_vars: usize,
    pub num_rows: usize,
    /// `(row, column, coefficient)` entries of `A`.
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    pub objective: Vec<f64>,
    n: usize,
    horizon: usize,
    /// First column of `m_t(u)` / `μ_t(u)` and first row of `(t, u)`.
    m_col: Vec<Vec<usize>>,
    mu_col: Vec<Vec<usize>>,
    row: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
}

/// Builds the constraint rows for a population with state chain `chain`.
pub fn assemble_constraints(
    chain: &GridChain,
    tree: &CommonNoiseTree,
    var_limit: usize,
) -> Result<LpProblem> {
    let n = chain.len();
    let horizon = tree.horizon();
    let nodes: usize = tree.node_count();
    let active_nodes = nodes - tree.nodes(horizon).len();
    let num_vars = n * (nodes + active_nodes);
    if num_vars > var_limit {
        return Err(Error::ProblemTooLarge {
            vars: num_vars,
            limit: var_limit,
        });
    }
    let mut next_col = 0;
    let mut m_col = Vec::with_capacity(horizon);
    let mut mu_col = Vec::with_capacity(horizon + 1);
    let mut row = Vec::with_capacity(horizon + 1);
    let mut next_row = 0;
    for t in 0..=horizon {
        let count = tree.nodes(t).len();
        let mut mu = Vec::with_capacity(count);
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            mu.push(next_col);
            next_col += n;
            rows.push(next_row);
            next_row += n;
        }
        mu_col.push(mu);
        row.push(rows);
        if t < horizon {
            let mut m = Vec::with_capacity(count);
            for _ in 0..count {
                m.push(next_col);
                next_col += n;
            }
            m_col.push(m);
        }
    }
    debug_assert_eq!(next_col, num_vars);

    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; next_row];
    for t in 0..=horizon {
        for (i, node) in tree.nodes(t).iter().enumerate() {
            let p = node.prob;
            for x in 0..n {
                let r = row[t][i] + x;
                triplets.push((r, mu_col[t][i] + x, p));
                if t < horizon {
                    triplets.push((r, m_col[t][i] + x, p));
                }
            }
            if t == 0 {
                rhs[row[0][i]..row[0][i] + n].copy_from_slice(&chain.initial);
            }
            if t < horizon {
                // inflow into the children rows
                for &(child, q) in &node.children {
                    for x_prev in 0..n {
                        for &(x, px) in chain.successors(x_prev) {
                            triplets.push((
                                row[t + 1][child] + x,
                                m_col[t][i] + x_prev,
                                -p * q * px,
                            ));
                        }
                    }
                }
            }
        }
    }
    let weights = tree
        .levels
        .iter()
        .map(|l| l.iter().map(|n| n.prob).collect())
        .collect();
    Ok(LpProblem {
        num_vars,
        num_rows: next_row,
        triplets,
        rhs,
        objective: vec![0.0; num_vars],
        n,
        horizon,
        m_col,
        mu_col,
        row,
        weights,
    })
}

impl LpProblem {
    /// A bare equality-form problem with no occupation-measure layout; `pack`
    /// and `unpack` are not meaningful on it.
    pub fn from_parts(
        num_rows: usize,
        num_vars: usize,
        triplets: Vec<(usize, usize, f64)>,
        rhs: Vec<f64>,
        objective: Vec<f64>,
    ) -> Self {
        LpProblem {
            num_vars,
            num_rows,
            triplets,
            rhs,
            objective,
            n: 0,
            horizon: 0,
            m_col: Vec::new(),
            mu_col: Vec::new(),
            row: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn column(&self, kind: VarKind, t: usize, node: usize, x: usize) -> usize {
        match kind {
            VarKind::Active => self.m_col[t][node] + x,
            VarKind::Stop => self.mu_col[t][node] + x,
        }
    }

    pub fn row_of(&self, t: usize, node: usize, x: usize) -> usize {
        self.row[t][node] + x
    }

    /// Sets the objective to the coefficients of `Γ`: `p_t(u) f(t, x, u)` on
    /// active masses and `p_t(u) g(t)` on stopping masses.
    pub fn set_objective(&mut self, tables: &RewardTables) {
        for t in 0..=self.horizon {
            for (i, &p) in self.weights[t].iter().enumerate() {
                for x in 0..self.n {
                    self.objective[self.mu_col[t][i] + x] = p * tables.g[t];
                    if t < self.horizon {
                        self.objective[self.m_col[t][i] + x] = p * tables.f[t][i][x];
                    }
                }
            }
        }
    }

    /// Flattens an occupation pair into the LP column order.
    pub fn pack(&self, occ: &OccupationPair) -> Vec<f64> {
        let mut v = vec![0.0; self.num_vars];
        for t in 0..=self.horizon {
            for i in 0..self.mu_col[t].len() {
                let c = self.mu_col[t][i];
                v[c..c + self.n].copy_from_slice(&occ.mu[t][i]);
                if t < self.horizon {
                    let c = self.m_col[t][i];
                    v[c..c + self.n].copy_from_slice(&occ.m[t][i]);
                }
            }
        }
        v
    }

    pub fn unpack(&self, v: &[f64]) -> OccupationPair {
        let slice = |c: usize| v[c..c + self.n].to_vec();
        OccupationPair {
            m: self
                .m_col
                .iter()
                .map(|level| level.iter().map(|&c| slice(c)).collect())
                .collect(),
            mu: self
                .mu_col
                .iter()
                .map(|level| level.iter().map(|&c| slice(c)).collect())
                .collect(),
        }
    }

    /// `A v - b`, row by row.
    pub fn residuals(&self, v: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = self.rhs.iter().map(|b| -b).collect();
        for &(i, j, a) in &self.triplets {
            r[i] += a * v[j];
        }
        r
    }

    pub fn max_residual(&self, v: &[f64]) -> f64 {
        self.residuals(v).iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn objective_value(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::{forward_occupation, StoppingRule};
    use super::*;
    use crate::scenario_tree::{build_tree, ScenarioSpec};

    fn one_step_tree() -> CommonNoiseTree {
        let spec = ScenarioSpec {
            carbon_grid: vec![1.0],
            z0: 1.0,
            scenarios: vec!["only".into()],
            prior: vec![1.0],
            adjustment_dates: vec![],
            stay_prob: vec![vec![]],
            horizon: 1,
        };
        build_tree(&spec).unwrap()
    }

    #[test]
    fn two_state_one_step_shape() {
        let chain = GridChain::new(
            vec![0.0, 1.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![0.25, 0.75],
        )
        .unwrap();
        let tree = one_step_tree();
        let lp = assemble_constraints(&chain, &tree, DEFAULT_VAR_LIMIT).unwrap();
        assert_eq!(lp.num_rows, 4);
        assert_eq!(lp.num_vars, 6);
        // stop everything at t = 0
        let mut v = vec![0.0; 6];
        v[lp.column(VarKind::Stop, 0, 0, 0)] = 0.25;
        v[lp.column(VarKind::Stop, 0, 0, 1)] = 0.75;
        assert_eq!(lp.max_residual(&v), 0.0);
        // rhs only on t = 0 rows
        assert_eq!(lp.rhs, vec![0.25, 0.75, 0.0, 0.0]);
    }

    #[test]
    fn rows_sum_to_mass_identity() {
        // summing all rows: Σ p μ = Σ m_0 + Σ p m (π - 1)·1 = 1 for feasible points
        let mut rng = rng(7);
        let chain = three_state_chain(&mut rng);
        let tree = small_tree(3, 0.7);
        let lp = assemble_constraints(&chain, &tree, DEFAULT_VAR_LIMIT).unwrap();
        let rule = random_rule(&tree, 3, &mut rng);
        let occ = forward_occupation(&rule, &chain, &tree);
        let v = lp.pack(&occ);
        let total: f64 = lp.residuals(&v).iter().sum();
        assert!(total.abs() < 1e-12);
        assert!(occ.mass_defect(&tree) < 1e-12);
    }

    #[test]
    fn forward_rules_satisfy_rows() {
        let mut rng = rng(11);
        for _ in 0..20 {
            let chain = three_state_chain(&mut rng);
            let tree = small_tree(3, 0.6);
            let lp = assemble_constraints(&chain, &tree, DEFAULT_VAR_LIMIT).unwrap();
            let rule = random_rule(&tree, 3, &mut rng);
            let occ = forward_occupation(&rule, &chain, &tree);
            assert!(lp.max_residual(&lp.pack(&occ)) <= 1e-12);
        }
    }

    #[test]
    fn convex_combinations_stay_feasible() {
        let mut rng = rng(3);
        let chain = three_state_chain(&mut rng);
        let tree = small_tree(4, 0.8);
        let lp = assemble_constraints(&chain, &tree, DEFAULT_VAR_LIMIT).unwrap();
        let a = forward_occupation(&random_rule(&tree, 3, &mut rng), &chain, &tree);
        let b = forward_occupation(&StoppingRule::never(&tree, 3), &chain, &tree);
        let mix = a.combine(0.37, &b, 0.63);
        assert!(lp.max_residual(&lp.pack(&mix)) <= 1e-12);
    }

    #[test]
    fn pack_unpack_round_trip() {
        let mut rng = rng(5);
        let chain = three_state_chain(&mut rng);
        let tree = small_tree(3, 0.5);
        let lp = assemble_constraints(&chain, &tree, DEFAULT_VAR_LIMIT).unwrap();
        let occ = forward_occupation(&random_rule(&tree, 3, &mut rng), &chain, &tree);
        assert_eq!(lp.unpack(&lp.pack(&occ)), occ);
    }

    #[test]
    fn variable_limit_guard() {
        let mut rng = rng(1);
        let chain = three_state_chain(&mut rng);
        let tree = small_tree(3, 0.5);
        assert!(matches!(
            assemble_constraints(&chain, &tree, 10),
            Err(Error::ProblemTooLarge { .. })
        ));
    }
}
