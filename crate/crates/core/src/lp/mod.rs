//! Occupation measures, the linear constraints they satisfy, and the two
//! best-response routes: linear programming over occupation measures and
//! backward dynamic programming on the product state `(x, u)`.

mod constraints;
mod dp;
mod forward;
pub mod interchange;
mod rewards;
mod simplex;
mod solver;
mod staircase;

use serde::{Deserialize, Serialize};

pub use constraints::{assemble_constraints, LpProblem, VarKind, DEFAULT_VAR_LIMIT};
pub use dp::{best_response_dp, DpSolution, TieBreak};
pub use forward::forward_occupation;
pub use rewards::{evaluate_gamma, RewardTables};
pub use simplex::DenseSimplex;
pub use solver::{
    best_response_lp, LpBestResponse, LpSolution, LpSolver, SolverBackend, SparseSimplex,
    RESIDUAL_TOL,
};
pub use staircase::StaircaseSimplex;

use crate::error::{Error, Result};
use crate::scenario_tree::CommonNoiseTree;

/// Values indexed by time, tree node and grid point: `field[t][node][x]`.
pub type NodeField = Vec<Vec<Vec<f64>>>;

/// Masses above this negativity are clamped to zero; below it they are an error.
pub const CLAMP_TOL: f64 = 1e-12;

fn zero_field(tree: &CommonNoiseTree, times: usize, n: usize) -> NodeField {
    (0..times)
        .map(|t| vec![vec![0.0; n]; tree.nodes(t).len()])
        .collect()
}

/// Occupation pair of one population.
///
/// `m[t][u]` (t < T) is the conditional sub-probability of agents still
/// active at `t` after the decision, and `mu[t][u]` (t <= T) the one of
/// agents stopping at `t`, both given the common-noise history `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationPair {
    pub m: NodeField,
    pub mu: NodeField,
}

impl OccupationPair {
    pub fn zeros(tree: &CommonNoiseTree, n: usize) -> Self {
        let horizon = tree.horizon();
        OccupationPair {
            m: zero_field(tree, horizon, n),
            mu: zero_field(tree, horizon + 1, n),
        }
    }

    pub fn horizon(&self) -> usize {
        self.mu.len() - 1
    }

    /// Mass still active at `(t, node)`; at `t = T` this is the mass that
    /// never stopped earlier, `|μ_T(u)|`.
    pub fn active_mass(&self, t: usize, node: usize) -> f64 {
        if t < self.m.len() {
            self.m[t][node].iter().sum()
        } else {
            self.mu[t][node].iter().sum()
        }
    }

    /// `a · self + b · other`, entrywise.
    pub fn combine(&self, a: f64, other: &OccupationPair, b: f64) -> OccupationPair {
        let mix = |x: &NodeField, y: &NodeField| -> NodeField {
            x.iter()
                .zip(y)
                .map(|(xt, yt)| {
                    xt.iter()
                        .zip(yt)
                        .map(|(xu, yu)| xu.iter().zip(yu).map(|(p, q)| a * p + b * q).collect())
                        .collect()
                })
                .collect()
        };
        OccupationPair {
            m: mix(&self.m, &other.m),
            mu: mix(&self.mu, &other.mu),
        }
    }

    /// Clamps entries in `[-CLAMP_TOL, 0)` to zero; errors on anything more negative.
    pub fn clamp(&mut self) -> Result<()> {
        for field in [&mut self.m, &mut self.mu] {
            for v in field.iter_mut().flatten().flatten() {
                if *v < 0.0 {
                    if *v < -CLAMP_TOL {
                        return Err(Error::Numerical(format!("negative occupation mass {v}")));
                    }
                    *v = 0.0;
                }
            }
        }
        Ok(())
    }

    /// `|Σ_t Σ_u p_t(u) |μ_t(u)| - 1|`.
    pub fn mass_defect(&self, tree: &CommonNoiseTree) -> f64 {
        let total: f64 = self
            .mu
            .iter()
            .enumerate()
            .map(|(t, level)| {
                level
                    .iter()
                    .enumerate()
                    .map(|(i, v)| tree.node(t, i).prob * v.iter().sum::<f64>())
                    .sum::<f64>()
            })
            .sum();
        (total - 1.0).abs()
    }

    /// Largest violation over nodes of `|m_t(u)| + Σ_{s<=t} |μ_s(anc_s(u))| = 1`
    /// (with `m_T := 0`).
    pub fn flow_defect(&self, tree: &CommonNoiseTree) -> f64 {
        let horizon = tree.horizon();
        // stopped[t][i]: mass stopped along the history up to and including t
        let mut stopped: Vec<Vec<f64>> = Vec::with_capacity(horizon + 1);
        let mut worst: f64 = 0.0;
        for t in 0..=horizon {
            let level: Vec<f64> = (0..tree.nodes(t).len())
                .map(|i| {
                    let before = match tree.node(t, i).parent {
                        Some(p) => stopped[t - 1][p],
                        None => 0.0,
                    };
                    before + self.mu[t][i].iter().sum::<f64>()
                })
                .collect();
            for (i, s) in level.iter().enumerate() {
                let active = if t < horizon {
                    self.m[t][i].iter().sum::<f64>()
                } else {
                    0.0
                };
                worst = worst.max((active + s - 1.0).abs());
            }
            stopped.push(level);
        }
        worst
    }
}

/// The two populations' occupation pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldProfile {
    pub conventional: OccupationPair,
    pub renewable: OccupationPair,
}

impl MeanFieldProfile {
    pub fn get(&self, pop: Population) -> &OccupationPair {
        match pop {
            Population::Conventional => &self.conventional,
            Population::Renewable => &self.renewable,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Population {
    /// Incumbent plants choosing when to exit.
    Conventional,
    /// Potential projects choosing when to enter (entry is the stopping time).
    Renewable,
}

impl Population {
    pub const ALL: [Population; 2] = [Population::Conventional, Population::Renewable];
}

/// Pure Markovian stopping rule on `(t, u, x)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingRule {
    /// `stop[t][node][x]`; every entry at `t = T` is `true`.
    pub stop: Vec<Vec<Vec<bool>>>,
}

impl StoppingRule {
    fn filled(tree: &CommonNoiseTree, n: usize, value: impl Fn(usize) -> bool) -> Self {
        let horizon = tree.horizon();
        StoppingRule {
            stop: (0..=horizon)
                .map(|t| vec![vec![t == horizon || value(t); n]; tree.nodes(t).len()])
                .collect(),
        }
    }

    /// Never stop before the horizon.
    pub fn never(tree: &CommonNoiseTree, n: usize) -> Self {
        Self::filled(tree, n, |_| false)
    }

    /// Stop everything at `t = 0`.
    pub fn immediately(tree: &CommonNoiseTree, n: usize) -> Self {
        Self::filled(tree, n, |t| t == 0)
    }

    /// Build from an arbitrary predicate; the horizon always stops.
    pub fn from_fn(
        tree: &CommonNoiseTree,
        n: usize,
        mut f: impl FnMut(usize, usize, usize) -> bool,
    ) -> Self {
        let horizon = tree.horizon();
        StoppingRule {
            stop: (0..=horizon)
                .map(|t| {
                    (0..tree.nodes(t).len())
                        .map(|i| (0..n).map(|x| t == horizon || f(t, i, x)).collect())
                        .collect()
                })
                .collect(),
        }
    }
}

#[cfg(test)]
pub(crate) mod testing {
    //! Small random instances shared by the LP tests.

    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::scenario_tree::{build_tree, ScenarioSpec};
    use crate::state_chains::GridChain;

    pub fn three_state_chain(rng: &mut ChaCha8Rng) -> GridChain {
        let mut rows = Vec::new();
        for _ in 0..3 {
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            rows.push(w.iter().map(|v| v / s).collect::<Vec<_>>());
        }
        // exact row sums
        for row in rows.iter_mut() {
            let tail: f64 = row[1..].iter().sum();
            row[0] = 1.0 - tail;
        }
        let init: Vec<f64> = {
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            let mut v: Vec<f64> = w.iter().map(|x| x / s).collect();
            v[0] = 1.0 - v[1] - v[2];
            v
        };
        GridChain::new(vec![0.0, 1.0, 2.0], rows, init).unwrap()
    }

    /// Two-scenario tree branching once at `t = 1` (at most 2 nodes per time).
    pub fn small_tree(horizon: usize, stay: f64) -> CommonNoiseTree {
        let spec = ScenarioSpec {
            carbon_grid: vec![1.0, 2.0],
            z0: 1.0,
            scenarios: vec!["lo".into(), "hi".into()],
            prior: vec![0.5, 0.5],
            adjustment_dates: vec![1],
            stay_prob: vec![vec![stay], vec![1.0 - stay]],
            horizon,
        };
        build_tree(&spec).unwrap()
    }

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_tables(tree: &CommonNoiseTree, n: usize, rng: &mut ChaCha8Rng) -> RewardTables {
        let horizon = tree.horizon();
        let f = (0..horizon)
            .map(|t| {
                (0..tree.nodes(t).len())
                    .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        let g = (0..=horizon).map(|_| rng.gen_range(-1.0..1.0)).collect();
        RewardTables {
            f,
            g,
            prices: Vec::new(),
        }
    }

    pub fn random_rule(tree: &CommonNoiseTree, n: usize, rng: &mut ChaCha8Rng) -> StoppingRule {
        StoppingRule::from_fn(tree, n, |_, _, _| rng.gen_bool(0.3))
    }
}
