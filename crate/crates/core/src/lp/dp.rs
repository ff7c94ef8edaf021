use crate::scenario_tree::CommonNoiseTree;
use crate::state_chains::GridChain;

use super::{NodeField, RewardTables, StoppingRule};

/// Relative gap below which continuing and stopping count as equal.
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    #[default]
    Stop,
    Continue,
}

#[derive(Clone, Debug)]
pub struct DpSolution {
    /// `Σ_x m_0(x) v(0, x, root)`.
    pub value: f64,
    pub rule: StoppingRule,
    /// `values[t][node][x]`.
    pub values: NodeField,
}

/// Optimal stopping by backward induction on `(t, x, u)`.
///
/// `v(T) = g(T)` and `v(t) = max(f(t) + E[v(t+1) | x, u], g(t))`.
pub fn best_response_dp(
    tables: &RewardTables,
    chain: &GridChain,
    tree: &CommonNoiseTree,
    tie: TieBreak,
) -> DpSolution {
    let n = chain.len();
    let horizon = tree.horizon();
    let mut values: NodeField = Vec::with_capacity(horizon + 1);
    let mut stop: Vec<Vec<Vec<bool>>> = Vec::with_capacity(horizon + 1);
    values.push(vec![vec![tables.g[horizon]; n]; tree.nodes(horizon).len()]);
    stop.push(vec![vec![true; n]; tree.nodes(horizon).len()]);
    for t in (0..horizon).rev() {
        let later = values.last().expect("later level");
        let g = tables.g[t];
        let mut level_v = Vec::with_capacity(tree.nodes(t).len());
        let mut level_s = Vec::with_capacity(tree.nodes(t).len());
        for (i, node) in tree.nodes(t).iter().enumerate() {
            // E over the common noise first; the state chain acts afterwards
            let mut mixed = vec![0.0; n];
            for &(child, q) in &node.children {
                for (acc, v) in mixed.iter_mut().zip(&later[child]) {
                    *acc += q * v;
                }
            }
            let mut v = vec![0.0; n];
            let mut s = vec![false; n];
            for x in 0..n {
                let cont = tables.f[t][i][x]
                    + chain
                        .successors(x)
                        .iter()
                        .map(|&(y, p)| p * mixed[y])
                        .sum::<f64>();
                let tied = (cont - g).abs() <= TIE_TOL * cont.abs().max(g.abs()).max(1.0);
                s[x] = if tied {
                    tie == TieBreak::Stop
                } else {
                    g > cont
                };
                v[x] = if tied {
                    g.max(cont)
                } else if s[x] {
                    g
                } else {
                    cont
                };
            }
            level_v.push(v);
            level_s.push(s);
        }
        values.push(level_v);
        stop.push(level_s);
    }
    values.reverse();
    stop.reverse();
    let value = chain
        .initial
        .iter()
        .zip(&values[0][0])
        .map(|(m, v)| m * v)
        .sum();
    DpSolution {
        value,
        rule: StoppingRule { stop },
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::{evaluate_gamma, forward_occupation};
    use super::*;

    /// Every pure Markov rule on a tiny instance, scored through the forward
    /// pass and `Γ`.
    fn brute_force_best(tables: &RewardTables, chain: &GridChain, tree: &CommonNoiseTree) -> f64 {
        let n = chain.len();
        let free: Vec<(usize, usize, usize)> = (0..tree.horizon())
            .flat_map(|t| {
                (0..tree.nodes(t).len()).flat_map(move |i| (0..n).map(move |x| (t, i, x)))
            })
            .collect();
        assert!(free.len() <= 20);
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << free.len()) {
            let rule = StoppingRule::from_fn(tree, n, |t, i, x| {
                let k = free.iter().position(|&c| c == (t, i, x)).unwrap();
                mask >> k & 1 == 1
            });
            let occ = forward_occupation(&rule, chain, tree);
            best = best.max(evaluate_gamma(tables, &occ, tree));
        }
        best
    }

    #[test]
    fn matches_enumeration() {
        let mut rng = rng(13);
        for _ in 0..8 {
            let chain = three_state_chain(&mut rng);
            // 1 + 2 + 2 nodes before T, 3 states: 15 free decisions
            let tree = small_tree(3, 0.35);
            let tables = random_tables(&tree, 3, &mut rng);
            let dp = best_response_dp(&tables, &chain, &tree, TieBreak::Stop);
            let brute = brute_force_best(&tables, &chain, &tree);
            assert!(
                (dp.value - brute).abs() < 1e-12,
                "{} vs {}",
                dp.value,
                brute
            );
        }
    }

    #[test]
    fn rule_attains_value() {
        let mut rng = rng(17);
        let chain = three_state_chain(&mut rng);
        let tree = small_tree(5, 0.2);
        let tables = random_tables(&tree, 3, &mut rng);
        let dp = best_response_dp(&tables, &chain, &tree, TieBreak::Stop);
        let occ = forward_occupation(&dp.rule, &chain, &tree);
        assert!((evaluate_gamma(&tables, &occ, &tree) - dp.value).abs() < 1e-12);
    }

    #[test]
    fn tie_break_changes_rule_not_value() {
        let mut rng = rng(19);
        let chain = three_state_chain(&mut rng);
        let tree = small_tree(3, 0.5);
        let mut tables = random_tables(&tree, 3, &mut rng);
        // zero rewards everywhere: every decision is a tie
        for level in tables.f.iter_mut() {
            for node in level.iter_mut() {
                node.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        tables.g.iter_mut().for_each(|g| *g = 0.0);
        let a = best_response_dp(&tables, &chain, &tree, TieBreak::Stop);
        let b = best_response_dp(&tables, &chain, &tree, TieBreak::Continue);
        assert_eq!(a.value, b.value);
        assert!(a.rule.stop[0][0].iter().all(|&s| s));
        assert!(b.rule.stop[0][0].iter().all(|&s| !s));
    }

    #[test]
    fn positive_running_reward_never_stops_early() {
        let mut rng = rng(23);
        let chain = three_state_chain(&mut rng);
        let tree = small_tree(4, 0.5);
        let mut tables = random_tables(&tree, 3, &mut rng);
        for level in tables.f.iter_mut() {
            for node in level.iter_mut() {
                node.iter_mut().for_each(|v| *v = 1.0);
            }
        }
        tables.g.iter_mut().for_each(|g| *g = 0.0);
        let dp = best_response_dp(&tables, &chain, &tree, TieBreak::Stop);
        assert!((dp.value - 4.0).abs() < 1e-12);
        for t in 0..4 {
            assert!(dp.rule.stop[t].iter().flatten().all(|&s| !s));
        }
    }
}
