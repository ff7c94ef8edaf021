use crate::scenario_tree::CommonNoiseTree;
use crate::state_chains::GridChain;

use super::{OccupationPair, StoppingRule};

/// Occupation pair generated by a pure stopping rule.
///
/// The conditional pre-decision mass at the root is the chain's initial law;
/// at each node it is split into stopping and continuing mass by the rule,
/// and the continuing mass is pushed through `π^X` into every child node
/// (the state chain is independent of the common noise).
pub fn forward_occupation(
    rule: &StoppingRule,
    chain: &GridChain,
    tree: &CommonNoiseTree,
) -> OccupationPair {
    let n = chain.len();
    let horizon = tree.horizon();
    let mut occ = OccupationPair::zeros(tree, n);
    let mut pre: Vec<Vec<f64>> = vec![chain.initial.clone()];
    for t in 0..=horizon {
        let mut next = vec![
            Vec::new();
            if t < horizon {
                tree.nodes(t + 1).len()
            } else {
                0
            }
        ];
        for (i, node) in tree.nodes(t).iter().enumerate() {
            let mass = &pre[i];
            let stop = &rule.stop[t][i];
            let mut active = vec![0.0; n];
            for x in 0..n {
                if stop[x] {
                    occ.mu[t][i][x] = mass[x];
                } else {
                    active[x] = mass[x];
                }
            }
            if t < horizon {
                let pushed = chain.step(&active);
                for &(child, _) in &node.children {
                    next[child] = pushed.clone();
                }
                occ.m[t][i] = active;
            }
        }
        pre = next;
    }
    occ
}
