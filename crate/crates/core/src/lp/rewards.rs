use serde::{Deserialize, Serialize};

use crate::market::PricePair;
use crate::scenario_tree::CommonNoiseTree;

use super::{NodeField, OccupationPair};

/// Running and stopping rewards of one population against a fixed profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardTables {
    /// `f[t][node][x]` for `t < T`.
    pub f: NodeField,
    /// `g[t]` for `t <= T`.
    pub g: Vec<f64>,
    /// Clearing prices behind `f`, `prices[t][node]` for `t < T`; empty for
    /// synthetic tables.
    pub prices: Vec<Vec<PricePair>>,
}

/// `Γ(μ, m) = Σ_t Σ_u p_t(u) ⟨f_t(·, u), m_t(u)⟩ + Σ_t Σ_u p_t(u) g(t) |μ_t(u)|`.
pub fn evaluate_gamma(tables: &RewardTables, occ: &OccupationPair, tree: &CommonNoiseTree) -> f64 {
    let running: f64 = occ
        .m
        .iter()
        .enumerate()
        .map(|(t, level)| {
            level
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let dot: f64 = tables.f[t][i].iter().zip(m).map(|(f, w)| f * w).sum();
                    tree.node(t, i).prob * dot
                })
                .sum::<f64>()
        })
        .sum();
    let stopping: f64 = occ
        .mu
        .iter()
        .enumerate()
        .map(|(t, level)| {
            level
                .iter()
                .enumerate()
                .map(|(i, mu)| tree.node(t, i).prob * tables.g[t] * mu.iter().sum::<f64>())
                .sum::<f64>()
        })
        .sum();
    running + stopping
}
