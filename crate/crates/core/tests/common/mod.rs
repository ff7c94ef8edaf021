#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lpfp_core::config::RunConfig;
use lpfp_core::lp::{RewardTables, StoppingRule};
use lpfp_core::scenario_tree::{build_tree, CommonNoiseTree, ScenarioSpec};
use lpfp_core::state_chains::GridChain;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn simplex_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut v: Vec<f64> = w.iter().map(|x| x / s).collect();
    let tail: f64 = v[1..].iter().sum();
    v[0] = 1.0 - tail;
    v
}

pub fn random_chain(rng: &mut ChaCha8Rng, n: usize) -> GridChain {
    let rows = (0..n).map(|_| simplex_point(rng, n)).collect();
    let init = simplex_point(rng, n);
    GridChain::new((0..n).map(|i| i as f64).collect(), rows, init).unwrap()
}

/// Two-scenario tree on a two-level grid with one adjustment date.
pub fn branching_tree(horizon: usize, date: usize, stay: f64) -> CommonNoiseTree {
    build_tree(&ScenarioSpec {
        carbon_grid: vec![1.0, 2.0],
        z0: 1.0,
        scenarios: vec!["lo".into(), "hi".into()],
        prior: vec![0.5, 0.5],
        adjustment_dates: vec![date],
        stay_prob: vec![vec![stay], vec![1.0 - stay]],
        horizon,
    })
    .unwrap()
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
    let p = rng.gen_range(0.05..0.6);
    StoppingRule::from_fn(tree, n, |_, _, _| rng.gen_bool(p))
}

/// Expected reward of a pure rule by backward recursion over (node, state),
/// without occupation measures.
pub fn rule_value(
    rule: &StoppingRule,
    tables: &RewardTables,
    chain: &GridChain,
    tree: &CommonNoiseTree,
) -> f64 {
    let horizon = tree.horizon();
    let n = chain.len();
    let mut next: Vec<Vec<f64>> = vec![vec![tables.g[horizon]; n]; tree.nodes(horizon).len()];
    for t in (0..horizon).rev() {
        next = (0..tree.nodes(t).len())
            .map(|i| {
                (0..n)
                    .map(|x| {
                        if rule.stop[t][i][x] {
                            return tables.g[t];
                        }
                        let cont: f64 = tree
                            .node(t, i)
                            .children
                            .iter()
                            .map(|&(c, pc)| {
                                pc * (0..n)
                                    .map(|y| chain.transition[x][y] * next[c][y])
                                    .sum::<f64>()
                            })
                            .sum();
                        tables.f[t][i][x] + cont
                    })
                    .collect()
            })
            .collect();
    }
    chain.initial.iter().zip(&next[0]).map(|(p, v)| p * v).sum()
}

/// Best value over every pure Markovian stopping rule.
pub fn enumerate_best(tables: &RewardTables, chain: &GridChain, tree: &CommonNoiseTree) -> f64 {
    let n = chain.len();
    let horizon = tree.horizon();
    let slots: Vec<(usize, usize, usize)> = (0..horizon)
        .flat_map(|t| (0..tree.nodes(t).len()).flat_map(move |i| (0..n).map(move |x| (t, i, x))))
        .collect();
    assert!(slots.len() <= 20, "too many decision points to enumerate");
    let mut rule = StoppingRule::never(tree, n);
    let mut best = f64::NEG_INFINITY;
    for code in 0u32..(1 << slots.len()) {
        for (k, &(t, i, x)) in slots.iter().enumerate() {
            rule.stop[t][i][x] = code >> k & 1 == 1;
        }
        best = best.max(rule_value(&rule, tables, chain, tree));
    }
    best
}

/// Setting 2 shortened to `years` with adjustment dates every `every` steps.
pub fn short_setting2(years: usize, every: usize) -> RunConfig {
    let mut c = RunConfig::setting2();
    let steps = 4 * years;
    c.time.steps = steps;
    c.time.horizon_years = years as f64;
    c.rewards.horizon_years = years as f64;
    c.carbon.adjustment_dates = (1..)
        .map(|k| k * every)
        .take_while(|&d| d < steps)
        .collect();
    let dates = c.carbon.adjustment_dates.len();
    c.carbon.scenarios[0].stay_prob = vec![0.5; dates];
    c.solver.cross_check_every = 0;
    c
}
