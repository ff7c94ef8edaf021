//! Common-noise tree: the carbon-price process `Z`, driven by a hidden
//! scenario `S`, encoded as the tree of its positive-probability histories.
//!
//! Each node at time `t` is one realized history `(z_0, ..., z_t)` and carries
//! its unconditional probability, the Bayesian posterior over scenarios given
//! that history, and the transition probabilities to its children. Histories
//! only branch on adjustment dates, so between two dates every node has a
//! single child reached with probability one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-12;

/// Carbon-price dynamics conditional on a hidden scenario.
///
/// At an adjustment date `t` the price either stays on its level (probability
/// `stay_prob[s][j]` where `adjustment_dates[j] == t`) or moves one level up
/// the grid. The top level is absorbing. Outside adjustment dates the price
/// does not move.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Increasing carbon-price levels (currency/tonCO2).
    pub carbon_grid: Vec<f64>,
    pub z0: f64,
    pub scenarios: Vec<String>,
    pub prior: Vec<f64>,
    pub adjustment_dates: Vec<usize>,
    /// `stay_prob[s][j]` for scenario `s` and the `j`-th adjustment date.
    pub stay_prob: Vec<Vec<f64>>,
    pub horizon: usize,
}

impl ScenarioSpec {
    /// Single scenario with a deterministic price: stays wherever `word`
    /// has `false`, jumps wherever it has `true` (one flag per adjustment date).
    pub fn deterministic(
        carbon_grid: Vec<f64>,
        z0: f64,
        adjustment_dates: Vec<usize>,
        jumps: &[bool],
        horizon: usize,
    ) -> Result<Self> {
        if jumps.len() != adjustment_dates.len() {
            return Err(Error::InvalidScenario(format!(
                "{} jump flags for {} adjustment dates",
                jumps.len(),
                adjustment_dates.len()
            )));
        }
        let stay = jumps.iter().map(|&j| if j { 0.0 } else { 1.0 }).collect();
        let spec = ScenarioSpec {
            carbon_grid,
            z0,
            scenarios: vec!["deterministic".into()],
            prior: vec![1.0],
            adjustment_dates,
            stay_prob: vec![stay],
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.carbon_grid.is_empty() {
            return bad("empty carbon grid".into());
        }
        if self.carbon_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("carbon grid must be strictly increasing".into());
        }
        if self.level_index(self.z0).is_none() {
            return bad(format!("z0 = {} is not a grid level", self.z0));
        }
        if self.scenarios.is_empty() {
            return bad("empty scenario set".into());
        }
        if self.prior.len() != self.scenarios.len() {
            return bad("prior length differs from the number of scenarios".into());
        }
        if self.prior.iter().any(|&p| !(p >= 0.0)) {
            return bad("prior has negative entries".into());
        }
        let total: f64 = self.prior.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return bad(format!("prior sums to {total}"));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least one step".into());
        }
        if self.adjustment_dates.windows(2).any(|w| w[0] >= w[1]) {
            return bad("adjustment dates must be strictly increasing".into());
        }
        for &d in &self.adjustment_dates {
            if d == 0 || d >= self.horizon {
                return bad(format!(
                    "adjustment date {d} outside 1..{}",
                    self.horizon - 1
                ));
            }
        }
        if self.stay_prob.len() != self.scenarios.len() {
            return bad("stay_prob needs one row per scenario".into());
        }
        for row in &self.stay_prob {
            if row.len() != self.adjustment_dates.len() {
                return bad("stay_prob rows need one entry per adjustment date".into());
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return bad("stay probabilities must lie in [0, 1]".into());
            }
        }
        Ok(())
    }

    pub fn level_index(&self, z: f64) -> Option<usize> {
        self.carbon_grid
            .iter()
            .position(|&h| (h - z).abs() <= 1e-9 * h.abs().max(1.0))
    }

    fn date_slot(&self, t: usize) -> Option<usize> {
        self.adjustment_dates.binary_search(&t).ok()
    }

    /// Kernel of `Z_t` given `Z_{t-1}` at grid level `level` in scenario `s`:
    /// at most two `(next level, probability)` pairs.
    pub fn kernel(&self, s: usize, t: usize, level: usize) -> Vec<(usize, f64)> {
        let top = self.carbon_grid.len() - 1;
        match self.date_slot(t) {
            Some(j) if level < top => {
                let stay = self.stay_prob[s][j];
                vec![(level, stay), (level + 1, 1.0 - stay)]
            }
            _ => vec![(level, 1.0)],
        }
    }

    fn kernel_prob(&self, s: usize, t: usize, from: usize, to: usize) -> f64 {
        self.kernel(s, t, from)
            .into_iter()
            .filter(|&(l, _)| l == to)
            .map(|(_, p)| p)
            .sum()
    }

    /// Joint weights `Π_0(s) ∏_k π^Z_k(s, z_{k-1}; z_k)` per scenario, or
    /// `None` when some level is not on the grid.
    fn path_weights(&self, path: &[f64]) -> Result<Option<Vec<f64>>> {
        match path.first() {
            Some(&z) if self.level_index(z) == self.level_index(self.z0) => {}
            _ => {
                return Err(Error::InvalidPath(format!(
                    "path must start at z0 = {}",
                    self.z0
                )))
            }
        }
        if path.len() > self.horizon + 1 {
            return Err(Error::InvalidPath(format!(
                "path of length {} exceeds horizon {}",
                path.len(),
                self.horizon
            )));
        }
        let levels: Option<Vec<usize>> = path.iter().map(|&z| self.level_index(z)).collect();
        let Some(levels) = levels else {
            return Ok(None);
        };
        let weights = (0..self.scenarios.len())
            .map(|s| {
                levels
                    .windows(2)
                    .enumerate()
                    .fold(self.prior[s], |w, (k, pair)| {
                        w * self.kernel_prob(s, k + 1, pair[0], pair[1])
                    })
            })
            .collect();
        Ok(Some(weights))
    }
}

/// Unconditional probability of observing `path = (z_0, ..., z_t)`.
pub fn path_probability(spec: &ScenarioSpec, path: &[f64]) -> Result<f64> {
    Ok(spec
        .path_weights(path)?
        .map(|w| w.iter().sum())
        .unwrap_or(0.0))
}

/// Posterior law of the scenario given the observed history.
pub fn posterior(spec: &ScenarioSpec, path: &[f64]) -> Result<Vec<f64>> {
    let weights = spec.path_weights(path)?.ok_or(Error::ZeroProbabilityPath)?;
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroProbabilityPath);
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// One positive-probability history of the carbon price.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryNode {
    pub time: usize,
    /// Stable identifier: `r` followed by one `S` (stay) or `J` (jump) per
    /// adjustment date reached so far.
    pub id: String,
    pub path: Vec<f64>,
    pub prob: f64,
    pub posterior: Vec<f64>,
    pub parent: Option<usize>,
    /// `(index in the next level, transition probability)`.
    pub children: Vec<(usize, f64)>,
    #[serde(skip)]
    level: usize,
    #[serde(skip)]
    weights: Vec<f64>,
}

impl TrajectoryNode {
    /// Current carbon level `Ψ_t(u)`.
    pub fn carbon(&self) -> f64 {
        self.path[self.time]
    }

    /// Grid index of the current carbon level.
    pub fn level(&self) -> usize {
        self.level
    }
}

/// Carbon level at time `s` of the history encoded by `node`.
pub fn carbon_at(node: &TrajectoryNode, s: usize) -> Result<f64> {
    node.path.get(s).copied().ok_or(Error::TimeOutOfRange {
        requested: s,
        limit: node.time,
    })
}

/// The tree of all positive-probability carbon histories up to the horizon.
#[derive(Clone, Debug, Serialize)]
pub struct CommonNoiseTree {
    pub levels: Vec<Vec<TrajectoryNode>>,
    pub spec: ScenarioSpec,
}

/// Builds the history tree. Child probabilities come from the posterior-
/// weighted scenario kernels; zero-probability branches are pruned exactly.
pub fn build_tree(spec: &ScenarioSpec) -> Result<CommonNoiseTree> {
    spec.validate()?;
    let z0_level = spec.level_index(spec.z0).expect("validated");
    let root = TrajectoryNode {
        time: 0,
        id: "r".into(),
        path: vec![spec.carbon_grid[z0_level]],
        prob: 1.0,
        posterior: spec.prior.clone(),
        parent: None,
        children: Vec::new(),
        level: z0_level,
        weights: spec.prior.clone(),
    };
    let mut levels = vec![vec![root]];
    for t in 1..=spec.horizon {
        let is_date = spec.date_slot(t).is_some();
        let mut next: Vec<TrajectoryNode> = Vec::new();
        for (pi, parent) in levels[t - 1].iter_mut().enumerate() {
            // candidate next levels in increasing order
            let mut targets: Vec<usize> = (0..spec.scenarios.len())
                .flat_map(|s| spec.kernel(s, t, parent.level))
                .map(|(l, _)| l)
                .collect();
            targets.sort_unstable();
            targets.dedup();
            for to in targets {
                let weights: Vec<f64> = (0..spec.scenarios.len())
                    .map(|s| parent.weights[s] * spec.kernel_prob(s, t, parent.level, to))
                    .collect();
                let prob: f64 = weights.iter().sum();
                if prob == 0.0 {
                    continue;
                }
                let transition: f64 = parent
                    .posterior
                    .iter()
                    .enumerate()
                    .map(|(s, q)| q * spec.kernel_prob(s, t, parent.level, to))
                    .sum();
                let mut id = parent.id.clone();
                if is_date {
                    id.push(if to == parent.level { 'S' } else { 'J' });
                }
                let mut path = parent.path.clone();
                path.push(spec.carbon_grid[to]);
                parent.children.push((next.len(), transition));
                next.push(TrajectoryNode {
                    time: t,
                    id,
                    path,
                    prob,
                    posterior: weights.iter().map(|w| w / prob).collect(),
                    parent: Some(pi),
                    children: Vec::new(),
                    level: to,
                    weights,
                });
            }
        }
        levels.push(next);
    }
    Ok(CommonNoiseTree {
        levels,
        spec: spec.clone(),
    })
}

impl CommonNoiseTree {
    pub fn horizon(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn nodes(&self, t: usize) -> &[TrajectoryNode] {
        &self.levels[t]
    }

    pub fn node(&self, t: usize, i: usize) -> &TrajectoryNode {
        &self.levels[t][i]
    }

    pub fn root(&self) -> &TrajectoryNode {
        &self.levels[0][0]
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Index at time `s` of the ancestor of node `i` at time `t` (`s <= t`).
    pub fn ancestor(&self, t: usize, i: usize, s: usize) -> usize {
        debug_assert!(s <= t);
        let mut idx = i;
        for level in (s + 1..=t).rev() {
            idx = self.levels[level][idx]
                .parent
                .expect("non-root node has a parent");
        }
        idx
    }

    /// Leaf whose history equals `path` (a full path of length `T + 1`).
    pub fn find_leaf(&self, path: &[f64]) -> Option<usize> {
        let leaves = self.levels.last()?;
        leaves.iter().position(|n| {
            n.path.len() == path.len()
                && n.path
                    .iter()
                    .zip(path)
                    .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
        })
    }

    /// Leaf reached by always staying (lowest trajectory).
    pub fn lowest_leaf(&self) -> usize {
        let leaves = self.levels.last().expect("tree has levels");
        (0..leaves.len())
            .min_by(|&a, &b| path_cmp(&leaves[a].path, &leaves[b].path))
            .expect("at least one leaf")
    }

    /// Leaf reached by jumping at every opportunity (highest trajectory).
    pub fn highest_leaf(&self) -> usize {
        let leaves = self.levels.last().expect("tree has levels");
        (0..leaves.len())
            .max_by(|&a, &b| path_cmp(&leaves[a].path, &leaves[b].path))
            .expect("at least one leaf")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.levels).expect("tree serializes")
    }
}

fn path_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    sa.total_cmp(&sb)
}
