//! Experiment orchestration and plot-ready output files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
#[cfg(not(target_arch = "wasm32"))]
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fictitious_play::{lpfp, FpRecord};
use crate::lp::MeanFieldProfile;
use crate::market::PricePair;
use crate::model::MarketModel;
use crate::scenario_tree::ScenarioSpec;

pub const TAG_MIN: &str = "omega_min";
pub const TAG_MAX: &str = "omega_max";

/// Installed capacities and prices on one tree node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeReport {
    pub t: usize,
    pub node_id: String,
    /// Designated trajectories this node lies on, `|`-separated.
    pub leaf_tag: String,
    pub prob: f64,
    /// `I_C |m_t(u)|` (at `T`, the mass that never exited).
    pub conventional_gw: f64,
    /// `I_R^b + I_R (1 - |m̄_t(u)|)`.
    pub renewable_gw: f64,
    /// `None` at `t = T`, where no price is formed.
    pub prices: Option<PricePair>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: usize,
    pub curve: String,
    pub conventional_gw: f64,
    pub renewable_gw: f64,
    /// Share of `I_C` still installed.
    pub conventional_share: f64,
    /// Share of `I_R^b + I_R` installed.
    pub renewable_share: f64,
    pub prices: Option<PricePair>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetadata {
    pub label: String,
    /// SHA-256 of the configuration in TOML form.
    pub config_hash: String,
    pub iterations: usize,
    pub initial_exploitability: [f64; 2],
    pub final_exploitability: [f64; 2],
    pub build_seconds: f64,
    pub solve_seconds: f64,
    pub warnings: Vec<String>,
    /// Exploitability values are divided by those of the initial profile.
    pub relative_exploitability: bool,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: RunConfig,
    pub profile: MeanFieldProfile,
    /// `nodes[t]` in tree order.
    pub nodes: Vec<Vec<NodeReport>>,
    pub curves: Vec<CurvePoint>,
    pub exploitability: Vec<FpRecord>,
    pub metadata: RunMetadata,
}

/// A deterministic carbon trajectory for the no-common-noise baseline.
#[derive(Clone, Debug, PartialEq)]
pub enum CarbonPath {
    /// Stay at every adjustment date.
    Min,
    /// Jump at every adjustment date.
    Max,
    /// Full sequence `z_0, ..., z_T`.
    Levels(Vec<f64>),
}

fn jump_flags(config: &RunConfig, path: &CarbonPath) -> Result<Vec<bool>> {
    let dates = &config.carbon.adjustment_dates;
    match path {
        CarbonPath::Min => Ok(vec![false; dates.len()]),
        CarbonPath::Max => Ok(vec![true; dates.len()]),
        CarbonPath::Levels(levels) => {
            let horizon = config.time.steps;
            if levels.len() != horizon + 1 {
                return Err(Error::InvalidPath(format!(
                    "expected {} carbon levels, got {}",
                    horizon + 1,
                    levels.len()
                )));
            }
            let grid = &config.carbon.grid;
            let index = |z: f64| {
                grid.iter()
                    .position(|&g| (g - z).abs() <= 1e-9 * g.abs().max(1.0))
                    .ok_or_else(|| Error::InvalidPath(format!("{z} is not a carbon level")))
            };
            if index(levels[0])? != index(config.carbon.z0)? {
                return Err(Error::InvalidPath("path does not start at z0".into()));
            }
            let mut flags = Vec::with_capacity(dates.len());
            for t in 1..=horizon {
                let (a, b) = (index(levels[t - 1])?, index(levels[t])?);
                let at_date = dates.contains(&t);
                let top = a + 1 == grid.len();
                match b.checked_sub(a) {
                    Some(0) if at_date => flags.push(top),
                    Some(0) => {}
                    Some(1) if at_date => flags.push(true),
                    _ => {
                        return Err(Error::InvalidPath(format!(
                            "move from {} to {} at t = {t} is not allowed",
                            levels[t - 1],
                            levels[t]
                        )))
                    }
                }
            }
            Ok(flags)
        }
    }
}

/// Carbon sequence obtained by staying or jumping as `jumps` says.
fn carbon_sequence(config: &RunConfig, jumps: &[bool]) -> Vec<f64> {
    let grid = &config.carbon.grid;
    let mut level = grid
        .iter()
        .position(|&g| g == config.carbon.z0)
        .unwrap_or(0);
    let mut out = vec![grid[level]];
    for t in 1..=config.time.steps {
        if let Some(j) = config.carbon.adjustment_dates.iter().position(|&d| d == t) {
            if jumps[j] && level + 1 < grid.len() {
                level += 1;
            }
        }
        out.push(grid[level]);
    }
    out
}

/// Wall-clock timer; reads zero where the platform has no clock.
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        return 0.0;
    }
}

fn config_hash(config: &RunConfig) -> String {
    let digest = Sha256::digest(config.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds the configured market, runs fictitious play and collects the report.
pub fn run_experiment(config: &RunConfig) -> Result<RunReport> {
    let start = Stopwatch::start();
    let model = config.build_model()?;
    run_on(config, model, "stochastic".into(), start)
}

/// Same pipeline on a single-path tree following `path` with probability one.
pub fn deterministic_baseline(config: &RunConfig, path: &CarbonPath) -> Result<RunReport> {
    let start = Stopwatch::start();
    let flags = jump_flags(config, path)?;
    let spec = ScenarioSpec::deterministic(
        config.carbon.grid.clone(),
        config.carbon.z0,
        config.carbon.adjustment_dates.clone(),
        &flags,
        config.time.steps,
    )?;
    let model = config.build_model_with(spec)?;
    run_on(config, model, "deterministic".into(), start)
}

fn run_on(
    config: &RunConfig,
    model: MarketModel,
    label: String,
    start: Stopwatch,
) -> Result<RunReport> {
    let build_seconds = start.seconds();
    let solve_start = Stopwatch::start();
    let state = lpfp(&model, &config.fp_options())?;
    let solve_seconds = solve_start.seconds();
    let last = state.history.last().copied().unwrap_or(state.initial);
    let mut report = build_report(config, &model, state.average, state.history);
    report.metadata = RunMetadata {
        label,
        config_hash: config_hash(config),
        iterations: state.iteration,
        initial_exploitability: [state.initial.eps_conventional, state.initial.eps_renewable],
        final_exploitability: [last.eps_conventional, last.eps_renewable],
        build_seconds,
        solve_seconds,
        warnings: model.warnings.clone(),
        relative_exploitability: false,
    };
    Ok(report)
}

/// Capacities, prices and curves of `profile` on `model`.
pub fn build_report(
    config: &RunConfig,
    model: &MarketModel,
    profile: MeanFieldProfile,
    exploitability: Vec<FpRecord>,
) -> RunReport {
    let tree = &model.tree;
    let horizon = tree.horizon();
    let supply = &model.supply;
    let prices = model.prices(&profile);
    let n_dates = config.carbon.adjustment_dates.len();
    let designated = [
        (TAG_MIN, carbon_sequence(config, &vec![false; n_dates])),
        (TAG_MAX, carbon_sequence(config, &vec![true; n_dates])),
    ];
    let nodes: Vec<Vec<NodeReport>> = (0..=horizon)
        .map(|t| {
            tree.nodes(t)
                .iter()
                .enumerate()
                .map(|(i, node)| {
                    let tags: Vec<&str> = designated
                        .iter()
                        .filter(|(_, seq)| seq[..=t] == node.path[..])
                        .map(|(tag, _)| *tag)
                        .collect();
                    NodeReport {
                        t,
                        node_id: node.id.clone(),
                        leaf_tag: tags.join("|"),
                        prob: node.prob,
                        conventional_gw: supply.conventional_capacity
                            * profile.conventional.active_mass(t, i),
                        renewable_gw: supply.renewable_base_capacity
                            + supply.renewable_capacity
                                * (1.0 - profile.renewable.active_mass(t, i)),
                        prices: prices.get(t).map(|level| level[i]),
                    }
                })
                .collect()
        })
        .collect();
    let curves = curves(&nodes, supply);
    RunReport {
        config: config.clone(),
        profile,
        nodes,
        curves,
        exploitability,
        metadata: RunMetadata {
            label: String::new(),
            config_hash: config_hash(config),
            iterations: 0,
            initial_exploitability: [0.0; 2],
            final_exploitability: [0.0; 2],
            build_seconds: 0.0,
            solve_seconds: 0.0,
            warnings: model.warnings.clone(),
            relative_exploitability: false,
        },
    }
}

fn point(
    t: usize,
    curve: &str,
    conv: f64,
    ren: f64,
    prices: Option<PricePair>,
    supply: &crate::market::SupplySpec,
) -> CurvePoint {
    CurvePoint {
        t,
        curve: curve.into(),
        conventional_gw: conv,
        renewable_gw: ren,
        conventional_share: conv / supply.conventional_capacity,
        renewable_share: ren / (supply.renewable_base_capacity + supply.renewable_capacity),
        prices,
    }
}

/// Expectation over nodes plus the conditional curves along each designated
/// trajectory present in the tree.
fn curves(nodes: &[Vec<NodeReport>], supply: &crate::market::SupplySpec) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    for level in nodes {
        let Some(first) = level.first() else { continue };
        let t = first.t;
        let conv = level.iter().map(|n| n.prob * n.conventional_gw).sum();
        let ren = level.iter().map(|n| n.prob * n.renewable_gw).sum();
        let prices = first.prices.map(|_| PricePair {
            peak: level
                .iter()
                .map(|n| n.prob * n.prices.unwrap_or_default().peak)
                .sum(),
            offpeak: level
                .iter()
                .map(|n| n.prob * n.prices.unwrap_or_default().offpeak)
                .sum(),
        });
        out.push(point(t, "expectation", conv, ren, prices, supply));
    }
    let last = nodes.last().map(Vec::as_slice).unwrap_or_default();
    for tag in [TAG_MIN, TAG_MAX] {
        if !last.iter().any(|n| n.leaf_tag.split('|').any(|x| x == tag)) {
            continue;
        }
        for level in nodes {
            if let Some(n) = level
                .iter()
                .find(|n| n.leaf_tag.split('|').any(|x| x == tag))
            {
                out.push(point(
                    n.t,
                    tag,
                    n.conventional_gw,
                    n.renewable_gw,
                    n.prices,
                    supply,
                ));
            }
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl RunReport {
    /// Node rows along a designated trajectory, one per time.
    /// Rescales the exploitability series by the initial exploitability of
    /// each population. Applying it twice has no further effect.
    pub fn make_exploitability_relative(&mut self) {
        if self.metadata.relative_exploitability {
            return;
        }
        let [c0, r0] = self.metadata.initial_exploitability;
        let scale = |v: f64, v0: f64| if v0 > 0.0 { v / v0 } else { v };
        for r in &mut self.exploitability {
            r.eps_conventional = scale(r.eps_conventional, c0);
            r.eps_renewable = scale(r.eps_renewable, r0);
        }
        let [c, r] = self.metadata.final_exploitability;
        self.metadata.final_exploitability = [scale(c, c0), scale(r, r0)];
        self.metadata.relative_exploitability = true;
    }

    pub fn along(&self, tag: &str) -> Vec<&NodeReport> {
        self.nodes
            .iter()
            .filter_map(|level| {
                level
                    .iter()
                    .find(|n| n.leaf_tag.split('|').any(|x| x == tag))
            })
            .collect()
    }

    pub fn capacities_csv(&self) -> String {
        let mut s = String::from("t,node_id,leaf_tag,conv_GW,ren_GW,prob\n");
        for n in self.nodes.iter().flatten() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                n.t, n.node_id, n.leaf_tag, n.conventional_gw, n.renewable_gw, n.prob
            );
        }
        s
    }

    pub fn prices_csv(&self) -> String {
        let mut s = String::from("t,node_id,peak,offpeak\n");
        for n in self.nodes.iter().flatten() {
            if let Some(p) = n.prices {
                let _ = writeln!(s, "{},{},{},{}", n.t, n.node_id, p.peak, p.offpeak);
            }
        }
        s
    }

    pub fn exploitability_csv(&self) -> String {
        let mut s = String::from("iter,eps_c,eps_r\n");
        for r in &self.exploitability {
            let _ = writeln!(s, "{},{},{}", r.iter, r.eps_conventional, r.eps_renewable);
        }
        s
    }

    pub fn curves_csv(&self) -> String {
        let mut s = String::from("t,curve,conv_GW,ren_GW,conv_share,ren_share,peak,offpeak\n");
        for c in &self.curves {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                c.t,
                c.curve,
                c.conventional_gw,
                c.renewable_gw,
                c.conventional_share,
                c.renewable_share,
                opt(c.prices.map(|p| p.peak)),
                opt(c.prices.map(|p| p.offpeak))
            );
        }
        s
    }

    /// Writes the CSV files, the configuration echo and the run metadata.
    pub fn emit(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let config_json =
            serde_json::to_string_pretty(&self.config).expect("config serializes") + "\n";
        let run_json =
            serde_json::to_string_pretty(&self.metadata).expect("metadata serializes") + "\n";
        let files = [
            ("capacities.csv", self.capacities_csv()),
            ("prices.csv", self.prices_csv()),
            ("exploitability.csv", self.exploitability_csv()),
            ("curves.csv", self.curves_csv()),
            ("config.json", config_json),
            ("run.json", run_json),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
