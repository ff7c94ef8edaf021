//! Run configuration: every model parameter, solver option and the output
//! directory, stored as TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fictitious_play::{BestResponseMethod, FpOptions, InitialProfile};
use crate::lp::{SolverBackend, DEFAULT_VAR_LIMIT};
use crate::market::{DemandModel, SupplySpec};
use crate::model::{MarketModel, RewardParams};
use crate::scenario_tree::{build_tree, ScenarioSpec};
use crate::state_chains::{build_chain, DiffusionParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// `T₀`, years.
    pub horizon_years: f64,
    /// `T`, number of steps.
    pub steps: usize,
    /// `Δt`, years.
    pub dt: f64,
    /// `ρ`, per year.
    pub discount_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub prior: f64,
    /// Stay probability at each adjustment date.
    pub stay_prob: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarbonConfig {
    /// Carbon price levels, currency/tonCO2.
    pub grid: Vec<f64>,
    pub z0: f64,
    /// Time indices at which the price may move up one level.
    pub adjustment_dates: Vec<usize>,
    pub scenarios: Vec<ScenarioConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConventionalConfig {
    /// `k`, per year.
    pub mean_reversion: f64,
    /// Long-run mean cost before carbon; `θ = this - β̃ z0`.
    pub mean_cost_ex_carbon: f64,
    /// Standard deviation of the stationary law, currency/MWh.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewableConfig {
    pub mean_reversion: f64,
    pub long_run_mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Baseline demand `d(t)` in GW.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemandSeries {
    /// One value per time index `0..=T`.
    Values(Vec<f64>),
    /// `start + growth_per_year · t Δt`.
    Linear { start: f64, growth_per_year: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    pub baseline: DemandSeries,
    /// `β`, GW per currency/tonCO2.
    pub carbon_sensitivity: f64,
    /// `λ` for consecutive steps, repeated cyclically (one entry per quarter
    /// with `Δt = 0.25`).
    pub seasonal_cycle: Vec<f64>,
    /// `r_d`.
    pub peak_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub iterations: usize,
    pub best_response: BestResponseMethod,
    pub lp_backend: SolverBackend,
    pub cross_check_every: usize,
    /// Fraction of the initial exploitability at which to stop early.
    pub early_exit: Option<f64>,
    pub divergence_window: usize,
    pub divergence_factor: f64,
    pub initial_profile: InitialProfile,
    pub seed: u64,
    pub var_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = FpOptions::default();
        SolverConfig {
            iterations: o.iterations,
            best_response: o.method,
            lp_backend: o.lp_backend,
            cross_check_every: o.cross_check_every,
            early_exit: o.early_exit,
            divergence_window: o.divergence_window,
            divergence_factor: o.divergence_factor,
            initial_profile: o.initial,
            seed: o.seed,
            var_limit: DEFAULT_VAR_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub time: TimeConfig,
    pub carbon: CarbonConfig,
    pub conventional: ConventionalConfig,
    pub renewable: RenewableConfig,
    pub demand: DemandConfig,
    pub supply: SupplySpec,
    pub rewards: RewardParams,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
}

/// Placeholder baseline demand: 34 GW growing by 0.1 GW a year. It stands in
/// for the published national projection, which is not bundled.
pub const PLACEHOLDER_DEMAND: DemandSeries = DemandSeries::Linear {
    start: 34.0,
    growth_per_year: 0.1,
};

impl RunConfig {
    /// Two scenarios with stay probabilities 0.9 and 0.1 and a uniform prior.
    pub fn setting1() -> Self {
        let mut c = Self::setting2();
        c.carbon.scenarios = vec![
            ScenarioConfig {
                name: "low".into(),
                prior: 0.5,
                stay_prob: vec![0.9; 6],
            },
            ScenarioConfig {
                name: "high".into(),
                prior: 0.5,
                stay_prob: vec![0.1; 6],
            },
        ];
        c.output_dir = "out/setting1".into();
        c
    }

    /// One scenario with stay probability 0.5 at every adjustment date.
    pub fn setting2() -> Self {
        let dt = 0.25;
        RunConfig {
            time: TimeConfig {
                horizon_years: 18.0,
                steps: 72,
                dt,
                discount_rate: 0.086,
            },
            carbon: CarbonConfig {
                grid: vec![50.0, 75.0, 100.0, 125.0, 150.0, 175.0, 200.0],
                z0: 50.0,
                adjustment_dates: vec![10, 20, 30, 40, 50, 60],
                scenarios: vec![ScenarioConfig {
                    name: "single".into(),
                    prior: 1.0,
                    stay_prob: vec![0.5; 6],
                }],
            },
            conventional: ConventionalConfig {
                mean_reversion: 0.5,
                mean_cost_ex_carbon: 33.4,
                std: 11.0,
                min: 0.0,
                max: 70.0,
            },
            renewable: RenewableConfig {
                mean_reversion: 0.5,
                long_run_mean: 0.43,
                std: 0.044,
                min: 0.3,
                max: 0.6,
            },
            demand: DemandConfig {
                baseline: PLACEHOLDER_DEMAND,
                carbon_sensitivity: 0.015,
                seasonal_cycle: vec![1.10, 0.93, 0.91, 1.06],
                peak_ratio: 1.29,
            },
            supply: SupplySpec {
                conventional_capacity: 35.9,
                renewable_capacity: 47.0,
                renewable_base_capacity: 35.6,
                baseline_supply_at_cap: 12.1,
                price_cap: 150.0,
                utilization_cost_max: 0.5,
                emission_intensity: 0.429,
            },
            rewards: RewardParams {
                discount_rate: 0.086,
                dt,
                horizon_years: 18.0,
                conventional_fixed_cost: 30.0,
                conventional_scrap_value: 0.0,
                conventional_depreciation: 0.0,
                renewable_fixed_cost: 17.21,
                renewable_investment: 1377.0,
                renewable_depreciation: std::f64::consts::LN_2 / 10.0,
                energy_per_kw_year: 8.76,
            },
            solver: SolverConfig::default(),
            output_dir: "out/setting2".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.time;
        if (t.steps as f64 * t.dt - t.horizon_years).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "steps * dt = {} does not equal the horizon {}",
                t.steps as f64 * t.dt,
                t.horizon_years
            )));
        }
        let r = &self.rewards;
        if r.dt != t.dt || r.horizon_years != t.horizon_years || r.discount_rate != t.discount_rate
        {
            return Err(Error::Config(
                "rewards.dt, rewards.horizon_years and rewards.discount_rate must match [time]"
                    .into(),
            ));
        }
        if self.demand.seasonal_cycle.is_empty() {
            return Err(Error::Config("seasonal cycle is empty".into()));
        }
        if let DemandSeries::Values(v) = &self.demand.baseline {
            if v.len() != t.steps + 1 {
                return Err(Error::Config(format!(
                    "demand series has {} values, expected {}",
                    v.len(),
                    t.steps + 1
                )));
            }
        }
        if self.carbon.scenarios.is_empty() {
            return Err(Error::Config("no scenarios".into()));
        }
        if self.solver.iterations == 0 {
            return Err(Error::Config("solver.iterations must be >= 1".into()));
        }
        self.scenario_spec()?.validate()
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        let c = &self.carbon;
        let spec = ScenarioSpec {
            carbon_grid: c.grid.clone(),
            z0: c.z0,
            scenarios: c.scenarios.iter().map(|s| s.name.clone()).collect(),
            prior: c.scenarios.iter().map(|s| s.prior).collect(),
            adjustment_dates: c.adjustment_dates.clone(),
            stay_prob: c.scenarios.iter().map(|s| s.stay_prob.clone()).collect(),
            horizon: self.time.steps,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn conventional_params(&self) -> DiffusionParams {
        let c = &self.conventional;
        let theta = c.mean_cost_ex_carbon - self.supply.emission_intensity * self.carbon.z0;
        DiffusionParams::cir_from_std(c.mean_reversion, theta, c.std, c.min, c.max, self.time.dt)
    }

    pub fn renewable_params(&self) -> DiffusionParams {
        let r = &self.renewable;
        DiffusionParams::jacobi_from_std(
            r.mean_reversion,
            r.long_run_mean,
            r.std,
            r.min,
            r.max,
            self.time.dt,
        )
    }

    pub fn demand_model(&self) -> DemandModel {
        let n = self.time.steps + 1;
        let baseline = match &self.demand.baseline {
            DemandSeries::Values(v) => v.clone(),
            DemandSeries::Linear {
                start,
                growth_per_year,
            } => (0..n)
                .map(|t| start + growth_per_year * t as f64 * self.time.dt)
                .collect(),
        };
        let cycle = &self.demand.seasonal_cycle;
        DemandModel {
            baseline,
            beta: self.demand.carbon_sensitivity,
            seasonal: (0..n).map(|t| cycle[t % cycle.len()]).collect(),
            peak_ratio: self.demand.peak_ratio,
        }
    }

    pub fn fp_options(&self) -> FpOptions {
        let s = &self.solver;
        FpOptions {
            iterations: s.iterations,
            method: s.best_response,
            lp_backend: s.lp_backend,
            cross_check_every: s.cross_check_every,
            early_exit: s.early_exit,
            divergence_window: s.divergence_window,
            divergence_factor: s.divergence_factor,
            initial: s.initial_profile,
            seed: s.seed,
            var_limit: s.var_limit,
        }
    }

    /// Builds the market on the configured scenario tree.
    pub fn build_model(&self) -> Result<MarketModel> {
        self.build_model_with(self.scenario_spec()?)
    }

    /// Builds the market on an arbitrary scenario specification (used for
    /// deterministic baselines).
    pub fn build_model_with(&self, spec: ScenarioSpec) -> Result<MarketModel> {
        self.validate()?;
        let tree = build_tree(&spec)?;
        let conventional = build_chain(&self.conventional_params())?;
        let renewable = build_chain(&self.renewable_params())?;
        MarketModel::new(
            tree,
            conventional,
            renewable,
            self.demand_model(),
            self.supply.clone(),
            self.rewards.clone(),
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}
