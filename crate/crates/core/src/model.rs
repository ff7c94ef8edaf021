//! The two-population electricity market: prices from a mean-field profile
//! and the reward tables each population optimizes against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{MeanFieldProfile, Population, RewardTables};
use crate::market::{
    clearing_price, gain, renewable_supply, DemandModel, PricePair, SupplySpec, OFFPEAK_SHARE,
    PEAK_SHARE,
};
use crate::scenario_tree::CommonNoiseTree;
use crate::state_chains::GridChain;

/// Discounting, fixed costs and plant values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// `ρ`, per year.
    pub discount_rate: f64,
    /// `Δt`, years per step.
    pub dt: f64,
    /// `T₀`, years.
    pub horizon_years: f64,
    /// `κ_C`, currency/kW/yr.
    pub conventional_fixed_cost: f64,
    /// `K_C`, currency/kW.
    pub conventional_scrap_value: f64,
    /// `γ_C`, per year.
    pub conventional_depreciation: f64,
    /// `κ_R`, currency/kW/yr.
    pub renewable_fixed_cost: f64,
    /// `K_R`, currency/kW.
    pub renewable_investment: f64,
    /// `γ_R`, per year.
    pub renewable_depreciation: f64,
    /// MWh produced by one kW running for one year at full capacity. Margins
    /// are in currency/MWh while fixed costs are in currency/kW/yr; this
    /// factor puts both on the same footing. `1.0` multiplies margins by
    /// nothing at all.
    pub energy_per_kw_year: f64,
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.horizon_years > 0.0) {
            return Err(Error::Config(
                "time step and horizon must be positive".into(),
            ));
        }
        if !(self.energy_per_kw_year > 0.0) {
            return Err(Error::Config("energy per kW-year must be positive".into()));
        }
        let costs = [
            self.conventional_fixed_cost,
            self.conventional_scrap_value,
            self.conventional_depreciation,
            self.renewable_fixed_cost,
            self.renewable_investment,
            self.renewable_depreciation,
        ];
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Config(
                "costs and depreciation rates must be >= 0".into(),
            ));
        }
        Ok(())
    }

    fn discount(&self, t: usize) -> f64 {
        (-self.discount_rate * t as f64 * self.dt).exp()
    }

    /// `g(t) = K_C e^{-(γ_C + ρ) t Δt}`.
    pub fn conventional_stop(&self, t: usize) -> f64 {
        self.conventional_scrap_value
            * (-(self.conventional_depreciation + self.discount_rate) * t as f64 * self.dt).exp()
    }

    /// `ḡ(t) = K_R e^{-ρ T₀ - γ_R (T₀ - t Δt)} - K_R e^{-ρ t Δt}`.
    pub fn renewable_stop(&self, t: usize) -> f64 {
        let t0 = self.horizon_years;
        let k = self.renewable_investment;
        k * (-self.discount_rate * t0 - self.renewable_depreciation * (t0 - t as f64 * self.dt))
            .exp()
            - k * self.discount(t)
    }

    /// `f(t, x, z, p)` for a conventional plant with cost `x`.
    pub fn conventional_running(
        &self,
        t: usize,
        cost: f64,
        carbon_cost: f64,
        prices: PricePair,
        c_max: f64,
    ) -> f64 {
        let e = self.energy_per_kw_year;
        let margin = PEAK_SHARE * gain(prices.peak - cost - carbon_cost, c_max) * e
            + OFFPEAK_SHARE * gain(prices.offpeak - cost - carbon_cost, c_max) * e;
        self.discount(t) * (margin - self.conventional_fixed_cost) * self.dt
    }

    /// `f̄(t, x, p)` for a renewable project with capacity factor `x`,
    /// carrying the minus sign of the entry-as-stopping formulation.
    pub fn renewable_running(&self, t: usize, factor: f64, prices: PricePair) -> f64 {
        let revenue = (PEAK_SHARE * prices.peak + OFFPEAK_SHARE * prices.offpeak)
            * factor
            * self.energy_per_kw_year;
        -self.discount(t) * (revenue - self.renewable_fixed_cost) * self.dt
    }
}

/// Everything needed to turn a mean-field profile into prices and rewards.
#[derive(Clone, Debug)]
pub struct MarketModel {
    pub tree: CommonNoiseTree,
    /// Baseline marginal cost chain of conventional plants (currency/MWh).
    pub conventional: GridChain,
    /// Capacity-factor chain of renewable projects.
    pub renewable: GridChain,
    pub demand: DemandModel,
    pub supply: SupplySpec,
    pub rewards: RewardParams,
    /// `η_t`, the law of the capacity factor at each `t <= T`.
    pub eta: Vec<Vec<f64>>,
    /// Peak and off-peak demand (GW) per `(t, node)` for `t < T`.
    pub demand_table: Vec<Vec<(f64, f64)>>,
    /// Non-fatal configuration diagnostics.
    pub warnings: Vec<String>,
}

impl MarketModel {
    pub fn new(
        tree: CommonNoiseTree,
        conventional: GridChain,
        renewable: GridChain,
        demand: DemandModel,
        supply: SupplySpec,
        rewards: RewardParams,
    ) -> Result<Self> {
        demand.validate()?;
        supply.validate()?;
        rewards.validate()?;
        let horizon = tree.horizon();
        if demand.baseline.len() < horizon + 1 {
            return Err(Error::Config(format!(
                "demand series has {} entries, horizon needs {}",
                demand.baseline.len(),
                horizon + 1
            )));
        }
        let z0 = tree.spec.z0;
        let mut demand_table = Vec::with_capacity(horizon);
        let mut max_peak: f64 = 0.0;
        for t in 0..horizon {
            let level = tree
                .nodes(t)
                .iter()
                .map(|node| demand.peak_offpeak(t, node.carbon(), z0))
                .collect::<Result<Vec<_>>>()?;
            max_peak = level.iter().fold(max_peak, |m, d| m.max(d.0));
            demand_table.push(level);
        }
        let mut law = renewable.initial.clone();
        let mut eta = Vec::with_capacity(horizon + 1);
        for _ in 0..=horizon {
            let next = renewable.step(&law);
            eta.push(std::mem::replace(&mut law, next));
        }
        let warnings = supply.check_baseline_cover(max_peak).into_iter().collect();
        Ok(MarketModel {
            tree,
            conventional,
            renewable,
            demand,
            supply,
            rewards,
            eta,
            demand_table,
            warnings,
        })
    }

    pub fn horizon(&self) -> usize {
        self.tree.horizon()
    }

    pub fn chain(&self, pop: Population) -> &GridChain {
        match pop {
            Population::Conventional => &self.conventional,
            Population::Renewable => &self.renewable,
        }
    }

    /// Clearing prices `P(t, Ψ_t(u), d_t^p(u), d_t^o(u), m_t(u), m̄_t(u))`
    /// for every `t < T` and node.
    pub fn prices(&self, profile: &MeanFieldProfile) -> Vec<Vec<PricePair>> {
        (0..self.horizon())
            .map(|t| {
                self.tree
                    .nodes(t)
                    .iter()
                    .enumerate()
                    .map(|(i, node)| self.node_prices(t, i, node.carbon(), profile))
                    .collect()
            })
            .collect()
    }

    fn node_prices(&self, t: usize, i: usize, z: f64, profile: &MeanFieldProfile) -> PricePair {
        let m = &profile.conventional.m[t][i];
        let m_bar = &profile.renewable.m[t][i];
        let s_r = renewable_supply(&self.supply, &self.renewable.grid, &self.eta[t], m_bar);
        let (d_peak, d_off) = self.demand_table[t][i];
        let grid = &self.conventional.grid;
        PricePair {
            peak: clearing_price(&self.supply, z, d_peak, grid, m, s_r),
            offpeak: clearing_price(&self.supply, z, d_off, grid, m, s_r),
        }
    }

    /// Reward tables of `pop` at the given prices.
    pub fn reward_tables(&self, pop: Population, prices: &[Vec<PricePair>]) -> RewardTables {
        let horizon = self.horizon();
        let r = &self.rewards;
        let c_max = self.supply.utilization_cost_max;
        let f = (0..horizon)
            .map(|t| {
                self.tree
                    .nodes(t)
                    .iter()
                    .zip(&prices[t])
                    .map(|(node, &p)| match pop {
                        Population::Conventional => {
                            let carbon_cost = self.supply.emission_intensity * node.carbon();
                            self.conventional
                                .grid
                                .iter()
                                .map(|&x| r.conventional_running(t, x, carbon_cost, p, c_max))
                                .collect()
                        }
                        Population::Renewable => self
                            .renewable
                            .grid
                            .iter()
                            .map(|&x| r.renewable_running(t, x, p))
                            .collect(),
                    })
                    .collect()
            })
            .collect();
        let g = (0..=horizon)
            .map(|t| match pop {
                Population::Conventional => r.conventional_stop(t),
                Population::Renewable => r.renewable_stop(t),
            })
            .collect();
        RewardTables {
            f,
            g,
            prices: prices.to_vec(),
        }
    }
}
