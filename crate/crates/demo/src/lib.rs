//! WebAssembly bindings for the browser demo. Every export returns a JSON
//! string; the plain functions behind them are usable natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use lpfp_core::config::RunConfig;
use lpfp_core::market::{clearing_price, conventional_supply, renewable_supply};
use lpfp_core::report::run_experiment;
use lpfp_core::state_chains::{build_chain, marginal_law};

pub const MAX_YEARS: usize = 6;
pub const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Serialize)]
pub struct MeritOrder {
    pub prices: Vec<f64>,
    /// Total supply (GW) at each price.
    pub supply: Vec<f64>,
    pub renewable_gw: f64,
    pub demand_gw: f64,
    pub clearing_price: f64,
}

/// Supply curve and clearing price for one demand level, with the
/// conventional fleet at its stationary cost law scaled by `active` and a
/// share `built` of the renewable projects in service.
pub fn merit_order(
    carbon: f64,
    demand: f64,
    active: f64,
    built: f64,
) -> Result<MeritOrder, String> {
    let config = RunConfig::setting2();
    let conventional = build_chain(&config.conventional_params()).map_err(|e| e.to_string())?;
    let renewable = build_chain(&config.renewable_params()).map_err(|e| e.to_string())?;
    let (active, built) = (active.clamp(0.0, 1.0), built.clamp(0.0, 1.0));
    let m: Vec<f64> = conventional.initial.iter().map(|p| p * active).collect();
    let m_bar: Vec<f64> = renewable
        .initial
        .iter()
        .map(|p| p * (1.0 - built))
        .collect();
    let spec = &config.supply;
    let s_r = renewable_supply(spec, &renewable.grid, &renewable.initial, &m_bar);
    let prices: Vec<f64> = (0..=150)
        .map(|k| k as f64 * spec.price_cap / 150.0)
        .collect();
    let supply = prices
        .iter()
        .map(|&p| s_r + conventional_supply(spec, carbon, &conventional.grid, &m, p))
        .collect();
    Ok(MeritOrder {
        clearing_price: clearing_price(spec, carbon, demand, &conventional.grid, &m, s_r),
        prices,
        supply,
        renewable_gw: s_r,
        demand_gw: demand,
    })
}

#[derive(Debug, Serialize)]
pub struct ChainLaw {
    pub grid: Vec<f64>,
    pub law: Vec<f64>,
    pub mean: f64,
}

/// Law after `t` steps of the marginal-cost (`"conventional"`) or
/// capacity-factor (`"renewable"`) chain.
pub fn chain_law(population: &str, t: usize) -> Result<ChainLaw, String> {
    let config = RunConfig::setting2();
    let params = match population {
        "conventional" => config.conventional_params(),
        "renewable" => config.renewable_params(),
        other => return Err(format!("unknown population `{other}`")),
    };
    let chain = build_chain(&params).map_err(|e| e.to_string())?;
    let law = marginal_law(&chain, t);
    let mean = chain.grid.iter().zip(&law).map(|(x, p)| x * p).sum();
    Ok(ChainLaw {
        grid: chain.grid,
        law,
        mean,
    })
}

#[derive(Debug, Serialize)]
pub struct GameRun {
    pub eps_conventional: Vec<f64>,
    pub eps_renewable: Vec<f64>,
    pub years: Vec<f64>,
    /// Expected installed capacities (GW).
    pub conventional_gw: Vec<f64>,
    pub renewable_gw: Vec<f64>,
    /// Expected peak price, one entry fewer than the capacities.
    pub peak_price: Vec<f64>,
}

/// Equilibrium by fictitious play on a shortened market with yearly carbon
/// adjustments, each a jump with probability `1 - stay`.
pub fn run_game(years: usize, iterations: usize, stay: f64) -> Result<GameRun, String> {
    if !(1..=MAX_YEARS).contains(&years) {
        return Err(format!("years must be between 1 and {MAX_YEARS}"));
    }
    if !(1..=MAX_ITERATIONS).contains(&iterations) {
        return Err(format!("iterations must be between 1 and {MAX_ITERATIONS}"));
    }
    let mut config = RunConfig::setting2();
    let steps = 4 * years;
    config.time.steps = steps;
    config.time.horizon_years = years as f64;
    config.rewards.horizon_years = years as f64;
    config.carbon.adjustment_dates = (1..years).map(|y| 4 * y).collect();
    config.carbon.scenarios[0].stay_prob = vec![stay.clamp(0.0, 1.0); years - 1];
    config.solver.iterations = iterations;
    config.solver.cross_check_every = 0;
    let report = run_experiment(&config).map_err(|e| e.to_string())?;
    let expectation: Vec<_> = report
        .curves
        .iter()
        .filter(|c| c.curve == "expectation")
        .collect();
    Ok(GameRun {
        eps_conventional: report
            .exploitability
            .iter()
            .map(|r| r.eps_conventional)
            .collect(),
        eps_renewable: report
            .exploitability
            .iter()
            .map(|r| r.eps_renewable)
            .collect(),
        years: expectation
            .iter()
            .map(|c| c.t as f64 * config.time.dt)
            .collect(),
        conventional_gw: expectation.iter().map(|c| c.conventional_gw).collect(),
        renewable_gw: expectation.iter().map(|c| c.renewable_gw).collect(),
        peak_price: expectation
            .iter()
            .filter_map(|c| c.prices.map(|p| p.peak))
            .collect(),
    })
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsError> {
    result
        .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = meritOrder)]
pub fn merit_order_js(
    carbon: f64,
    demand: f64,
    active: f64,
    built: f64,
) -> Result<String, JsError> {
    to_js(merit_order(carbon, demand, active, built))
}

#[wasm_bindgen(js_name = chainLaw)]
pub fn chain_law_js(population: &str, t: usize) -> Result<String, JsError> {
    to_js(chain_law(population, t))
}

#[wasm_bindgen(js_name = runGame)]
pub fn run_game_js(years: usize, iterations: usize, stay: f64) -> Result<String, JsError> {
    to_js(run_game(years, iterations, stay))
}
