//! Demand decomposition, producer supply curves and the merit-order price.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Share of peak hours in a week.
pub const PEAK_SHARE: f64 = 65.0 / 168.0;
pub const OFFPEAK_SHARE: f64 = 1.0 - PEAK_SHARE;

/// Bisection tolerance on the clearing price (currency/MWh).
pub const PRICE_TOL: f64 = 1e-9;

/// Demand `D_t = d(t) + β(z - z0)` split into peak and off-peak blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    /// `d(t)` in GW, one entry per time index `0..=T`.
    pub baseline: Vec<f64>,
    /// Carbon sensitivity `β` (GW per currency/tonCO2).
    pub beta: f64,
    /// Seasonal normalization `λ_t`, one entry per time index.
    pub seasonal: Vec<f64>,
    /// Peak / off-peak demand ratio `r_d`.
    pub peak_ratio: f64,
}

impl DemandModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_ratio >= 1.0) {
            return Err(Error::InvalidMarket("peak ratio must be at least 1".into()));
        }
        if self.baseline.len() != self.seasonal.len() {
            return Err(Error::InvalidMarket(
                "baseline and seasonal series differ in length".into(),
            ));
        }
        if self.seasonal.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidMarket(
                "seasonal factors must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `c̄_p = r_d / (r_d c_p + c_o)`.
    pub fn peak_coef(&self) -> f64 {
        self.peak_ratio / (self.peak_ratio * PEAK_SHARE + OFFPEAK_SHARE)
    }

    /// `c̄_o = 1 / (r_d c_p + c_o)`.
    pub fn offpeak_coef(&self) -> f64 {
        1.0 / (self.peak_ratio * PEAK_SHARE + OFFPEAK_SHARE)
    }

    /// Peak and off-peak demand (GW) at time `t` with carbon price `z`.
    pub fn peak_offpeak(&self, t: usize, z: f64, z0: f64) -> Result<(f64, f64)> {
        let (Some(&d), Some(&lambda)) = (self.baseline.get(t), self.seasonal.get(t)) else {
            return Err(Error::TimeOutOfRange {
                requested: t,
                limit: self.baseline.len().saturating_sub(1),
            });
        };
        let demand = d + self.beta * (z - z0);
        if demand < 0.0 {
            return Err(Error::NegativeDemand { t, demand });
        }
        Ok((
            self.peak_coef() * lambda * demand,
            self.offpeak_coef() * lambda * demand,
        ))
    }
}

/// Installed capacities and supply-side constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupplySpec {
    /// `I_C`, GW of conventional capacity that may exit.
    pub conventional_capacity: f64,
    /// `I_R`, GW of renewable capacity that may enter.
    pub renewable_capacity: f64,
    /// `I_R^b`, GW of renewable capacity installed from the start.
    pub renewable_base_capacity: f64,
    /// `S^b(p_max)`: the baseline supply is linear, `S^b(p) = this · p / p_max`.
    pub baseline_supply_at_cap: f64,
    /// `p_max`, currency/MWh.
    pub price_cap: f64,
    /// `c_max = c(1)`, currency/MWh.
    pub utilization_cost_max: f64,
    /// `β̃`, tonCO2/MWh.
    pub emission_intensity: f64,
}

impl SupplySpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.conventional_capacity,
            self.renewable_capacity,
            self.renewable_base_capacity,
            self.baseline_supply_at_cap,
            self.price_cap,
            self.utilization_cost_max,
        ];
        if positive.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidMarket(
                "capacities, price cap and c_max must be positive".into(),
            ));
        }
        if self.emission_intensity < 0.0 {
            return Err(Error::InvalidMarket(
                "emission intensity must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Baseline conventional supply `S^b(p)` (GW).
    pub fn baseline_supply(&self, p: f64) -> f64 {
        self.baseline_supply_at_cap / self.price_cap * p.max(0.0)
    }

    /// Returns a warning when `S^b(p_max)` cannot cover the largest peak demand.
    pub fn check_baseline_cover(&self, max_peak_demand: f64) -> Option<String> {
        let cover = self.baseline_supply(self.price_cap);
        (cover < max_peak_demand).then(|| {
            format!(
                "baseline supply S^b(p_max) = {cover:.2} GW is below the maximal peak demand \
                 {max_peak_demand:.2} GW; prices may saturate at the cap"
            )
        })
    }
}

/// Optimal capacity utilization for a margin `y`.
pub fn utilization(y: f64, c_max: f64) -> f64 {
    if y > c_max {
        1.0
    } else if y >= 0.0 {
        0.5 * (1.0 + (-std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * y / c_max).sin())
    } else {
        0.0
    }
}

/// Producer gain per unit time, `G(x) = ∫_0^x ᾱ(y) dy`.
pub fn gain(x: f64, c_max: f64) -> f64 {
    if x > c_max {
        x - c_max / 2.0
    } else if x >= 0.0 {
        // cos(-π/2 + a) written as sin(a) so that G(0) is exactly 0
        let a = std::f64::consts::PI * x / c_max;
        0.5 * (x - c_max / std::f64::consts::PI * a.sin())
    } else {
        0.0
    }
}

/// Conventional supply `S^c(z, m, p)` in GW for the active mass `m` over `cost_grid`.
pub fn conventional_supply(spec: &SupplySpec, z: f64, cost_grid: &[f64], m: &[f64], p: f64) -> f64 {
    let carbon_cost = spec.emission_intensity * z;
    let active: f64 = cost_grid
        .iter()
        .zip(m)
        .map(|(&x, &w)| w * utilization(p - x - carbon_cost, spec.utilization_cost_max))
        .sum();
    spec.conventional_capacity * active + spec.baseline_supply(p)
}

/// Renewable supply `S^r(t, m̄)` in GW, where `eta` is the law of the capacity
/// factor at `t` and `m_bar` the mass of projects not yet built.
pub fn renewable_supply(spec: &SupplySpec, factor_grid: &[f64], eta: &[f64], m_bar: &[f64]) -> f64 {
    let mean = |w: &[f64]| -> f64 { factor_grid.iter().zip(w).map(|(x, w)| x * w).sum() };
    (spec.renewable_base_capacity + spec.renewable_capacity) * mean(eta)
        - spec.renewable_capacity * mean(m_bar)
}

/// Merit-order price for demand `d` given renewable supply `s_r`: the lowest
/// price at which conventional supply covers the residual demand, capped at `p_max`.
pub fn clearing_price(
    spec: &SupplySpec,
    z: f64,
    d: f64,
    cost_grid: &[f64],
    m: &[f64],
    s_r: f64,
) -> f64 {
    let residual = (d - s_r).max(0.0);
    if residual == 0.0 {
        return 0.0;
    }
    let supply = |p: f64| conventional_supply(spec, z, cost_grid, m, p);
    if supply(spec.price_cap) < residual {
        return spec.price_cap;
    }
    // doubling search for a bracket; S^b alone covers the residual at `bound`
    let bound = (residual / spec.baseline_supply(1.0)).min(spec.price_cap);
    let mut hi = bound.min(1.0);
    while supply(hi) < residual && hi < bound {
        hi = (2.0 * hi).min(bound);
    }
    let mut lo = 0.0;
    while hi - lo > PRICE_TOL {
        let mid = 0.5 * (lo + hi);
        if supply(mid) >= residual {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.min(spec.price_cap)
}

/// Peak and off-peak prices (currency/MWh).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PricePair {
    pub peak: f64,
    pub offpeak: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn supply() -> SupplySpec {
        SupplySpec {
            conventional_capacity: 35.9,
            renewable_capacity: 47.0,
            renewable_base_capacity: 35.6,
            baseline_supply_at_cap: 12.1,
            price_cap: 150.0,
            utilization_cost_max: 0.5,
            emission_intensity: 0.429,
        }
    }

    fn demand() -> DemandModel {
        DemandModel {
            baseline: vec![30.0, 31.0, 32.0],
            beta: 0.015,
            seasonal: vec![1.10, 0.93, 0.91],
            peak_ratio: 1.29,
        }
    }

    #[test]
    fn utilization_values() {
        assert_eq!(utilization(0.0, 0.5), 0.0);
        assert!((utilization(0.25, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(utilization(0.8, 0.5), 1.0);
        assert_eq!(utilization(-3.0, 0.5), 0.0);
    }

    #[test]
    fn gain_values() {
        assert_eq!(gain(-1.0, 0.5), 0.0);
        assert_eq!(gain(0.0, 0.5), 0.0);
        assert!((gain(1.0, 0.5) - 0.75).abs() < 1e-15);
        let expected = 0.5 * (0.25 - 0.5 / std::f64::consts::PI);
        assert!((gain(0.25, 0.5) - expected).abs() < 1e-15);
        assert!((gain(0.25, 0.5) - 0.04542).abs() < 1e-5);
        // continuity at c_max
        assert!((gain(0.5, 0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gain_derivative_is_utilization() {
        let h = 1e-6;
        let mut x = -1.0;
        while x <= 1.0 {
            let fd = (gain(x + h, 0.5) - gain(x - h, 0.5)) / (2.0 * h);
            assert!((fd - utilization(x, 0.5)).abs() < 1e-6, "x = {x}");
            x += 0.01;
        }
    }

    #[test]
    fn demand_split() {
        let dm = demand();
        let cp = dm.peak_coef();
        let expected = 1.29 / (1.29 * 65.0 / 168.0 + 103.0 / 168.0);
        assert!((cp - expected).abs() < 1e-15);
        assert!((cp - 1.1599).abs() < 1e-4);
        let (p, o) = dm.peak_offpeak(1, 50.0, 50.0).unwrap();
        assert!((p / o - 1.29).abs() < 1e-12);
        // recombination
        for (t, z) in [(0, 50.0), (1, 125.0), (2, 200.0)] {
            let (p, o) = dm.peak_offpeak(t, z, 50.0).unwrap();
            let total = dm.seasonal[t] * (dm.baseline[t] + dm.beta * (z - 50.0));
            assert!((PEAK_SHARE * p + OFFPEAK_SHARE * o - total).abs() < 1e-12);
        }
        let flat = DemandModel {
            beta: 0.0,
            ..demand()
        };
        assert_eq!(
            flat.peak_offpeak(0, 50.0, 50.0).unwrap(),
            flat.peak_offpeak(0, 200.0, 50.0).unwrap()
        );
    }

    #[test]
    fn negative_demand_rejected() {
        let dm = DemandModel {
            beta: 10.0,
            ..demand()
        };
        assert!(matches!(
            dm.peak_offpeak(0, 0.0, 50.0),
            Err(Error::NegativeDemand { .. })
        ));
    }

    #[test]
    fn supply_curves() {
        let s = supply();
        let grid = [0.0, 10.0, 20.0];
        assert!(
            (conventional_supply(&s, 50.0, &grid, &[0.0; 3], 60.0) - 12.1 * 60.0 / 150.0).abs()
                < 1e-12
        );
        assert_eq!(
            conventional_supply(&s, 50.0, &grid, &[0.2, 0.3, 0.5], 0.0),
            0.0
        );
        let m = [0.2, 0.3, 0.5];
        let brute: f64 = 35.9
            * (0.2 * utilization(150.0 - 0.0 - 21.45, 0.5)
                + 0.3 * utilization(150.0 - 10.0 - 21.45, 0.5)
                + 0.5 * utilization(150.0 - 20.0 - 21.45, 0.5))
            + 12.1;
        let got = conventional_supply(&s, 50.0, &grid, &m, 150.0);
        assert!((got - brute).abs() < 1e-12);
        assert!(got >= 35.9 * utilization(150.0 - 20.0 - 21.45, 0.5) + 12.1);

        let fgrid = [0.3, 0.45, 0.6];
        let eta = [0.25, 0.5, 0.25];
        let mean = 0.45;
        assert!((renewable_supply(&s, &fgrid, &eta, &eta) - 35.6 * mean).abs() < 1e-12);
        assert!((renewable_supply(&s, &fgrid, &eta, &[0.0; 3]) - 82.6 * mean).abs() < 1e-12);
    }

    #[test]
    fn price_examples() {
        let s = supply();
        let grid = [0.0, 10.0];
        // renewables cover demand
        assert_eq!(
            clearing_price(&s, 50.0, 20.0, &grid, &[0.5, 0.5], 25.0),
            0.0
        );
        // only the baseline remains: 6.05 GW -> 75
        let p = clearing_price(&s, 50.0, 16.05, &grid, &[0.0, 0.0], 10.0);
        assert!((p - 75.0).abs() < 1e-8);
        // demand above the capped supply
        assert_eq!(
            clearing_price(&s, 50.0, 500.0, &grid, &[0.5, 0.5], 10.0),
            150.0
        );
    }

    #[test]
    fn price_is_monotone_in_demand() {
        let s = supply();
        let grid: Vec<f64> = (0..13).map(|k| k as f64 * 70.0 / 12.0).collect();
        let m = vec![1.0 / 13.0; 13];
        let mut last = 0.0;
        for k in 0..200 {
            let d = 10.0 + k as f64 * 0.3;
            let p = clearing_price(&s, 75.0, d, &grid, &m, 15.0);
            assert!(p >= last - 1e-9);
            last = p;
        }
    }

    #[test]
    fn baseline_cover_warning() {
        let s = supply();
        assert!(s.check_baseline_cover(45.0).is_some());
        assert!(s.check_baseline_cover(10.0).is_none());
    }
}
