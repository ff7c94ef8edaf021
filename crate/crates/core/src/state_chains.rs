//! Reflected birth-death chains approximating the CIR cost process and the
//! Jacobi capacity-factor process on a uniform grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffusionKind {
    /// `b(x) = k(θ - x)`, `σ(x) = δ √x`.
    Cir,
    /// `b(x) = k(θ - x)`, `σ(x) = δ √(x(1 - x))`.
    Jacobi,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    pub kind: DiffusionKind,
    /// `k`, per year.
    pub mean_reversion: f64,
    /// `θ`.
    pub long_run_mean: f64,
    /// `δ`.
    pub vol_coef: f64,
    pub min: f64,
    pub max: f64,
    /// Time step in years.
    pub dt: f64,
}

impl DiffusionParams {
    /// CIR parameters with `δ` set so the stationary law has standard deviation `std`.
    pub fn cir_from_std(k: f64, theta: f64, std: f64, min: f64, max: f64, dt: f64) -> Self {
        DiffusionParams {
            kind: DiffusionKind::Cir,
            mean_reversion: k,
            long_run_mean: theta,
            vol_coef: std * (2.0 * k / theta).sqrt(),
            min,
            max,
            dt,
        }
    }

    /// Jacobi parameters with `δ` set so the stationary law has standard deviation `std`.
    pub fn jacobi_from_std(k: f64, theta: f64, std: f64, min: f64, max: f64, dt: f64) -> Self {
        DiffusionParams {
            kind: DiffusionKind::Jacobi,
            mean_reversion: k,
            long_run_mean: theta,
            vol_coef: std * (2.0 * k / (theta * (1.0 - theta) - std * std)).sqrt(),
            min,
            max,
            dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidDiffusion(m.to_string()));
        if !(self.mean_reversion > 0.0) {
            return bad("mean reversion must be positive");
        }
        if !(self.vol_coef > 0.0) {
            return bad("volatility coefficient must be positive");
        }
        if !(self.min < self.max) {
            return bad("range must satisfy min < max");
        }
        if !(self.dt > 0.0) {
            return bad("time step must be positive");
        }
        match self.kind {
            DiffusionKind::Cir if self.min < 0.0 => bad("CIR range must be nonnegative"),
            DiffusionKind::Jacobi if self.min < 0.0 || self.max > 1.0 => {
                bad("Jacobi range must lie in [0, 1]")
            }
            _ => Ok(()),
        }
    }

    pub fn drift(&self, x: f64) -> f64 {
        self.mean_reversion * (self.long_run_mean - x)
    }

    pub fn variance(&self, x: f64) -> f64 {
        let d2 = self.vol_coef * self.vol_coef;
        match self.kind {
            DiffusionKind::Cir => d2 * x,
            DiffusionKind::Jacobi => d2 * x * (1.0 - x),
        }
    }

    /// Shape parameters of the stationary law: gamma `(shape, scale)` for CIR,
    /// beta `(a, b)` for Jacobi.
    pub fn stationary_shape(&self) -> (f64, f64) {
        let (k, theta, d2) = (
            self.mean_reversion,
            self.long_run_mean,
            self.vol_coef * self.vol_coef,
        );
        match self.kind {
            DiffusionKind::Cir => (2.0 * theta * k / d2, d2 / (2.0 * k)),
            DiffusionKind::Jacobi => (2.0 * k * theta / d2, 2.0 * k * (1.0 - theta) / d2),
        }
    }
}

/// Grid step `Δx` and number of intervals `n`, chosen so one step matches
/// one standard deviation of a time step at the long-run mean.
pub fn grid_step(params: &DiffusionParams) -> Result<(f64, usize)> {
    params.validate()?;
    let range = params.max - params.min;
    let step = params.variance(params.long_run_mean).sqrt() * params.dt.sqrt();
    let n = (range / step).floor();
    if !(n >= 1.0) {
        return Err(Error::GridTooCoarse { range, step });
    }
    let n = n as usize;
    Ok((range / n as f64, n))
}

/// Finite-state chain: grid, row-stochastic transition matrix, initial law.
#[derive(Clone, Debug, Serialize)]
pub struct GridChain {
    pub grid: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    #[serde(skip)]
    sparse: Vec<Vec<(usize, f64)>>,
}

impl GridChain {
    /// Chain from explicit parts; rows must be stochastic.
    pub fn new(grid: Vec<f64>, transition: Vec<Vec<f64>>, initial: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if n == 0 || transition.len() != n || initial.len() != n {
            return Err(Error::Dimension(
                "chain parts have inconsistent sizes".into(),
            ));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != n || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Numerical(format!(
                    "row {i} is not a probability row"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Numerical(format!("row {i} sums to {s}")));
            }
        }
        let mass: f64 = initial.iter().sum();
        if initial.iter().any(|&p| p < 0.0) || (mass - 1.0).abs() > 1e-12 {
            return Err(Error::Numerical(
                "initial law is not a probability vector".into(),
            ));
        }
        let sparse = transition
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(j, &p)| (j, p))
                    .collect()
            })
            .collect();
        Ok(GridChain {
            grid,
            transition,
            initial,
            sparse,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Nonzero entries `(j, π(i, j))` of row `i`.
    pub fn successors(&self, i: usize) -> &[(usize, f64)] {
        &self.sparse[i]
    }

    /// One forward step `ν ↦ ν π`.
    pub fn step(&self, law: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, &w) in law.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for &(j, p) in &self.sparse[i] {
                out[j] += w * p;
            }
        }
        out
    }

    /// `E[φ(X_{t+1}) | X_t = x_i]` for every `i`.
    pub fn expect(&self, phi: &[f64]) -> Vec<f64> {
        self.sparse
            .iter()
            .map(|row| row.iter().map(|&(j, p)| p * phi[j]).sum())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain serializes")
    }
}

/// Builds the reflected chain on the grid chosen by [`grid_step`], with the
/// stationary law discretized on the grid as initial distribution.
pub fn build_chain(params: &DiffusionParams) -> Result<GridChain> {
    let (dx, n) = grid_step(params)?;
    let grid: Vec<f64> = (0..=n)
        .map(|k| {
            if k == n {
                params.max
            } else {
                params.min + k as f64 * dx
            }
        })
        .collect();
    let mut transition = vec![vec![0.0; n + 1]; n + 1];
    transition[0][1] = 1.0;
    transition[n][n - 1] = 1.0;
    for i in 1..n {
        let x = grid[i];
        let (b, s2) = (params.drift(x), params.variance(x));
        let denom = s2 + dx * b.abs();
        if !(denom > 0.0) {
            return Err(Error::InvalidDiffusion(format!(
                "zero local variance and drift at x = {x}"
            )));
        }
        transition[i][i + 1] = (s2 / 2.0 + dx * b.max(0.0)) / denom;
        transition[i][i - 1] = (s2 / 2.0 - dx * b.min(0.0)) / denom;
    }
    let initial = initial_distribution(params, &grid)?;
    GridChain::new(grid, transition, initial)
}

/// Stationary density (gamma for CIR, beta for Jacobi) evaluated on the grid
/// and normalized to a probability vector.
pub fn initial_distribution(params: &DiffusionParams, grid: &[f64]) -> Result<Vec<f64>> {
    let (a, b) = params.stationary_shape();
    let log_density = |x: f64| -> Result<f64> {
        match params.kind {
            DiffusionKind::Cir => {
                if x < 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                let scale = b;
                Ok(xlogy(a - 1.0, x)? - x / scale)
            }
            DiffusionKind::Jacobi => {
                if x <= 0.0 || x >= 1.0 {
                    return Err(Error::DegenerateDensity(format!(
                        "beta density evaluated at grid endpoint {x}"
                    )));
                }
                Ok((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln())
            }
        }
    };
    let logs = grid
        .iter()
        .map(|&x| log_density(x))
        .collect::<Result<Vec<_>>>()?;
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::DegenerateDensity(
            "density vanishes on every grid point".into(),
        ));
    }
    let weights: Vec<f64> = logs.iter().map(|&l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// `c · ln x` with the convention `0 · ln 0 = 0`.
fn xlogy(c: f64, x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(c * x.ln())
    } else if c > 0.0 {
        Ok(f64::NEG_INFINITY)
    } else if c == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::DegenerateDensity(
            "gamma density is infinite at the origin (shape < 1)".into(),
        ))
    }
}

/// Law of `X_t` started from the chain's initial distribution.
pub fn marginal_law(chain: &GridChain, t: usize) -> Vec<f64> {
    (0..t).fold(chain.initial.clone(), |law, _| chain.step(&law))
}
