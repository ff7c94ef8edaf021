//! Linear-programming fictitious play: both populations best-respond to the
//! same running average of past best responses.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{
    best_response_dp, best_response_lp, evaluate_gamma, forward_occupation, MeanFieldProfile,
    OccupationPair, Population, RewardTables, SolverBackend, StoppingRule, TieBreak,
    DEFAULT_VAR_LIMIT,
};
use crate::model::MarketModel;
use crate::scenario_tree::CommonNoiseTree;
use crate::state_chains::GridChain;

/// Relative slack allowed on the sign of exploitability.
pub const EXPLOITABILITY_TOL: f64 = 1e-9;

/// A game in which each population's rewards depend on the profile only
/// through precomputed tables.
pub trait MeanFieldGame {
    fn tree(&self) -> &CommonNoiseTree;

    fn chain(&self, pop: Population) -> &GridChain;

    fn reward_tables(&self, profile: &MeanFieldProfile) -> Result<[RewardTables; 2]>;
}

impl MeanFieldGame for MarketModel {
    fn tree(&self) -> &CommonNoiseTree {
        &self.tree
    }

    fn chain(&self, pop: Population) -> &GridChain {
        MarketModel::chain(self, pop)
    }

    fn reward_tables(&self, profile: &MeanFieldProfile) -> Result<[RewardTables; 2]> {
        let prices = self.prices(profile);
        Ok([
            MarketModel::reward_tables(self, Population::Conventional, &prices),
            MarketModel::reward_tables(self, Population::Renewable, &prices),
        ])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BestResponseMethod {
    #[default]
    Dp,
    Lp,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialProfile {
    /// Nobody stops before the horizon.
    #[default]
    Never,
    /// Everybody stops at `t = 0`.
    Immediate,
    /// Half of the mass of `Never` and half of `Immediate`.
    Uniform,
    /// A pure rule drawn with the run seed.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpOptions {
    pub iterations: usize,
    pub method: BestResponseMethod,
    pub lp_backend: SolverBackend,
    /// Solve the other route every this many iterations and compare values;
    /// `0` disables the check.
    pub cross_check_every: usize,
    /// Stop once both exploitabilities drop below this fraction of their
    /// initial values.
    pub early_exit: Option<f64>,
    pub divergence_window: usize,
    pub divergence_factor: f64,
    pub initial: InitialProfile,
    pub seed: u64,
    pub var_limit: usize,
}

impl Default for FpOptions {
    fn default() -> Self {
        FpOptions {
            iterations: 200,
            method: BestResponseMethod::Dp,
            lp_backend: SolverBackend::Auto,
            cross_check_every: 10,
            early_exit: None,
            divergence_window: 20,
            divergence_factor: 10.0,
            initial: InitialProfile::Never,
            seed: 0,
            var_limit: DEFAULT_VAR_LIMIT,
        }
    }
}

/// Exploitability and reward values of both populations at one averaged profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpRecord {
    pub iter: usize,
    pub eps_conventional: f64,
    pub eps_renewable: f64,
    /// `Γ` of the averaged profile against itself.
    pub gamma_conventional: f64,
    pub gamma_renewable: f64,
}

impl FpRecord {
    pub fn max_eps(&self) -> f64 {
        self.eps_conventional.max(self.eps_renewable)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub iter: usize,
    pub population: Population,
    pub dp_value: f64,
    pub lp_value: f64,
}

#[derive(Clone, Debug)]
pub struct FpState {
    /// Number of averaging steps performed.
    pub iteration: usize,
    pub average: MeanFieldProfile,
    /// Record of the initial profile (iteration 0).
    pub initial: FpRecord,
    /// One record per averaging step, `iter = 1..=iteration`.
    pub history: Vec<FpRecord>,
    pub cross_checks: Vec<CrossCheck>,
}

impl FpState {
    /// `iter,eps_c,eps_r,gamma_c,gamma_r` rows with a header line.
    pub fn exploitability_csv(&self) -> String {
        let mut s = String::from("iter,eps_c,eps_r,gamma_c,gamma_r\n");
        for r in &self.history {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e}",
                r.iter,
                r.eps_conventional,
                r.eps_renewable,
                r.gamma_conventional,
                r.gamma_renewable
            );
        }
        s
    }
}

/// Best responses and exploitability of both populations against a profile.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub tables: [RewardTables; 2],
    pub best_values: [f64; 2],
    pub best_responses: [OccupationPair; 2],
    pub gammas: [f64; 2],
}

impl Evaluation {
    pub fn exploitability(&self) -> [f64; 2] {
        [
            self.best_values[0] - self.gammas[0],
            self.best_values[1] - self.gammas[1],
        ]
    }
}

fn occupation(game: &impl MeanFieldGame, pop: Population, rule: &StoppingRule) -> OccupationPair {
    forward_occupation(rule, game.chain(pop), game.tree())
}

/// Starting profile for fictitious play.
pub fn initial_profile(
    game: &impl MeanFieldGame,
    kind: InitialProfile,
    seed: u64,
) -> MeanFieldProfile {
    let tree = game.tree();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |pop: Population| {
        let n = game.chain(pop).len();
        match kind {
            InitialProfile::Never => occupation(game, pop, &StoppingRule::never(tree, n)),
            InitialProfile::Immediate => occupation(game, pop, &StoppingRule::immediately(tree, n)),
            InitialProfile::Uniform => {
                let a = occupation(game, pop, &StoppingRule::never(tree, n));
                let b = occupation(game, pop, &StoppingRule::immediately(tree, n));
                a.combine(0.5, &b, 0.5)
            }
            InitialProfile::Random => {
                let rule = StoppingRule::from_fn(tree, n, |_, _, _| rng.gen_bool(0.1));
                occupation(game, pop, &rule)
            }
        }
    };
    MeanFieldProfile {
        conventional: make(Population::Conventional),
        renewable: make(Population::Renewable),
    }
}

/// `ℓ/(ℓ+1) · old + 1/(ℓ+1) · new`.
pub fn average(old: &MeanFieldProfile, new: &MeanFieldProfile, l: usize) -> MeanFieldProfile {
    let a = l as f64 / (l as f64 + 1.0);
    let b = 1.0 / (l as f64 + 1.0);
    MeanFieldProfile {
        conventional: old.conventional.combine(a, &new.conventional, b),
        renewable: old.renewable.combine(a, &new.renewable, b),
    }
}

fn pop_index(pop: Population) -> usize {
    match pop {
        Population::Conventional => 0,
        Population::Renewable => 1,
    }
}

/// Best responses of both populations to `profile`, with their exploitability.
pub fn evaluate(
    game: &impl MeanFieldGame,
    profile: &MeanFieldProfile,
    method: BestResponseMethod,
    options: &FpOptions,
) -> Result<Evaluation> {
    let tables = game.reward_tables(profile)?;
    let tree = game.tree();
    let mut best_values = [0.0; 2];
    let mut gammas = [0.0; 2];
    let mut responses = Vec::with_capacity(2);
    for pop in Population::ALL {
        let k = pop_index(pop);
        let chain = game.chain(pop);
        let (value, occ) = match method {
            BestResponseMethod::Dp => {
                let dp = best_response_dp(&tables[k], chain, tree, TieBreak::Stop);
                let occ = forward_occupation(&dp.rule, chain, tree);
                (dp.value, occ)
            }
            BestResponseMethod::Lp => {
                let lp = crate::lp::assemble_constraints(chain, tree, options.var_limit)?;
                let solver = options.lp_backend.solver_for(&lp);
                let br =
                    best_response_lp(&tables[k], chain, tree, solver.as_ref(), options.var_limit)?;
                (br.value, br.occupation)
            }
        };
        let gamma = evaluate_gamma(&tables[k], profile.get(pop), tree);
        let eps = value - gamma;
        if eps < -EXPLOITABILITY_TOL * value.abs().max(1.0) {
            return Err(Error::Numerical(format!(
                "{pop:?} exploitability {eps:e} is negative: best response {value} below own value {gamma}"
            )));
        }
        best_values[k] = value;
        gammas[k] = gamma;
        responses.push(occ);
    }
    let renewable = responses.pop().expect("two populations");
    let conventional = responses.pop().expect("two populations");
    Ok(Evaluation {
        tables,
        best_values,
        best_responses: [conventional, renewable],
        gammas,
    })
}

/// Exploitability `(ε_C, ε_R)` of a profile, with best responses by dynamic
/// programming.
pub fn exploitability(game: &impl MeanFieldGame, profile: &MeanFieldProfile) -> Result<[f64; 2]> {
    Ok(evaluate(game, profile, BestResponseMethod::Dp, &FpOptions::default())?.exploitability())
}

fn record(iter: usize, eval: &Evaluation) -> FpRecord {
    let [eps_c, eps_r] = eval.exploitability();
    FpRecord {
        iter,
        eps_conventional: eps_c,
        eps_renewable: eps_r,
        gamma_conventional: eval.gammas[0],
        gamma_renewable: eval.gammas[1],
    }
}

fn cross_check(
    game: &impl MeanFieldGame,
    eval: &Evaluation,
    iter: usize,
    options: &FpOptions,
) -> Result<Vec<CrossCheck>> {
    let tree = game.tree();
    let mut out = Vec::with_capacity(2);
    for pop in Population::ALL {
        let k = pop_index(pop);
        let chain = game.chain(pop);
        let dp = best_response_dp(&eval.tables[k], chain, tree, TieBreak::Stop).value;
        let lp_problem = crate::lp::assemble_constraints(chain, tree, options.var_limit)?;
        let solver = options.lp_backend.solver_for(&lp_problem);
        let lp = best_response_lp(
            &eval.tables[k],
            chain,
            tree,
            solver.as_ref(),
            options.var_limit,
        )?
        .value;
        if (dp - lp).abs() > 1e-8 * dp.abs().max(1.0) {
            return Err(Error::Numerical(format!(
                "iteration {iter}: {pop:?} best-response values disagree (dp {dp}, lp {lp})"
            )));
        }
        out.push(CrossCheck {
            iter,
            population: pop,
            dp_value: dp,
            lp_value: lp,
        });
    }
    Ok(out)
}

/// Runs fictitious play from the configured initial profile.
pub fn lpfp(game: &impl MeanFieldGame, options: &FpOptions) -> Result<FpState> {
    let start = initial_profile(game, options.initial, options.seed);
    lpfp_from(game, start, options)
}

/// Runs fictitious play from an explicit initial profile.
///
/// At step `ℓ` both populations best-respond to the average `avg^ℓ`, then
/// `avg^{ℓ+1} = ℓ/(ℓ+1) avg^ℓ + 1/(ℓ+1) BR(avg^ℓ)`. The record for
/// iteration `ℓ + 1` holds the exploitability of `avg^{ℓ+1}`.
pub fn lpfp_from(
    game: &impl MeanFieldGame,
    start: MeanFieldProfile,
    options: &FpOptions,
) -> Result<FpState> {
    if options.iterations == 0 {
        return Err(Error::Config(
            "fictitious play needs at least one iteration".into(),
        ));
    }
    let mut eval = evaluate(game, &start, options.method, options)?;
    let mut state = FpState {
        iteration: 0,
        average: start,
        initial: record(0, &eval),
        history: Vec::with_capacity(options.iterations),
        cross_checks: Vec::new(),
    };
    for l in 0..options.iterations {
        let [c, r] = eval.best_responses.clone();
        let response = MeanFieldProfile {
            conventional: c,
            renewable: r,
        };
        state.average = average(&state.average, &response, l);
        state.iteration = l + 1;
        eval = evaluate(game, &state.average, options.method, options)?;
        let rec = record(l + 1, &eval);
        state.history.push(rec);
        if options.cross_check_every > 0 && (l + 1) % options.cross_check_every == 0 {
            state
                .cross_checks
                .extend(cross_check(game, &eval, l + 1, options)?);
        }
        let w = options.divergence_window;
        if w > 0 && state.history.len() > w {
            let earlier = state.history[state.history.len() - 1 - w].max_eps();
            let slack = EXPLOITABILITY_TOL * state.initial.max_eps().max(1.0);
            if rec.max_eps() > options.divergence_factor * earlier + slack {
                return Err(Error::Diverged(format!(
                    "exploitability rose from {earlier:e} to {:e} between iterations {} and {}",
                    rec.max_eps(),
                    l + 1 - w,
                    l + 1
                )));
            }
        }
        if let Some(tol) = options.early_exit {
            let init = state.initial;
            if rec.eps_conventional <= tol * init.eps_conventional
                && rec.eps_renewable <= tol * init.eps_renewable
            {
                break;
            }
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::testing::{random_tables, rng, small_tree, three_state_chain};
    use crate::lp::StoppingRule;

    /// Rewards that ignore the profile entirely.
    struct FixedGame {
        tree: CommonNoiseTree,
        chains: [GridChain; 2],
        tables: [RewardTables; 2],
    }

    impl MeanFieldGame for FixedGame {
        fn tree(&self) -> &CommonNoiseTree {
            &self.tree
        }
        fn chain(&self, pop: Population) -> &GridChain {
            &self.chains[pop_index(pop)]
        }
        fn reward_tables(&self, _: &MeanFieldProfile) -> Result<[RewardTables; 2]> {
            Ok(self.tables.clone())
        }
    }

    fn fixed_game(seed: u64) -> FixedGame {
        let mut rng = rng(seed);
        let tree = small_tree(4, 0.4);
        let chains = [three_state_chain(&mut rng), three_state_chain(&mut rng)];
        let tables = [
            random_tables(&tree, 3, &mut rng),
            random_tables(&tree, 3, &mut rng),
        ];
        FixedGame {
            tree,
            chains,
            tables,
        }
    }

    #[test]
    fn degenerate_game_has_zero_exploitability_after_one_step() {
        let game = fixed_game(3);
        let options = FpOptions {
            iterations: 5,
            cross_check_every: 1,
            ..FpOptions::default()
        };
        let state = lpfp(&game, &options).unwrap();
        assert_eq!(state.history.len(), 5);
        for rec in &state.history {
            assert!(rec.max_eps().abs() < 1e-12, "{rec:?}");
        }
        assert_eq!(state.cross_checks.len(), 10);
    }

    #[test]
    fn average_weights() {
        let game = fixed_game(5);
        let never = initial_profile(&game, InitialProfile::Never, 0);
        let now = initial_profile(&game, InitialProfile::Immediate, 0);
        assert_eq!(average(&never, &now, 0), now);
        let half = average(&never, &now, 1);
        assert_eq!(half, initial_profile(&game, InitialProfile::Uniform, 0));
    }

    #[test]
    fn two_iterations_average_first_two_responses() {
        let model = crate::model::tests::small_model();
        let options = FpOptions {
            iterations: 2,
            cross_check_every: 0,
            ..FpOptions::default()
        };
        let start = initial_profile(&model, InitialProfile::Never, 0);
        let br0 = evaluate(&model, &start, BestResponseMethod::Dp, &options).unwrap();
        let avg1 = MeanFieldProfile {
            conventional: br0.best_responses[0].clone(),
            renewable: br0.best_responses[1].clone(),
        };
        let br1 = evaluate(&model, &avg1, BestResponseMethod::Dp, &options).unwrap();
        let state = lpfp_from(&model, start, &options).unwrap();
        let expected_c = br0.best_responses[0].combine(0.5, &br1.best_responses[0], 0.5);
        let expected_r = br0.best_responses[1].combine(0.5, &br1.best_responses[1], 0.5);
        assert_eq!(state.average.conventional, expected_c);
        assert_eq!(state.average.renewable, expected_r);
    }

    #[test]
    fn averaging_keeps_rows_satisfied() {
        let game = fixed_game(7);
        let mut rng = rng(8);
        let tree = &game.tree;
        let pair = |rng: &mut ChaCha8Rng| {
            let occ = |pop: Population, rng: &mut ChaCha8Rng| {
                let rule = StoppingRule::from_fn(tree, 3, |_, _, _| rng.gen_bool(0.5));
                forward_occupation(&rule, game.chain(pop), tree)
            };
            MeanFieldProfile {
                conventional: occ(Population::Conventional, rng),
                renewable: occ(Population::Renewable, rng),
            }
        };
        let lp = crate::lp::assemble_constraints(&game.chains[0], tree, DEFAULT_VAR_LIMIT).unwrap();
        let mut avg = pair(&mut rng);
        for l in 1..30 {
            avg = average(&avg, &pair(&mut rng), l);
            assert!(lp.max_residual(&lp.pack(&avg.conventional)) < 1e-12);
        }
    }

    #[test]
    fn market_run_is_deterministic_and_improves() {
        let model = crate::model::tests::small_model();
        let options = FpOptions {
            iterations: 40,
            cross_check_every: 20,
            ..FpOptions::default()
        };
        let a = lpfp(&model, &options).unwrap();
        let b = lpfp(&model, &options).unwrap();
        let series = |s: &FpState| {
            s.history
                .iter()
                .map(|r| r.max_eps().to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(series(&a), series(&b));
        let last = a.history.last().unwrap().max_eps();
        assert!(last < a.initial.max_eps());
        // running minimum is nonincreasing by construction; the final value is small
        assert!(last < 0.2 * a.initial.max_eps());
        assert!(a
            .cross_checks
            .iter()
            .all(|c| (c.dp_value - c.lp_value).abs() < 1e-6));
    }

    #[test]
    fn lp_route_matches_dp_route() {
        let model = crate::model::tests::small_model();
        let dp = FpOptions {
            iterations: 6,
            cross_check_every: 0,
            ..FpOptions::default()
        };
        let lp = FpOptions {
            method: BestResponseMethod::Lp,
            ..dp.clone()
        };
        let a = lpfp(&model, &dp).unwrap();
        let b = lpfp(&model, &lp).unwrap();
        for (x, y) in a.history.iter().zip(&b.history) {
            // vertices may differ under ties; values may not
            assert!((x.max_eps() - y.max_eps()).abs() < 1e-6 * a.initial.max_eps().max(1.0));
        }
    }

    #[test]
    fn zero_iterations_rejected() {
        let game = fixed_game(1);
        let options = FpOptions {
            iterations: 0,
            ..FpOptions::default()
        };
        assert!(matches!(lpfp(&game, &options), Err(Error::Config(_))));
    }

    #[test]
    fn csv_has_one_row_per_iteration() {
        let game = fixed_game(2);
        let options = FpOptions {
            iterations: 7,
            ..FpOptions::default()
        };
        let state = lpfp(&game, &options).unwrap();
        let csv = state.exploitability_csv();
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.starts_with("iter,eps_c,eps_r,gamma_c,gamma_r\n"));
    }
}
