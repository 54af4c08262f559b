//! Outer stage and the regime-level entry points.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::market::MarketParams;
use crate::policy::Regime;

use super::nash::{pure_equilibria, verify_nash, Bimatrix};
use super::price::{certify, price_stage_equilibrium};
use super::quality::{quality_stage_equilibrium, QualityStage};
use super::{select_equilibrium, EquilibriumOutcome, Existence, Grids, SolverConfig, SolverError, StageCertificate};

type Key = (u64, u64);

/// Solver bound to one economy. Quality-stage continuations are memoized per
/// XAI pair, so sweeping several regimes over the same levels reuses work.
pub struct Solver {
    params: MarketParams,
    grids: Grids,
    cache: Mutex<HashMap<Key, Arc<Result<QualityStage, SolverError>>>>,
}

impl Solver {
    pub fn new(params: MarketParams, config: &SolverConfig) -> Result<Self, SolverError> {
        let grids = config.resolve(&params)?;
        Ok(Solver {
            params,
            grids,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn grids(&self) -> &Grids {
        &self.grids
    }

    pub fn epsilon(&self) -> f64 {
        self.grids.epsilon
    }

    /// Quality and price continuation of the XAI pair `(x1, x2)`.
    pub fn continuation(&self, x1: f64, x2: f64) -> Result<QualityStage, SolverError> {
        if x1 > x2 {
            return self.continuation(x2, x1).map(|s| s.swapped());
        }
        let key = (x1.to_bits(), x2.to_bits());
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return (**hit).clone();
        }
        // Computed outside the lock; a concurrent duplicate computes the
        // same deterministic value.
        let value = Arc::new(quality_stage_equilibrium(&self.params, [x1, x2], &self.grids));
        self.cache.lock().unwrap().entry(key).or_insert(value.clone());
        (*value).clone()
    }

    pub fn solve(&self, regime: &Regime) -> Result<EquilibriumOutcome, SolverError> {
        match *regime {
            Regime::Mandatory { x_bar } => self.mandatory(x_bar),
            Regime::Optional { x_bar } => self.xai_stage(&opt_in_actions(x_bar)),
            Regime::Unregulated => self.xai_stage(&self.grids.xai.clone()),
        }
    }

    fn mandatory(&self, x_bar: f64) -> Result<EquilibriumOutcome, SolverError> {
        let stage = self.continuation(x_bar, x_bar)?;
        let existence = if stage.found {
            Existence::from_list(stage.equilibria.clone())
        } else {
            Existence::NonePure
        };
        let certificate = StageCertificate {
            price: stage.price.certificate.gains,
            quality: stage.certificate.gains,
            xai: None,
        };
        Ok(EquilibriumOutcome::assemble(
            &self.params,
            stage.strategies,
            certificate,
            existence,
        ))
    }

    /// Both firms pick from `actions`; every pair is valued by its quality and
    /// price continuation.
    pub fn xai_stage(&self, actions: &[f64]) -> Result<EquilibriumOutcome, SolverError> {
        let m = actions.len();
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
        let solved: Vec<Result<QualityStage, SolverError>> = pairs
            .par_iter()
            .map(|&(i, j)| self.continuation(actions[i], actions[j]))
            .collect();
        let mut table: Vec<Option<QualityStage>> = vec![None; m * m];
        for (&(i, j), stage) in pairs.iter().zip(solved) {
            let stage = stage?;
            if i != j {
                table[j * m + i] = Some(stage.swapped());
            }
            table[i * m + j] = Some(stage);
        }
        let table: Vec<QualityStage> = table.into_iter().map(|s| s.expect("filled")).collect();
        let game = Bimatrix::from_fn(m, m, |i, j| table[i * m + j].profits);
        let eligible: Vec<bool> = table.iter().map(|s| s.found).collect();
        let cells = pure_equilibria(&game, self.grids.epsilon, Some(&eligible));

        let outcome_at = |(i, j): (usize, usize), existence: Existence| {
            let stage = &table[i * m + j];
            EquilibriumOutcome::assemble(
                &self.params,
                stage.strategies,
                StageCertificate {
                    price: stage.price.certificate.gains,
                    quality: stage.certificate.gains,
                    xai: Some(game.certificate(i, j).gains),
                },
                existence,
            )
        };

        if cells.is_empty() {
            let regret = |k: usize| game.certificate(k / m, k % m).max_gain();
            let best = (0..m * m)
                .min_by(|&a, &b| regret(a).total_cmp(&regret(b)))
                .expect("non-empty action set");
            return Ok(outcome_at((best / m, best % m), Existence::NonePure));
        }
        let symmetric: Vec<bool> = cells.iter().map(|&(i, j)| i == j).collect();
        let candidates: Vec<EquilibriumOutcome> = cells.iter().map(|&c| outcome_at(c, Existence::Unique)).collect();
        let welfare: Vec<f64> = candidates.iter().map(|o| o.total_welfare).collect();
        let pick = select_equilibrium(&symmetric, &welfare).expect("non-empty");
        let existence = Existence::from_list(candidates.iter().map(|o| o.strategies).collect());
        let mut selected = candidates[pick].clone();
        selected.existence = existence;
        Ok(selected)
    }
}

fn opt_in_actions(x_bar: f64) -> Vec<f64> {
    if x_bar > 0.0 {
        vec![0.0, x_bar]
    } else {
        vec![0.0]
    }
}

/// Subgame-perfect equilibrium of one economy under one regime.
pub fn solve_spne(
    params: &MarketParams,
    regime: &Regime,
    config: &SolverConfig,
) -> Result<EquilibriumOutcome, SolverError> {
    Solver::new(*params, config)?.solve(regime)
}

/// Pure equilibria of a 2x2 opt-in game; action 0 = no XAI, 1 = offer it.
/// `payoffs[a1][a2]` holds both firms' payoffs.
pub fn opt_in_equilibria(payoffs: [[[f64; 2]; 2]; 2], epsilon: f64) -> Vec<(usize, usize)> {
    let game = Bimatrix::from_fn(2, 2, |i, j| payoffs[i][j]);
    pure_equilibria(&game, epsilon, None)
}

/// Re-derives an outcome's certificate from scratch: price deviations on the
/// price grid, quality deviations with freshly solved price subgames, and XAI
/// deviations over the regime's action set. Independent of the tables and
/// warm starts used to find the equilibrium.
pub fn recertify(
    solver: &Solver,
    regime: &Regime,
    outcome: &EquilibriumOutcome,
) -> Result<StageCertificate, SolverError> {
    let params = solver.params();
    let grids = solver.grids();
    let [s1, s2] = outcome.strategies;
    let xs = [s1.x, s2.x];
    let qs = [s1.q, s2.q];
    let price = certify(params, xs, qs, [s1.p, s2.p], grids).gains;

    let quality = verify_nash(
        |player, q: [f64; 2]| {
            if q == qs {
                outcome.profits[player]
            } else {
                price_stage_equilibrium(params, xs, q, grids, None).profits[player]
            }
        },
        qs,
        [&grids.quality, &grids.quality],
    )
    .gains;

    let actions = match *regime {
        Regime::Mandatory { .. } => None,
        Regime::Optional { x_bar } => Some(opt_in_actions(x_bar)),
        Regime::Unregulated => Some(grids.xai.clone()),
    };
    let xai = match actions {
        None => None,
        Some(actions) => {
            let mut values = Vec::new();
            for a in &actions {
                values.push((
                    solver.continuation(*a, xs[1])?.profits[0],
                    solver.continuation(xs[0], *a)?.profits[1],
                ));
            }
            let idx = |x: f64| actions.iter().position(|&a| a == x).unwrap_or(usize::MAX);
            let (i1, i2) = (idx(xs[0]), idx(xs[1]));
            let payoff = |player: usize, a: [usize; 2]| {
                if a == [i1, i2] {
                    outcome.profits[player]
                } else if player == 0 {
                    values[a[0]].0
                } else {
                    values[a[1]].1
                }
            };
            let idxs: Vec<usize> = (0..actions.len()).collect();
            Some(verify_nash(payoff, [i1, i2], [&idxs, &idxs]).gains)
        }
    };
    Ok(StageCertificate { price, quality, xai })
}
