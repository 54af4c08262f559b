//! Backward induction over the XAI → quality → price game.
//!
//! Every stage is solved on a discrete strategy grid and every reported
//! equilibrium carries a certificate: the largest gain any firm could get by a
//! unilateral deviation on that stage's grid. Pure equilibria only; when none
//! exists the outcome says so instead of guessing.

mod classify;
mod nash;
mod price;
mod quality;
mod spne;

pub use classify::{classify_market, MarketClass};
pub use nash::{pure_equilibria, verify_nash, Bimatrix, NashCertificate};
pub use price::{price_best_response, price_stage_equilibrium, PriceMethod, PriceStage};
pub use quality::{quality_stage_equilibrium, QualityStage};
pub use spne::{opt_in_equilibria, recertify, solve_spne, Solver};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{evaluate, DemandProfile, SurplusReport};
use crate::market::{FirmStrategy, MarketParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: `{field}` {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("price subgame payoffs are not finite at x = ({x1}, {x2})")]
    NonConvergence { x1: f64, x2: f64 },
    #[error("outcome has no pure equilibrium")]
    NoPureEquilibrium,
}

/// Upper end and resolution of a strategy grid starting at zero. A missing
/// maximum is derived from the market parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub max: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    Coarse,
    Default,
    Fine,
}

impl std::str::FromStr for GridScale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "coarse" => Ok(GridScale::Coarse),
            "default" => Ok(GridScale::Default),
            "fine" => Ok(GridScale::Fine),
            other => Err(format!(
                "unknown grid scale `{other}` (expected coarse, default or fine)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub price_grid: GridSpec,
    pub quality_grid: GridSpec,
    /// Number of XAI levels on `[0, 1]` for the unregulated scan.
    pub xai_steps: usize,
    /// Equilibrium tolerance in profit units; `None` means
    /// `1e-6 * max(1, v + gamma)`.
    pub epsilon: Option<f64>,
    pub max_br_iterations: usize,
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::for_scale(GridScale::Default)
    }
}

impl SolverConfig {
    pub fn for_scale(scale: GridScale) -> Self {
        let (p, q, x) = match scale {
            GridScale::Coarse => (33, 17, 11),
            GridScale::Default => (65, 33, 21),
            GridScale::Fine => (129, 65, 41),
        };
        SolverConfig {
            price_grid: GridSpec { max: None, steps: p },
            quality_grid: GridSpec { max: None, steps: q },
            xai_steps: x,
            epsilon: None,
            max_br_iterations: 100,
            damping: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |field, reason: &str| {
            Err(SolverError::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        for (field, grid) in [("price_grid", self.price_grid), ("quality_grid", self.quality_grid)] {
            if grid.steps < 2 {
                return bad(field, "needs at least 2 steps");
            }
            if let Some(max) = grid.max {
                if !(max.is_finite() && max > 0.0) {
                    return bad(field, "maximum must be finite and > 0");
                }
            }
        }
        if self.xai_steps < 2 {
            return bad("xai_steps", "needs at least 2 steps");
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps > 0.0) {
                return bad("epsilon", "must be finite and > 0");
            }
        }
        if self.max_br_iterations == 0 {
            return bad("max_br_iterations", "must be >= 1");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping", "must lie in (0, 1]");
        }
        Ok(())
    }

    /// Materializes the grids for one economy.
    pub fn resolve(&self, params: &MarketParams) -> Result<Grids, SolverError> {
        self.validate()?;
        // Beyond 1/beta a unit of quality costs more than it is worth.
        let q_max = self.quality_grid.max.unwrap_or(1.0 / params.beta);
        // Nobody pays more than the best attainable gross utility.
        let p_max = self
            .price_grid
            .max
            .unwrap_or(params.v + params.gamma + q_max + params.c0);
        let epsilon = self.epsilon.unwrap_or(1e-6 * params.utility_scale());
        Ok(Grids {
            price_max: p_max,
            price_steps: self.price_grid.steps,
            quality: linspace(0.0, q_max, self.quality_grid.steps),
            xai: linspace(0.0, 1.0, self.xai_steps),
            epsilon,
            tolerance: 1e-6 * p_max / (self.price_grid.steps - 1) as f64,
            max_iterations: self.max_br_iterations,
            damping: self.damping,
        })
    }
}

/// Concrete grids and tolerances for one economy.
#[derive(Debug, Clone, PartialEq)]
pub struct Grids {
    /// Upper end of every firm's price grid.
    pub price_max: f64,
    pub price_steps: usize,
    pub quality: Vec<f64>,
    pub xai: Vec<f64>,
    pub epsilon: f64,
    /// Convergence threshold for price iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: f64,
}

impl Grids {
    /// Price grid of a firm with unit cost `cost`: `price_steps` points from
    /// the cost (clamped to the maximum) up to `price_max`. Pricing below
    /// cost never beats pricing at cost, so those prices are left out.
    pub fn price_grid(&self, cost: f64) -> Vec<f64> {
        linspace(cost.min(self.price_max), self.price_max, self.price_steps)
    }

    pub fn price_cell(&self, cost: f64) -> f64 {
        (self.price_max - cost.min(self.price_max)) / (self.price_steps - 1) as f64
    }

    pub fn quality_cell(&self) -> f64 {
        self.quality[1] - self.quality[0]
    }

    pub fn xai_cell(&self) -> f64 {
        self.xai[1] - self.xai[0]
    }
}

pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let n = steps - 1;
    (0..steps)
        .map(|i| {
            if i == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / n as f64
            }
        })
        .collect()
}

/// Largest unilateral deviation gain per firm at each stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageCertificate {
    pub price: [f64; 2],
    pub quality: [f64; 2],
    /// XAI or opt-in stage; absent when the level is mandated.
    pub xai: Option<[f64; 2]>,
}

impl StageCertificate {
    pub fn max_gain(&self) -> f64 {
        let mut all = vec![self.price[0], self.price[1], self.quality[0], self.quality[1]];
        if let Some(x) = self.xai {
            all.extend(x);
        }
        all.into_iter().fold(0.0, f64::max)
    }

    pub fn passes(&self, epsilon: f64) -> bool {
        self.max_gain() <= epsilon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Existence {
    Unique,
    /// All pure equilibria of the outermost stage, selected one included.
    Multiple(Vec<[FirmStrategy; 2]>),
    NonePure,
}

impl Existence {
    pub fn label(&self) -> &'static str {
        match self {
            Existence::Unique => "unique",
            Existence::Multiple(_) => "multiple",
            Existence::NonePure => "none_pure",
        }
    }

    pub fn is_none_pure(&self) -> bool {
        matches!(self, Existence::NonePure)
    }

    fn from_list(list: Vec<[FirmStrategy; 2]>) -> Existence {
        match list.len() {
            0 => Existence::NonePure,
            1 => Existence::Unique,
            _ => Existence::Multiple(list),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumOutcome {
    pub strategies: [FirmStrategy; 2],
    pub demand: DemandProfile,
    pub profits: [f64; 2],
    pub surplus: SurplusReport,
    pub total_welfare: f64,
    /// `None` when there is no pure equilibrium to classify.
    pub classification: Option<MarketClass>,
    pub certificate: StageCertificate,
    pub existence: Existence,
}

impl EquilibriumOutcome {
    /// Evaluates demand, surplus and welfare at a strategy pair.
    pub fn assemble(
        params: &MarketParams,
        strategies: [FirmStrategy; 2],
        certificate: StageCertificate,
        existence: Existence,
    ) -> Self {
        let (demand, surplus) = evaluate(params, &strategies[0], &strategies[1]);
        let profits = [
            crate::market::profit(&strategies[0], demand.d1, params),
            crate::market::profit(&strategies[1], demand.d2, params),
        ];
        let total_welfare = profits[0] + profits[1] + surplus.cs_total;
        let mut outcome = EquilibriumOutcome {
            strategies,
            demand,
            profits,
            surplus,
            total_welfare,
            classification: None,
            certificate,
            existence,
        };
        if !outcome.existence.is_none_pure() {
            outcome.classification = classify_market(params, &outcome).ok();
        }
        outcome
    }

    /// Number of firms offering any explanation.
    pub fn xai_adopters(&self) -> usize {
        self.strategies.iter().filter(|s| s.x > 0.0).count()
    }

    pub fn has_equilibrium(&self) -> bool {
        !self.existence.is_none_pure()
    }

    /// Same outcome with the firms' labels exchanged.
    pub fn swapped(&self, params: &MarketParams) -> Self {
        let mut out = EquilibriumOutcome::assemble(
            params,
            [self.strategies[1], self.strategies[0]],
            StageCertificate {
                price: [self.certificate.price[1], self.certificate.price[0]],
                quality: [self.certificate.quality[1], self.certificate.quality[0]],
                xai: self.certificate.xai.map(|g| [g[1], g[0]]),
            },
            match &self.existence {
                Existence::Multiple(list) => Existence::Multiple(list.iter().map(|s| [s[1], s[0]]).collect()),
                other => other.clone(),
            },
        );
        // Demands and profits come from the role-symmetric demand routine,
        // so swapping them is exact.
        out.demand.d1 = self.demand.d2;
        out.demand.d2 = self.demand.d1;
        out.demand.d0 = self.demand.d0;
        out.profits = [self.profits[1], self.profits[0]];
        out.total_welfare = out.profits[0] + out.profits[1] + out.surplus.cs_total;
        out
    }
}

/// Orders candidate equilibria: symmetric ones first, then by total welfare
/// (descending), then by position. Returns indices into `candidates`.
pub(crate) fn select_equilibrium(symmetric: &[bool], welfare: &[f64]) -> Option<usize> {
    let n = symmetric.len();
    if n == 0 {
        return None;
    }
    let pool: Vec<usize> = if symmetric.iter().any(|&s| s) {
        (0..n).filter(|&i| symmetric[i]).collect()
    } else {
        (0..n).collect()
    };
    let best = pool.iter().map(|&i| welfare[i]).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * best.abs().max(1.0);
    pool.into_iter().find(|&i| welfare[i] >= best - tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_hits_both_ends() {
        let g = linspace(0.0, 1.0, 21);
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[20], 1.0);
        assert_eq!(g[10], 0.5);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.price_grid.steps = 1;
        assert!(matches!(
            c.validate(),
            Err(SolverError::InvalidConfig {
                field: "price_grid",
                ..
            })
        ));
        let c = SolverConfig {
            damping: 0.0,
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SolverConfig {
            epsilon: Some(-1.0),
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn selection_prefers_symmetric_then_welfare_then_order() {
        assert_eq!(select_equilibrium(&[false, true, true], &[9.0, 1.0, 2.0]), Some(2));
        assert_eq!(select_equilibrium(&[false, false], &[3.0, 3.0]), Some(0));
        assert_eq!(select_equilibrium(&[], &[]), None);
    }
}
