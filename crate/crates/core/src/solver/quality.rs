//! Middle stage: simultaneous quality choice, valued by the anticipated price
//! equilibrium of every joint quality cell.

use rayon::prelude::*;

use crate::demand::evaluate;
use crate::market::{FirmStrategy, MarketParams};

use super::nash::{pure_equilibria, Bimatrix, NashCertificate};
use super::price::{price_stage_equilibrium, PriceStage};
use super::{select_equilibrium, Grids, SolverError};

#[derive(Debug, Clone, PartialEq)]
pub struct QualityStage {
    pub xs: [f64; 2],
    /// All epsilon-equilibria of the quality game, as full strategy pairs.
    pub equilibria: Vec<[FirmStrategy; 2]>,
    /// Selected equilibrium, or the cell with the smallest deviation gain
    /// when `found` is false.
    pub strategies: [FirmStrategy; 2],
    pub profits: [f64; 2],
    pub price: PriceStage,
    pub certificate: NashCertificate,
    pub found: bool,
}

impl QualityStage {
    pub(crate) fn swapped(&self) -> QualityStage {
        QualityStage {
            xs: [self.xs[1], self.xs[0]],
            equilibria: self.equilibria.iter().map(|s| [s[1], s[0]]).collect(),
            strategies: [self.strategies[1], self.strategies[0]],
            profits: [self.profits[1], self.profits[0]],
            price: self.price.swapped(),
            certificate: NashCertificate {
                gains: [self.certificate.gains[1], self.certificate.gains[0]],
            },
            found: self.found,
        }
    }
}

/// Full table of price subgames over the joint quality grid. Every cell is
/// solved from the same cold start, so its value depends on the cell alone.
pub(crate) fn price_table(params: &MarketParams, xs: [f64; 2], grids: &Grids) -> Vec<PriceStage> {
    let q = &grids.quality;
    let n = q.len();
    let symmetric = xs[0] == xs[1];
    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (if symmetric { i } else { 0 }..n).map(move |j| (i, j)))
        .collect();
    let solved: Vec<PriceStage> = cells
        .par_iter()
        .map(|&(i, j)| price_stage_equilibrium(params, xs, [q[i], q[j]], grids, None))
        .collect();
    let mut table: Vec<Option<PriceStage>> = vec![None; n * n];
    for (&(i, j), stage) in cells.iter().zip(solved) {
        if symmetric && i != j {
            table[j * n + i] = Some(stage.swapped());
        }
        table[i * n + j] = Some(stage);
    }
    table.into_iter().map(|s| s.expect("filled")).collect()
}

/// Pure equilibria of the quality game at fixed XAI levels.
///
/// Every joint quality cell is valued by its price-stage equilibrium; cells
/// whose price stage has no pure equilibrium count as deviations but are never
/// reported. Selection: symmetric qualities first, then highest total
/// welfare.
pub fn quality_stage_equilibrium(
    params: &MarketParams,
    xs: [f64; 2],
    grids: &Grids,
) -> Result<QualityStage, SolverError> {
    if xs[0] > xs[1] {
        return quality_stage_equilibrium(params, [xs[1], xs[0]], grids).map(|s| s.swapped());
    }
    let q = &grids.quality;
    let n = q.len();
    let table = price_table(params, xs, grids);
    if table.iter().any(|s| !s.profits.iter().all(|p| p.is_finite())) {
        return Err(SolverError::NonConvergence { x1: xs[0], x2: xs[1] });
    }
    let game = Bimatrix::from_fn(n, n, |i, j| table[i * n + j].profits);
    let eligible: Vec<bool> = table.iter().map(|s| s.found).collect();
    let cells = pure_equilibria(&game, grids.epsilon, Some(&eligible));

    let strategies_at = |(i, j): (usize, usize)| {
        let st = &table[i * n + j];
        [
            FirmStrategy {
                x: xs[0],
                q: q[i],
                p: st.prices[0],
            },
            FirmStrategy {
                x: xs[1],
                q: q[j],
                p: st.prices[1],
            },
        ]
    };
    let equilibria: Vec<[FirmStrategy; 2]> = cells.iter().map(|&c| strategies_at(c)).collect();

    let (cell, found) = if cells.is_empty() {
        let regret = |k: usize| game.certificate(k / n, k % n).max_gain();
        // Prefer cells with a price equilibrium; if none has one, any cell.
        let any_found = eligible.iter().any(|&e| e);
        let best = (0..n * n)
            .filter(|&k| eligible[k] || !any_found)
            .min_by(|&a, &b| regret(a).total_cmp(&regret(b)))
            .expect("quality grid is non-empty");
        ((best / n, best % n), false)
    } else {
        let symmetric: Vec<bool> = cells.iter().map(|&(i, j)| i == j).collect();
        let welfare: Vec<f64> = equilibria
            .iter()
            .zip(&cells)
            .map(|(s, &(i, j))| {
                let (_, surplus) = evaluate(params, &s[0], &s[1]);
                let pr = table[i * n + j].profits;
                pr[0] + pr[1] + surplus.cs_total
            })
            .collect();
        let pick = select_equilibrium(&symmetric, &welfare).expect("non-empty");
        (cells[pick], true)
    };
    let price = table[cell.0 * n + cell.1];
    Ok(QualityStage {
        xs,
        equilibria,
        strategies: strategies_at(cell),
        profits: price.profits,
        price,
        certificate: game.certificate(cell.0, cell.1),
        found,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::XaiMode;
    use crate::solver::SolverConfig;

    fn coarse(params: &MarketParams) -> Grids {
        let mut c = SolverConfig::for_scale(crate::solver::GridScale::Coarse);
        c.quality_grid.steps = 9;
        c.resolve(params).unwrap()
    }

    #[test]
    fn prohibitive_quality_cost_gives_zero_quality() {
        let params = MarketParams::new(2.0, 1.0, 1.0, 1e3, 0.0, XaiMode::Differentiated).unwrap();
        let mut config = SolverConfig::for_scale(crate::solver::GridScale::Coarse);
        // Fixed quality range.
        config.quality_grid.max = Some(1.0);
        let grids = config.resolve(&params).unwrap();
        let st = quality_stage_equilibrium(&params, [0.5, 0.5], &grids).unwrap();
        assert!(st.found);
        for s in st.strategies {
            assert!(s.q <= grids.quality_cell());
        }
    }

    #[test]
    fn symmetric_xai_gives_exchange_symmetric_equilibrium_set() {
        let params = MarketParams::new(2.0, 1.0, 1.0, 1.0, 0.0, XaiMode::Differentiated).unwrap();
        let grids = coarse(&params);
        let st = quality_stage_equilibrium(&params, [0.5, 0.5], &grids).unwrap();
        assert!(!st.equilibria.is_empty());
        let has_symmetric = st.equilibria.iter().any(|s| s[0].q == s[1].q);
        let mirrored = st.equilibria.iter().all(|s| {
            st.equilibria
                .iter()
                .any(|o| o[0].q == s[1].q && o[1].q == s[0].q && o[0].p == s[1].p)
        });
        assert!(has_symmetric || mirrored);
        assert!(mirrored);
    }

    #[test]
    fn swapping_xai_levels_swaps_the_outcome() {
        let params = MarketParams::new(2.0, 1.0, 2.0, 1.0, 0.0, XaiMode::Differentiated).unwrap();
        let grids = coarse(&params);
        let a = quality_stage_equilibrium(&params, [1.0, 0.0], &grids).unwrap();
        let b = quality_stage_equilibrium(&params, [0.0, 1.0], &grids).unwrap();
        assert_eq!(a.strategies, [b.strategies[1], b.strategies[0]]);
        assert_eq!(a.profits, [b.profits[1], b.profits[0]]);
    }
}
