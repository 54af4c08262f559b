//! Market-structure label of an equilibrium: is the marginal consumer between
//! the two firms swayed more by the explanation gap or by the quality gap?

use serde::{Deserialize, Serialize};

use crate::demand::{best_choice, explanation_gap, Choice};
use crate::market::MarketParams;

use super::{EquilibriumOutcome, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MarketClass {
    ExplanationDominated,
    QualityDominated,
    Degenerate,
}

impl MarketClass {
    pub fn label(&self) -> &'static str {
        match self {
            MarketClass::ExplanationDominated => "explanation_dominated",
            MarketClass::QualityDominated => "quality_dominated",
            MarketClass::Degenerate => "degenerate",
        }
    }
}

/// Compares `|e1 - e2|` with `|q1 - q2|` at every boundary where consumers
/// switch directly between the firms.
pub fn classify_market(params: &MarketParams, outcome: &EquilibriumOutcome) -> Result<MarketClass, SolverError> {
    if outcome.existence.is_none_pure() {
        return Err(SolverError::NoPureEquilibrium);
    }
    let [s1, s2] = &outcome.strategies;
    let quality_gap = (s1.q - s2.q).abs();
    let tol = 1e-12 * params.utility_scale();
    let probe = 1e-9;
    let mut above = 0;
    let mut below = 0;
    let mut boundaries = 0;
    for &b in &outcome.demand.breakpoints {
        let left = best_choice((b - probe).max(0.0), params, s1, s2);
        let right = best_choice((b + probe).min(1.0), params, s1, s2);
        if left == right || left == Choice::None || right == Choice::None {
            continue;
        }
        boundaries += 1;
        let gap = explanation_gap(b, params, s1, s2);
        if gap > quality_gap + tol {
            above += 1;
        } else if gap < quality_gap - tol {
            below += 1;
        }
    }
    Ok(if boundaries == 0 {
        MarketClass::Degenerate
    } else if above == boundaries {
        MarketClass::ExplanationDominated
    } else if below == boundaries {
        MarketClass::QualityDominated
    } else {
        MarketClass::Degenerate
    })
}
