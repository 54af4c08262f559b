//! The regulator: regimes, objectives, optimal mandated levels, regime
//! comparison, fairness and searches for witnesses of the headline claims.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::MarketParams;
use crate::solver::{EquilibriumOutcome, Solver, SolverConfig, SolverError};

mod claims;
mod panel;

pub use claims::{
    beta_t_report, find_witness, find_witnesses, BetaTReport, ClaimId, ClaimReport, ClaimSettings, ClaimStatus,
    Evidence,
};
pub use panel::{Panel, PanelPoint};

/// Regulatory lever.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// Both firms must offer XAI at exactly `x_bar`.
    Mandatory { x_bar: f64 },
    /// Each firm chooses between no XAI and XAI at `x_bar`.
    Optional { x_bar: f64 },
    /// Firms pick any level on the XAI grid.
    Unregulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegimeKind {
    Mandatory,
    Optional,
    Unregulated,
}

impl RegimeKind {
    pub fn label(&self) -> &'static str {
        match self {
            RegimeKind::Mandatory => "mandatory",
            RegimeKind::Optional => "optional",
            RegimeKind::Unregulated => "unregulated",
        }
    }

    pub fn with_level(self, x_bar: f64) -> Regime {
        match self {
            RegimeKind::Mandatory => Regime::Mandatory { x_bar },
            RegimeKind::Optional => Regime::Optional { x_bar },
            RegimeKind::Unregulated => Regime::Unregulated,
        }
    }
}

impl Regime {
    pub fn kind(&self) -> RegimeKind {
        match self {
            Regime::Mandatory { .. } => RegimeKind::Mandatory,
            Regime::Optional { .. } => RegimeKind::Optional,
            Regime::Unregulated => RegimeKind::Unregulated,
        }
    }

    pub fn x_bar(&self) -> Option<f64> {
        match *self {
            Regime::Mandatory { x_bar } | Regime::Optional { x_bar } => Some(x_bar),
            Regime::Unregulated => None,
        }
    }

    pub fn label(&self) -> &'static str {
        self.kind().label()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("outcome has no pure equilibrium, objective undefined")]
    NonePure,
    #[error("{0} regime has no policy level to optimize")]
    NoLevel(&'static str),
    #[error("no level on the grid yields a pure equilibrium")]
    AllNonePure,
    #[error("empty level grid")]
    EmptyGrid,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Regulator objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    TotalWelfare,
    ConsumerSurplus,
    XaiAdopters,
    AvgXaiReceived,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::TotalWelfare,
        Objective::ConsumerSurplus,
        Objective::XaiAdopters,
        Objective::AvgXaiReceived,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Objective::TotalWelfare => "TotalWelfare",
            Objective::ConsumerSurplus => "ConsumerSurplus",
            Objective::XaiAdopters => "XaiAdopters",
            Objective::AvgXaiReceived => "AvgXaiReceived",
        }
    }

    /// Matching column of the outcome table.
    pub fn column(&self) -> &'static str {
        match self {
            Objective::TotalWelfare => "total_welfare",
            Objective::ConsumerSurplus => "cs_total",
            Objective::XaiAdopters => "n_adopters",
            Objective::AvgXaiReceived => "avg_xai_received",
        }
    }
}

impl FromStr for Objective {
    type Err = String;

    /// Accepts the variant name or the column name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s || o.column() == s)
            .ok_or_else(|| format!("unknown objective `{s}`"))
    }
}

pub fn objective_value(outcome: &EquilibriumOutcome, objective: Objective) -> Result<f64, PolicyError> {
    if !outcome.has_equilibrium() {
        return Err(PolicyError::NonePure);
    }
    Ok(match objective {
        Objective::TotalWelfare => outcome.total_welfare,
        Objective::ConsumerSurplus => outcome.surplus.cs_total,
        Objective::XaiAdopters => outcome.xai_adopters() as f64,
        Objective::AvgXaiReceived => outcome.surplus.avg_xai_received,
    })
}

/// Index of the best value; `None` entries are skipped and near-ties
/// (relative 1e-12) go to the earliest entry, i.e. the smallest level on an
/// ascending grid.
pub fn argmax_level(values: &[Option<f64>]) -> Option<usize> {
    let best = values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return None;
    }
    let tol = 1e-12 * best.abs().max(1.0);
    values.iter().position(|v| v.is_some_and(|v| v >= best - tol))
}

/// Indices `k` where `|value[k+1] - value[k]|` exceeds ten times the median
/// step; gaps around missing values are not compared.
pub fn welfare_jumps(values: &[Option<f64>]) -> Vec<usize> {
    let steps: Vec<(usize, f64)> = values
        .windows(2)
        .enumerate()
        .filter_map(|(k, w)| Some((k, (w[1]? - w[0]?).abs())))
        .collect();
    if steps.len() < 2 {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = steps.iter().map(|s| s.1).collect();
    sorted.sort_by(f64::total_cmp);
    let typical = sorted[sorted.len() / 2];
    steps
        .into_iter()
        .filter(|&(_, d)| d > 10.0 * typical && d > 1e-12)
        .map(|(k, _)| k)
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub x_bar: f64,
    pub outcome: Result<EquilibriumOutcome, SolverError>,
    /// Objective value; `None` without a pure equilibrium.
    pub value: Option<f64>,
}

/// Full level sweep of one regime kind plus its optimum.
#[derive(Debug, Clone)]
pub struct PolicySweep {
    pub kind: RegimeKind,
    pub objective: Objective,
    pub table: Vec<SweepEntry>,
    pub best: usize,
}

impl PolicySweep {
    pub fn x_star(&self) -> f64 {
        self.table[self.best].x_bar
    }

    pub fn outcome(&self) -> &EquilibriumOutcome {
        self.table[self.best]
            .outcome
            .as_ref()
            .expect("optimum has an equilibrium")
    }

    pub fn value(&self) -> f64 {
        self.table[self.best].value.expect("optimum has a value")
    }
}

/// Solves `kind` at every level and picks the objective maximizer.
pub fn optimal_policy(
    params: &MarketParams,
    kind: RegimeKind,
    objective: Objective,
    levels: &[f64],
    config: &SolverConfig,
) -> Result<PolicySweep, PolicyError> {
    optimal_policy_with(&Solver::new(*params, config)?, kind, objective, levels)
}

/// [`optimal_policy`] on an existing solver, sharing its continuation cache.
pub fn optimal_policy_with(
    solver: &Solver,
    kind: RegimeKind,
    objective: Objective,
    levels: &[f64],
) -> Result<PolicySweep, PolicyError> {
    if kind == RegimeKind::Unregulated {
        return Err(PolicyError::NoLevel(kind.label()));
    }
    if levels.is_empty() {
        return Err(PolicyError::EmptyGrid);
    }
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let table: Vec<SweepEntry> = levels
        .par_iter()
        .map(|&x_bar| {
            let outcome = solver.solve(&kind.with_level(x_bar));
            let value = outcome.as_ref().ok().and_then(|o| objective_value(o, objective).ok());
            SweepEntry { x_bar, outcome, value }
        })
        .collect();
    if let Some(err) = table.iter().find_map(|e| match &e.outcome {
        Err(err @ SolverError::NonConvergence { .. }) => Some(err.clone()),
        _ => None,
    }) {
        return Err(err.into());
    }
    let values: Vec<Option<f64>> = table.iter().map(|e| e.value).collect();
    let best = argmax_level(&values).ok_or(PolicyError::AllNonePure)?;
    Ok(PolicySweep {
        kind,
        objective,
        table,
        best,
    })
}

/// Fit parity between the two consumer groups: with `M_g` the mean
/// explanation fit of group g's buyers, `1 - |M_A - M_B| / (|M_A| + |M_B|)`,
/// and 1 when both are zero. A group without buyers has `M_g = 0`.
pub fn fairness_index(outcome: &EquilibriumOutcome) -> f64 {
    let [a, b] = outcome.surplus.group_fit.map(|g| g.mean_fit());
    let scale = a.abs() + b.abs();
    if scale == 0.0 {
        1.0
    } else {
        (1.0 - (a - b).abs() / scale).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct PolicyRow {
    pub regime: Regime,
    /// Objective whose optimum this row reports; `None` for Unregulated.
    pub objective: Option<Objective>,
    pub outcome: Result<EquilibriumOutcome, PolicyError>,
}

impl PolicyRow {
    pub fn fairness(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(fairness_index)
    }
}

#[derive(Debug, Clone)]
pub struct Optimum {
    pub kind: RegimeKind,
    pub objective: Objective,
    pub x_bar: Option<f64>,
    pub value: Option<f64>,
}

/// Signed total-welfare difference `first - second`.
#[derive(Debug, Clone)]
pub struct WelfareGap {
    pub objective: Objective,
    pub first: RegimeKind,
    pub second: RegimeKind,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct PolicyReport {
    pub rows: Vec<PolicyRow>,
    pub optima: Vec<Optimum>,
    pub gaps: Vec<WelfareGap>,
    pub witnesses: Vec<ClaimReport>,
}

/// Unregulated once, then Mandatory and Optional at their optimal level
/// for every objective, with pairwise welfare gaps. Failures stay in their
/// row.
pub fn compare_regimes(solver: &Solver, objectives: &[Objective], levels: &[f64]) -> PolicyReport {
    let mut report = PolicyReport::default();
    let unregulated = solver.solve(&Regime::Unregulated).map_err(PolicyError::from);
    let welfare_of = |o: &Result<EquilibriumOutcome, PolicyError>| {
        o.as_ref().ok().filter(|o| o.has_equilibrium()).map(|o| o.total_welfare)
    };
    let w_unregulated = welfare_of(&unregulated);
    report.rows.push(PolicyRow {
        regime: Regime::Unregulated,
        objective: None,
        outcome: unregulated,
    });
    for &objective in objectives {
        let mut welfare = Vec::new();
        for kind in [RegimeKind::Mandatory, RegimeKind::Optional] {
            let sweep = optimal_policy_with(solver, kind, objective, levels);
            let (x_bar, value, outcome) = match sweep {
                Ok(s) => (Some(s.x_star()), Some(s.value()), Ok(s.outcome().clone())),
                Err(e) => (None, None, Err(e)),
            };
            welfare.push(welfare_of(&outcome));
            report.optima.push(Optimum {
                kind,
                objective,
                x_bar,
                value,
            });
            report.rows.push(PolicyRow {
                // Rows without an optimum carry the top of the grid as a
                // placeholder level.
                regime: kind.with_level(x_bar.unwrap_or(1.0)),
                objective: Some(objective),
                outcome,
            });
        }
        let diff = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
        let gaps = [
            (
                RegimeKind::Mandatory,
                RegimeKind::Optional,
                diff(welfare[0], welfare[1]),
            ),
            (
                RegimeKind::Unregulated,
                RegimeKind::Mandatory,
                diff(w_unregulated, welfare[0]),
            ),
            (
                RegimeKind::Unregulated,
                RegimeKind::Optional,
                diff(w_unregulated, welfare[1]),
            ),
        ];
        for (first, second, value) in gaps {
            report.gaps.push(WelfareGap {
                objective,
                first,
                second,
                value,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::XaiMode;
    use crate::solver::{GridScale, StageCertificate};

    fn small_config() -> SolverConfig {
        let mut c = SolverConfig::for_scale(GridScale::Coarse);
        c.quality_grid.steps = 9;
        c.xai_steps = 5;
        c
    }

    fn params(gamma: f64, t: f64, mode: XaiMode) -> MarketParams {
        MarketParams::new(2.0, gamma, t, 1.0, 0.0, mode).unwrap()
    }

    #[test]
    fn argmax_of_monotone_table_is_the_top() {
        let values: Vec<Option<f64>> = (0..11).map(|k| Some(k as f64)).collect();
        assert_eq!(argmax_level(&values), Some(10));
    }

    #[test]
    fn plateau_ties_go_to_the_smaller_level() {
        // Levels 0.0, 0.1, ..., 1.0 with a plateau over 0.4 and 0.5.
        let mut values: Vec<Option<f64>> = (0..11).map(|k| Some(-((k as f64) - 4.5).abs())).collect();
        values[4] = Some(1.0);
        values[5] = Some(1.0);
        assert_eq!(argmax_level(&values), Some(4));
        assert_eq!(argmax_level(&[None, None]), None);
        assert_eq!(argmax_level(&[None, Some(0.0), Some(0.0)]), Some(1));
    }

    #[test]
    fn jumps_are_flagged_against_the_median_step() {
        let values = [Some(0.0), Some(0.1), Some(0.2), Some(5.0), Some(5.1), None, Some(5.2)];
        assert_eq!(welfare_jumps(&values), vec![2]);
        assert!(welfare_jumps(&[Some(1.0); 5]).is_empty());
    }

    #[test]
    fn objective_values_read_the_outcome() {
        let solver = Solver::new(params(1.0, 1.0, XaiMode::Differentiated), &small_config()).unwrap();
        let none = solver.solve(&Regime::Mandatory { x_bar: 0.0 }).unwrap();
        assert_eq!(objective_value(&none, Objective::XaiAdopters).unwrap(), 0.0);
        assert_eq!(objective_value(&none, Objective::AvgXaiReceived).unwrap(), 0.0);
        let half = solver.solve(&Regime::Mandatory { x_bar: 0.5 }).unwrap();
        assert_eq!(objective_value(&half, Objective::XaiAdopters).unwrap(), 2.0);
        let tw = objective_value(&half, Objective::TotalWelfare).unwrap();
        assert!((tw - half.profits[0] - half.profits[1] - half.surplus.cs_total).abs() < 1e-12);
    }

    #[test]
    fn objective_rejects_missing_equilibrium() {
        let p = params(1.0, 1.0, XaiMode::Differentiated);
        let s = crate::market::FirmStrategy { x: 0.0, q: 0.0, p: 1.0 };
        let outcome = EquilibriumOutcome::assemble(
            &p,
            [s, s],
            StageCertificate::default(),
            crate::solver::Existence::NonePure,
        );
        assert_eq!(
            objective_value(&outcome, Objective::TotalWelfare),
            Err(PolicyError::NonePure)
        );
    }

    #[test]
    fn optimal_policy_rejects_unregulated() {
        let p = params(1.0, 1.0, XaiMode::Shared);
        let r = optimal_policy(
            &p,
            RegimeKind::Unregulated,
            Objective::TotalWelfare,
            &[0.5],
            &small_config(),
        );
        assert!(matches!(r, Err(PolicyError::NoLevel(_))));
    }

    #[test]
    fn optimum_is_the_max_of_its_table() {
        let p = params(1.0, 1.0, XaiMode::Differentiated);
        let levels = [0.0, 0.25, 0.5, 0.75, 1.0];
        let sweep = optimal_policy(
            &p,
            RegimeKind::Mandatory,
            Objective::TotalWelfare,
            &levels,
            &small_config(),
        )
        .unwrap();
        let max = sweep
            .table
            .iter()
            .filter_map(|e| e.value)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(sweep.value(), max);
        assert_eq!(sweep.table.len(), levels.len());
    }

    #[test]
    fn irrelevant_explanations_give_flat_objectives() {
        let p = params(0.0, 0.0, XaiMode::Differentiated);
        let levels = [0.0, 0.5, 1.0];
        for objective in [Objective::TotalWelfare, Objective::ConsumerSurplus] {
            let sweep = optimal_policy(&p, RegimeKind::Mandatory, objective, &levels, &small_config()).unwrap();
            let values: Vec<f64> = sweep.table.iter().map(|e| e.value.unwrap()).collect();
            assert!(values.iter().all(|&v| v == values[0]), "{values:?}");
            assert_eq!(sweep.x_star(), 0.0);
        }
    }

    #[test]
    fn fairness_conventions() {
        let p = params(1.0, 1.0, XaiMode::Differentiated);
        let solver = Solver::new(p, &small_config()).unwrap();
        let mirrored = solver.solve(&Regime::Mandatory { x_bar: 0.5 }).unwrap();
        assert!((fairness_index(&mirrored) - 1.0).abs() < 1e-12);
        let dark = solver.solve(&Regime::Mandatory { x_bar: 0.0 }).unwrap();
        assert_eq!(fairness_index(&dark), 1.0);

        let shared = params(1.0, 1.0, XaiMode::Shared);
        let s1 = crate::market::FirmStrategy { x: 0.5, q: 0.2, p: 0.5 };
        let s2 = crate::market::FirmStrategy { x: 0.5, q: 0.2, p: 0.5 };
        let outcome = EquilibriumOutcome::assemble(
            &shared,
            [s1, s2],
            StageCertificate::default(),
            crate::solver::Existence::Unique,
        );
        let f = fairness_index(&outcome);
        assert!((0.0..1.0).contains(&f), "{f}");
    }

    #[test]
    fn compare_reports_every_regime_and_gap() {
        let solver = Solver::new(params(1.0, 1.0, XaiMode::Shared), &small_config()).unwrap();
        let report = compare_regimes(
            &solver,
            &[Objective::TotalWelfare, Objective::XaiAdopters],
            &[0.0, 0.5, 1.0],
        );
        assert_eq!(report.rows.len(), 5);
        assert_eq!(report.optima.len(), 4);
        assert_eq!(report.gaps.len(), 6);
        for row in &report.rows {
            if let Ok(o) = &row.outcome {
                assert!((o.total_welfare - o.profits[0] - o.profits[1] - o.surplus.cs_total).abs() < 1e-9);
                let f = row.fairness().unwrap();
                assert!((0.0..=1.0).contains(&f));
            }
        }
        // Mandatory at its optimum beats the full mandate.
        let mandatory = report
            .optima
            .iter()
            .find(|o| o.kind == RegimeKind::Mandatory && o.objective == Objective::TotalWelfare)
            .unwrap();
        let full = solver.solve(&Regime::Mandatory { x_bar: 1.0 }).unwrap();
        assert!(mandatory.value.unwrap() >= full.total_welfare);
    }

    #[test]
    fn claim_ids_parse() {
        assert_eq!("c4".parse::<ClaimId>().unwrap(), ClaimId::C4);
        assert!("C7".parse::<ClaimId>().is_err());
        assert_eq!("total_welfare".parse::<Objective>().unwrap(), Objective::TotalWelfare);
        assert_eq!(
            "AvgXaiReceived".parse::<Objective>().unwrap(),
            Objective::AvgXaiReceived
        );
    }

    #[test]
    fn synthetic_opt_in_game_is_a_c4_witness() {
        let pennies = [[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]]];
        let p = params(1.0, 1.0, XaiMode::Shared);
        let panel = Panel::default().with_synthetic(p, pennies);
        let settings = ClaimSettings {
            config: small_config(),
            ..ClaimSettings::default()
        };
        let report = find_witness(ClaimId::C4, &panel, &settings);
        assert_eq!(report.status, ClaimStatus::WitnessFound);
        assert_eq!(report.point, Some(0));
    }

    #[test]
    fn c1_is_exhausted_when_explanations_do_not_matter() {
        let panel = Panel::grid(
            &[1.0, 2.0],
            &[0.0],
            &[0.0],
            &[1.0],
            0.0,
            &[XaiMode::Differentiated, XaiMode::Shared],
        );
        let settings = ClaimSettings {
            config: small_config(),
            ..ClaimSettings::default()
        };
        let report = find_witness(ClaimId::C1, &panel, &settings);
        assert_eq!(report.status, ClaimStatus::ExhaustedPanel);
        assert_eq!(report.points_checked, 4);
        assert_eq!(report.failures, 0);
    }
}
