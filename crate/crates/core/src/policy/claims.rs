//! Witness and counterexample searches for the headline claims, and the
//! exploratory beta–t report.
//!
//! Existence claims stop at the first panel point (in panel order) that
//! satisfies their predicate. Universal claims scan the whole panel and list
//! every violation.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::market::MarketParams;
use crate::solver::{opt_in_equilibria, EquilibriumOutcome, Solver, SolverConfig};

use super::panel::{OptInPayoffs, Panel, PanelPoint};
use super::{optimal_policy_with, Objective, PolicyError, Regime, RegimeKind};

/// Named evidence numbers, in a fixed order.
pub type Evidence = Vec<(&'static str, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClaimId {
    /// Full mandated transparency can leave both firms and consumers worse
    /// off than a lower mandate.
    C1,
    /// Mandating a level can add nothing over making it optional.
    C2,
    /// Unregulated firms choose symmetric XAI levels.
    C3,
    /// The optional regime can have no pure equilibrium.
    C4,
    /// The lower-quality firm never gains by opting in alone.
    C5,
    /// Unregulated firms mirror each other without necessarily offering
    /// full explanations.
    C6,
}

impl ClaimId {
    pub const ALL: [ClaimId; 6] = [
        ClaimId::C1,
        ClaimId::C2,
        ClaimId::C3,
        ClaimId::C4,
        ClaimId::C5,
        ClaimId::C6,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ClaimId::C1 => "C1",
            ClaimId::C2 => "C2",
            ClaimId::C3 => "C3",
            ClaimId::C4 => "C4",
            ClaimId::C5 => "C5",
            ClaimId::C6 => "C6",
        }
    }

    pub fn statement(&self) -> &'static str {
        match self {
            ClaimId::C1 => "mandating full XAI may make firms and consumers worse off",
            ClaimId::C2 => "mandatory XAI may add nothing over optional XAI",
            ClaimId::C3 => "unregulated firms always choose symmetric XAI levels",
            ClaimId::C4 => "optional XAI may leave the market without a pure equilibrium",
            ClaimId::C5 => "the low-quality firm never benefits from offering XAI unilaterally",
            ClaimId::C6 => "unregulated firms mirror each other, not necessarily at full XAI",
        }
    }

    /// Universal claims hold when the panel is exhausted without violation.
    pub fn is_universal(&self) -> bool {
        matches!(self, ClaimId::C3 | ClaimId::C5)
    }
}

impl fmt::Display for ClaimId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ClaimId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClaimId::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown claim id `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClaimStatus {
    WitnessFound,
    ExhaustedPanel,
    CounterexampleFound,
}

impl ClaimStatus {
    pub fn label(&self) -> &'static str {
        match self {
            ClaimStatus::WitnessFound => "witness_found",
            ClaimStatus::ExhaustedPanel => "exhausted_panel",
            ClaimStatus::CounterexampleFound => "counterexample_found",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimReport {
    pub claim: ClaimId,
    pub status: ClaimStatus,
    /// Panel index of the witness, or of the first counterexample.
    pub point: Option<usize>,
    pub params: Option<MarketParams>,
    pub evidence: Evidence,
    /// Panel points examined: up to and including the witness for existence
    /// searches, the whole panel otherwise.
    pub points_checked: usize,
    pub counterexamples: Vec<(usize, Evidence)>,
    /// Examined points skipped because a solve failed.
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct ClaimSettings {
    pub config: SolverConfig,
    /// Mandated levels compared by C1 and C2; `None` uses the XAI grid.
    pub mandatory_levels: Option<Vec<f64>>,
    /// Opt-in levels examined by C4 and C5.
    pub optional_levels: Vec<f64>,
    /// Mandated level at which the beta–t report compares welfare.
    pub beta_t_level: f64,
}

impl Default for ClaimSettings {
    fn default() -> Self {
        ClaimSettings {
            config: SolverConfig::default(),
            mandatory_levels: None,
            optional_levels: vec![0.25, 0.5, 0.75, 1.0],
            beta_t_level: 0.5,
        }
    }
}

impl ClaimSettings {
    fn mandatory_levels(&self, solver: &Solver) -> Vec<f64> {
        let mut levels = self
            .mandatory_levels
            .clone()
            .unwrap_or_else(|| solver.grids().xai.clone());
        if !levels.contains(&1.0) {
            levels.push(1.0);
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels
    }
}

type PointResult = Result<Option<Evidence>, PolicyError>;

fn solver_for(point: &PanelPoint, settings: &ClaimSettings) -> Result<Solver, PolicyError> {
    Ok(Solver::new(point.params, &settings.config)?)
}

/// First panel point satisfying `predicate`, in panel order. Points are
/// evaluated in parallel batches; the answer does not depend on the batch
/// size.
fn first_hit(
    panel: &Panel,
    predicate: impl Fn(&PanelPoint) -> PointResult + Sync,
) -> (Option<(usize, Evidence)>, usize) {
    let batch = rayon::current_num_threads().max(1);
    let mut failures = 0;
    for start in (0..panel.len()).step_by(batch) {
        let end = (start + batch).min(panel.len());
        let results: Vec<PointResult> = (start..end)
            .into_par_iter()
            .map(|k| predicate(&panel.points[k]))
            .collect();
        for (k, result) in (start..end).zip(results) {
            match result {
                Ok(Some(evidence)) => return (Some((k, evidence)), failures),
                Ok(None) => {}
                Err(_) => failures += 1,
            }
        }
    }
    (None, failures)
}

fn existence_report(claim: ClaimId, panel: &Panel, hit: (Option<(usize, Evidence)>, usize)) -> ClaimReport {
    let (found, failures) = hit;
    match found {
        Some((k, evidence)) => ClaimReport {
            claim,
            status: ClaimStatus::WitnessFound,
            point: Some(k),
            params: Some(panel.points[k].params),
            evidence,
            points_checked: k + 1,
            counterexamples: Vec::new(),
            failures,
        },
        None => ClaimReport {
            claim,
            status: ClaimStatus::ExhaustedPanel,
            point: None,
            params: None,
            evidence: Vec::new(),
            points_checked: panel.len(),
            counterexamples: Vec::new(),
            failures,
        },
    }
}

fn c1_predicate(point: &PanelPoint, settings: &ClaimSettings) -> PointResult {
    if point.is_synthetic() {
        return Ok(None);
    }
    let solver = solver_for(point, settings)?;
    let margin = 3.0 * solver.epsilon();
    let full = solver.solve(&Regime::Mandatory { x_bar: 1.0 })?;
    if !full.has_equilibrium() {
        return Ok(None);
    }
    for x_bar in settings.mandatory_levels(&solver).into_iter().filter(|&x| x < 1.0) {
        let lower = solver.solve(&Regime::Mandatory { x_bar })?;
        if !lower.has_equilibrium() {
            continue;
        }
        let gains = [
            lower.profits[0] - full.profits[0],
            lower.profits[1] - full.profits[1],
            lower.surplus.cs_total - full.surplus.cs_total,
        ];
        if gains.iter().all(|&g| g > margin) {
            return Ok(Some(vec![
                ("x_bar", x_bar),
                ("profit1_at_x_bar", lower.profits[0]),
                ("profit2_at_x_bar", lower.profits[1]),
                ("cs_at_x_bar", lower.surplus.cs_total),
                ("profit1_full", full.profits[0]),
                ("profit2_full", full.profits[1]),
                ("cs_full", full.surplus.cs_total),
                ("min_margin", gains.iter().copied().fold(f64::INFINITY, f64::min)),
                ("required_margin", margin),
            ]));
        }
    }
    Ok(None)
}

fn c2_predicate(point: &PanelPoint, settings: &ClaimSettings) -> PointResult {
    if point.is_synthetic() {
        return Ok(None);
    }
    let solver = solver_for(point, settings)?;
    let levels = settings.mandatory_levels(&solver);
    let sweep = match optimal_policy_with(&solver, RegimeKind::Mandatory, Objective::TotalWelfare, &levels) {
        Ok(s) => s,
        Err(PolicyError::AllNonePure) => return Ok(None),
        Err(e) => return Err(e),
    };
    // A zero mandate is no mandate.
    let x_bar = sweep.x_star();
    if x_bar == 0.0 {
        return Ok(None);
    }
    let optional = solver.solve(&Regime::Optional { x_bar })?;
    if !optional.has_equilibrium() {
        return Ok(None);
    }
    let gap = optional.total_welfare - sweep.value();
    if gap.abs() <= solver.epsilon() {
        return Ok(Some(vec![
            ("x_bar", x_bar),
            ("welfare_optional", optional.total_welfare),
            ("welfare_mandatory", sweep.value()),
            ("gap", gap),
            ("epsilon", solver.epsilon()),
            ("adopters_optional", optional.xai_adopters() as f64),
        ]));
    }
    Ok(None)
}

fn opt_in_table(solver: &Solver, x_bar: f64) -> Result<OptInPayoffs, PolicyError> {
    let actions = [0.0, x_bar];
    let mut table = [[[0.0; 2]; 2]; 2];
    for (i, &a) in actions.iter().enumerate() {
        for (j, &b) in actions.iter().enumerate() {
            table[i][j] = solver.continuation(a, b)?.profits;
        }
    }
    Ok(table)
}

fn payoff_evidence(table: &OptInPayoffs) -> Evidence {
    const NAMES: [[[&str; 2]; 2]; 2] = [
        [["out_out_1", "out_out_2"], ["out_in_1", "out_in_2"]],
        [["in_out_1", "in_out_2"], ["in_in_1", "in_in_2"]],
    ];
    let mut evidence = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            for f in 0..2 {
                evidence.push((NAMES[i][j][f], table[i][j][f]));
            }
        }
    }
    evidence
}

fn c4_predicate(point: &PanelPoint, settings: &ClaimSettings) -> PointResult {
    if let Some(payoffs) = point.synthetic_opt_in {
        let epsilon = settings.config.resolve(&point.params)?.epsilon;
        return Ok(opt_in_equilibria(payoffs, epsilon).is_empty().then(|| {
            let mut evidence = vec![("synthetic", 1.0)];
            evidence.extend(payoff_evidence(&payoffs));
            evidence
        }));
    }
    let solver = solver_for(point, settings)?;
    for &x_bar in settings.optional_levels.iter().filter(|&&x| x > 0.0) {
        let outcome = solver.solve(&Regime::Optional { x_bar })?;
        if !outcome.has_equilibrium() {
            let mut evidence = vec![("synthetic", 0.0), ("x_bar", x_bar)];
            evidence.extend(payoff_evidence(&opt_in_table(&solver, x_bar)?));
            // 1 where the cell's quality and price stages have a pure equilibrium.
            for (name, (a, b)) in [
                ("out_out_found", (0.0, 0.0)),
                ("out_in_found", (0.0, x_bar)),
                ("in_out_found", (x_bar, 0.0)),
                ("in_in_found", (x_bar, x_bar)),
            ] {
                evidence.push((name, f64::from(u8::from(solver.continuation(a, b)?.found))));
            }
            return Ok(Some(evidence));
        }
    }
    Ok(None)
}

/// Violations of C5 at one point, plus the number of asymmetric-quality
/// unilateral cells examined.
fn c5_violations(point: &PanelPoint, settings: &ClaimSettings) -> Result<(Vec<Evidence>, usize), PolicyError> {
    if point.is_synthetic() {
        return Ok((Vec::new(), 0));
    }
    let solver = solver_for(point, settings)?;
    let base = solver.continuation(0.0, 0.0)?;
    let mut violations = Vec::new();
    let mut cases = 0;
    if !base.found {
        return Ok((violations, cases));
    }
    for &x_bar in settings.optional_levels.iter().filter(|&&x| x > 0.0) {
        // Firm 1 opts in alone; the mirrored cell is its exact swap.
        let alone = solver.continuation(x_bar, 0.0)?;
        if !alone.found {
            continue;
        }
        let (q_in, q_out) = (alone.strategies[0].q, alone.strategies[1].q);
        if q_in >= q_out {
            continue;
        }
        cases += 1;
        let gain = alone.profits[0] - base.profits[0];
        if gain > solver.epsilon() {
            violations.push(vec![
                ("x_bar", x_bar),
                ("q_opt_in", q_in),
                ("q_other", q_out),
                ("profit_opt_in", alone.profits[0]),
                ("profit_no_xai", base.profits[0]),
                ("gain", gain),
            ]);
        }
    }
    Ok((violations, cases))
}

fn unregulated_outcomes(
    panel: &Panel,
    settings: &ClaimSettings,
) -> Vec<Option<Result<(EquilibriumOutcome, f64), PolicyError>>> {
    panel
        .points
        .par_iter()
        .map(|point| {
            if point.is_synthetic() {
                return None;
            }
            Some(solver_for(point, settings).and_then(|solver| {
                let cell = solver.grids().xai_cell();
                Ok((solver.solve(&Regime::Unregulated)?, cell))
            }))
        })
        .collect()
}

fn xai_evidence(outcome: &EquilibriumOutcome, cell: f64) -> Evidence {
    let [s1, s2] = outcome.strategies;
    vec![
        ("x1", s1.x),
        ("x2", s2.x),
        ("q1", s1.q),
        ("q2", s2.q),
        ("profit1", outcome.profits[0]),
        ("profit2", outcome.profits[1]),
        ("xai_cell", cell),
    ]
}

/// C3 (asymmetry counterexamples) and C6 (symmetric interior witness) from
/// one Unregulated scan.
fn symmetry_reports(
    panel: &Panel,
    scan: &[Option<Result<(EquilibriumOutcome, f64), PolicyError>>],
) -> (ClaimReport, ClaimReport) {
    let mut counterexamples = Vec::new();
    let mut witness: Option<(usize, Evidence)> = None;
    let mut failures = 0;
    let mut equilibria = 0;
    for (k, entry) in scan.iter().enumerate() {
        let (outcome, cell) = match entry {
            None => continue,
            Some(Err(_)) => {
                failures += 1;
                continue;
            }
            Some(Ok((o, cell))) if o.has_equilibrium() => (o, *cell),
            Some(Ok(_)) => continue,
        };
        equilibria += 1;
        let [s1, s2] = outcome.strategies;
        let tol = 1e-9;
        if (s1.x - s2.x).abs() > cell + tol {
            counterexamples.push((k, xai_evidence(outcome, cell)));
        } else if witness.is_none() && s1.x.max(s2.x) <= 1.0 - 2.0 * cell + tol {
            witness = Some((k, xai_evidence(outcome, cell)));
        }
    }
    let first_counter = counterexamples.first().map(|c| c.0);
    let c3 = ClaimReport {
        claim: ClaimId::C3,
        status: if counterexamples.is_empty() {
            ClaimStatus::ExhaustedPanel
        } else {
            ClaimStatus::CounterexampleFound
        },
        point: first_counter,
        params: first_counter.map(|k| panel.points[k].params),
        evidence: vec![("equilibria_checked", equilibria as f64)],
        points_checked: panel.len(),
        counterexamples: counterexamples.clone(),
        failures,
    };
    let (status, point, evidence) = if !counterexamples.is_empty() {
        (
            ClaimStatus::CounterexampleFound,
            first_counter,
            counterexamples[0].1.clone(),
        )
    } else if let Some((k, evidence)) = witness {
        (ClaimStatus::WitnessFound, Some(k), evidence)
    } else {
        (
            ClaimStatus::ExhaustedPanel,
            None,
            vec![("equilibria_checked", equilibria as f64)],
        )
    };
    let c6 = ClaimReport {
        claim: ClaimId::C6,
        status,
        point,
        params: point.map(|k| panel.points[k].params),
        evidence,
        points_checked: panel.len(),
        counterexamples,
        failures,
    };
    (c3, c6)
}

fn c5_report(panel: &Panel, settings: &ClaimSettings) -> ClaimReport {
    let results: Vec<_> = panel.points.par_iter().map(|p| c5_violations(p, settings)).collect();
    let mut counterexamples = Vec::new();
    let mut failures = 0;
    let mut cases = 0;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok((violations, n)) => {
                cases += n;
                counterexamples.extend(violations.into_iter().map(|v| (k, v)));
            }
            Err(_) => failures += 1,
        }
    }
    let first = counterexamples.first().map(|c| c.0);
    ClaimReport {
        claim: ClaimId::C5,
        status: if counterexamples.is_empty() {
            ClaimStatus::ExhaustedPanel
        } else {
            ClaimStatus::CounterexampleFound
        },
        point: first,
        params: first.map(|k| panel.points[k].params),
        evidence: vec![
            ("cases_checked", cases as f64),
            ("violations", counterexamples.len() as f64),
        ],
        points_checked: panel.len(),
        counterexamples,
        failures,
    }
}

pub fn find_witness(claim: ClaimId, panel: &Panel, settings: &ClaimSettings) -> ClaimReport {
    find_witnesses(&[claim], panel, settings).remove(0)
}

/// Reports for `claims`, in the order given. C3 and C6 share one
/// Unregulated scan.
pub fn find_witnesses(claims: &[ClaimId], panel: &Panel, settings: &ClaimSettings) -> Vec<ClaimReport> {
    let needs_scan = claims.iter().any(|c| matches!(c, ClaimId::C3 | ClaimId::C6));
    let symmetry = needs_scan.then(|| symmetry_reports(panel, &unregulated_outcomes(panel, settings)));
    claims
        .iter()
        .map(|&claim| match claim {
            ClaimId::C1 => existence_report(claim, panel, first_hit(panel, |p| c1_predicate(p, settings))),
            ClaimId::C2 => existence_report(claim, panel, first_hit(panel, |p| c2_predicate(p, settings))),
            ClaimId::C4 => existence_report(claim, panel, first_hit(panel, |p| c4_predicate(p, settings))),
            ClaimId::C5 => c5_report(panel, settings),
            ClaimId::C3 => symmetry.as_ref().expect("scanned").0.clone(),
            ClaimId::C6 => symmetry.as_ref().expect("scanned").1.clone(),
        })
        .collect()
}

/// Welfare at `(beta, t)` against `(2 beta, t / 2)` for every such pair in
/// the panel, under one mandated level.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTReport {
    pub level: f64,
    pub pairs: usize,
    /// Largest `|W(b, t) - W(2b, t/2)| / max(|W|, |W'|)`.
    pub max_rel_discrepancy: Option<f64>,
    /// Panel indices of the worst pair.
    pub worst: Option<(usize, usize)>,
    /// Pairs skipped for lack of an equilibrium or a failed solve.
    pub skipped: usize,
}

fn same_economy_but_beta_t(a: &MarketParams, b: &MarketParams) -> bool {
    a.v == b.v && a.gamma == b.gamma && a.c0 == b.c0 && a.mode == b.mode && a.group_boundary == b.group_boundary
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

pub fn beta_t_report(panel: &Panel, settings: &ClaimSettings) -> BetaTReport {
    let points = &panel.points;
    let mut pairs = Vec::new();
    for (i, a) in points.iter().enumerate().filter(|(_, p)| !p.is_synthetic()) {
        for (j, b) in points.iter().enumerate().filter(|(_, p)| !p.is_synthetic()) {
            let (pa, pb) = (&a.params, &b.params);
            if same_economy_but_beta_t(pa, pb) && close(pb.beta, 2.0 * pa.beta) && close(pb.t, 0.5 * pa.t) {
                pairs.push((i, j));
            }
        }
    }
    let mut needed: Vec<usize> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
    needed.sort_unstable();
    needed.dedup();
    let regime = Regime::Mandatory {
        x_bar: settings.beta_t_level,
    };
    let welfare: Vec<Option<f64>> = needed
        .par_iter()
        .map(|&k| {
            let solver = solver_for(&points[k], settings).ok()?;
            let outcome = solver.solve(&regime).ok()?;
            outcome.has_equilibrium().then_some(outcome.total_welfare)
        })
        .collect();
    let lookup = |k: usize| welfare[needed.binary_search(&k).expect("solved")];

    let mut report = BetaTReport {
        level: settings.beta_t_level,
        pairs: pairs.len(),
        max_rel_discrepancy: None,
        worst: None,
        skipped: 0,
    };
    for (i, j) in pairs {
        let (Some(wa), Some(wb)) = (lookup(i), lookup(j)) else {
            report.skipped += 1;
            continue;
        };
        let rel = (wa - wb).abs() / wa.abs().max(wb.abs()).max(1e-12);
        if report.max_rel_discrepancy.is_none_or(|m| rel > m) {
            report.max_rel_discrepancy = Some(rel);
            report.worst = Some((i, j));
        }
    }
    report
}
