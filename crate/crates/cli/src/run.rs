//! Subcommand implementations. Each command builds its outputs in memory,
//! then writes them under the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use xdl_core::market::MarketParams;
use xdl_core::policy::{
    beta_t_report, compare_regimes, find_witnesses, BetaTReport, ClaimId, ClaimReport, Evidence, Objective,
    PolicyError, Regime,
};
use xdl_core::solver::{recertify, EquilibriumOutcome, Existence, Solver, SolverError, StageCertificate};

use crate::config::{apply_axis, ConfigError, ScenarioConfig};
use crate::plot::{render_svg, PlotError};
use crate::table::{fmt_num, outcome_row, write_csv, Table, COLUMNS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_EQUILIBRIUM: i32 = 3;
pub const EXIT_NON_CONVERGENCE: i32 = 4;

pub const CLAIM_COLUMNS: [&str; 13] = [
    "claim",
    "status",
    "point",
    "mode",
    "v",
    "gamma",
    "t",
    "beta",
    "c0",
    "points_checked",
    "counterexamples",
    "failures",
    "evidence",
];

/// Identifier of the beta–t report row in claim listings.
pub const BETA_T_ID: &str = "BT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("solver did not converge: {0}")]
    NonConvergence(SolverError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Plot(_) => EXIT_CONFIG,
            CliError::NonConvergence(_) => EXIT_NON_CONVERGENCE,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidConfig { field, reason } => CliError::Config(ConfigError::Validation {
                field: field.to_string(),
                reason,
            }),
            other => CliError::NonConvergence(other),
        }
    }
}

/// Files produced by a command, in write order, and its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub exit_code: i32,
}

impl Artifacts {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        for (name, content) in &self.files {
            let path = dir.join(name);
            fs::write(&path, content).map_err(io(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn blank_row(scenario_id: &str, params: &MarketParams, regime: &Regime, existence: &str) -> Vec<String> {
    let mut row = vec![String::new(); COLUMNS.len()];
    row[0] = scenario_id.to_string();
    row[1] = regime.label().to_string();
    row[2] = regime.x_bar().map(fmt_num).unwrap_or_default();
    row[3] = params.mode.as_str().to_string();
    for (k, x) in [params.v, params.gamma, params.t, params.beta, params.c0]
        .into_iter()
        .enumerate()
    {
        row[4 + k] = fmt_num(x);
    }
    row[29] = existence.to_string();
    row
}

/// Every equilibrium of one regime, selected one first. Non-selected
/// equilibria carry freshly derived certificates.
pub fn all_equilibria(solver: &Solver, regime: &Regime) -> Result<Vec<EquilibriumOutcome>, SolverError> {
    let selected = solver.solve(regime)?;
    let mut out = vec![selected.clone()];
    if let Existence::Multiple(list) = &selected.existence {
        for strategies in list.iter().filter(|s| **s != selected.strategies) {
            let placeholder = StageCertificate {
                price: [0.0; 2],
                quality: [0.0; 2],
                xai: None,
            };
            let mut other =
                EquilibriumOutcome::assemble(solver.params(), *strategies, placeholder, selected.existence.clone());
            other.certificate = recertify(solver, regime, &other)?;
            out.push(other);
        }
    }
    Ok(out)
}

pub fn run_solve(config: &ScenarioConfig) -> Result<Artifacts, CliError> {
    if !config.sweep.is_empty() {
        return Err(CliError::Usage("`solve` takes no sweep axes; use `sweep`".into()));
    }
    let solver = Solver::new(config.params, &config.solver)?;
    let mut rows = Vec::new();
    let mut any_equilibrium = false;
    for regime in &config.regimes {
        for outcome in all_equilibria(&solver, regime)? {
            any_equilibrium |= outcome.has_equilibrium();
            rows.push(outcome_row(&config.scenario_id, &config.params, regime, &outcome));
        }
    }
    Ok(Artifacts {
        files: vec![("solve.csv".into(), write_csv(&COLUMNS, &rows))],
        exit_code: if any_equilibrium { EXIT_OK } else { EXIT_NO_EQUILIBRIUM },
    })
}

/// Sweep coordinates in row order: the first axis varies slowest.
fn sweep_points(config: &ScenarioConfig) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for axis in &config.sweep {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values().into_iter().map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    points
}

pub fn run_sweep(config: &ScenarioConfig) -> Result<Artifacts, CliError> {
    if config.sweep.is_empty() {
        return Err(CliError::Usage("`sweep` needs 1 or 2 sweep axes".into()));
    }
    let mut jobs: Vec<(MarketParams, Regime)> = Vec::new();
    for point in sweep_points(config) {
        for regime in &config.regimes {
            let (mut params, mut regime) = (config.params, *regime);
            for (axis, &value) in config.sweep.iter().zip(&point) {
                (params, regime) = apply_axis(&params, &regime, axis.param, value)?;
            }
            jobs.push((params, regime));
        }
    }

    // Jobs sharing an economy share a solver and its continuation cache.
    let mut economies: Vec<(MarketParams, Vec<usize>)> = Vec::new();
    for (k, (params, _)) in jobs.iter().enumerate() {
        match economies.iter_mut().find(|(p, _)| p == params) {
            Some((_, members)) => members.push(k),
            None => economies.push((*params, vec![k])),
        }
    }
    let solved: Vec<Vec<(usize, EquilibriumOutcome)>> = economies
        .par_iter()
        .map(|(params, members)| {
            let solver = Solver::new(*params, &config.solver)?;
            members
                .par_iter()
                .map(|&k| solver.solve(&jobs[k].1).map(|o| (k, o)))
                .collect::<Result<Vec<_>, SolverError>>()
        })
        .collect::<Result<_, SolverError>>()?;
    let mut outcomes: Vec<Option<EquilibriumOutcome>> = vec![None; jobs.len()];
    for (k, outcome) in solved.into_iter().flatten() {
        outcomes[k] = Some(outcome);
    }

    let mut any_equilibrium = false;
    let rows: Vec<Vec<String>> = jobs
        .iter()
        .zip(&outcomes)
        .map(|((params, regime), outcome)| {
            let outcome = outcome.as_ref().expect("every job solved");
            any_equilibrium |= outcome.has_equilibrium();
            outcome_row(&config.scenario_id, params, regime, outcome)
        })
        .collect();
    let csv = write_csv(&COLUMNS, &rows);
    let mut files = vec![("sweep.csv".to_string(), String::new())];
    if config.svg {
        let table = Table::parse(&csv).expect("own CSV parses");
        files.push(("sweep.svg".into(), render_svg(&table, config.objectives[0].column())?));
    }
    files[0].1 = csv;
    Ok(Artifacts {
        files,
        exit_code: if any_equilibrium { EXIT_OK } else { EXIT_NO_EQUILIBRIUM },
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_else(|| "n/a".into())
}

pub fn run_compare(config: &ScenarioConfig) -> Result<Artifacts, CliError> {
    if !config.sweep.is_empty() {
        return Err(CliError::Usage("`compare` takes no sweep axes".into()));
    }
    let solver = Solver::new(config.params, &config.solver)?;
    let levels = config.levels.clone().unwrap_or_else(|| solver.grids().xai.clone());
    let report = compare_regimes(&solver, &config.objectives, &levels);

    let mut rows = Vec::new();
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "scenario {}: {} levels per regime",
        config.scenario_id,
        levels.len()
    );
    let _ = writeln!(summary, "\nrows:");
    for row in &report.rows {
        let target = row.objective.map(|o| o.name()).unwrap_or("-");
        match &row.outcome {
            Ok(outcome) => {
                rows.push(outcome_row(&config.scenario_id, &config.params, &row.regime, outcome));
                let _ = writeln!(
                    summary,
                    "  {:<12} objective {:<16} x_bar {:<6} welfare {} cs {} profits {} / {} fairness {} [{}]",
                    row.regime.label(),
                    target,
                    opt(row.regime.x_bar()),
                    fmt_num(outcome.total_welfare),
                    fmt_num(outcome.surplus.cs_total),
                    fmt_num(outcome.profits[0]),
                    fmt_num(outcome.profits[1]),
                    fmt_num(row.fairness().unwrap_or(f64::NAN)),
                    outcome.existence.label()
                );
            }
            Err(PolicyError::Solver(e)) => return Err(CliError::from(e.clone())),
            Err(e) => {
                // No optimum, so no level to report.
                let mut blank = blank_row(&config.scenario_id, &config.params, &row.regime, "none_pure");
                blank[2] = String::new();
                rows.push(blank);
                let _ = writeln!(summary, "  {:<12} objective {:<16} {}", row.regime.label(), target, e);
            }
        }
    }
    let _ = writeln!(summary, "\noptima:");
    for o in &report.optima {
        let _ = writeln!(
            summary,
            "  {:<12} {:<16} x_bar* {} value {}",
            o.kind.label(),
            o.objective.name(),
            opt(o.x_bar),
            opt(o.value)
        );
    }
    let _ = writeln!(summary, "\nwelfare gaps (first - second):");
    for g in &report.gaps {
        let _ = writeln!(
            summary,
            "  {:<16} {} - {}: {}",
            g.objective.name(),
            g.first.label(),
            g.second.label(),
            opt(g.value)
        );
    }
    let any_equilibrium = report
        .rows
        .iter()
        .any(|r| r.outcome.as_ref().is_ok_and(|o| o.has_equilibrium()));
    Ok(Artifacts {
        files: vec![
            ("compare.csv".into(), write_csv(&COLUMNS, &rows)),
            ("compare_summary.txt".into(), summary),
        ],
        exit_code: if any_equilibrium { EXIT_OK } else { EXIT_NO_EQUILIBRIUM },
    })
}

/// A claim selector: one of the claims, or the beta–t report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClaimTarget {
    Claim(ClaimId),
    BetaT,
}

/// Parses `--ids`. `None` selects every claim and the beta–t report; an
/// empty list selects nothing.
pub fn parse_claim_ids(ids: Option<&str>) -> Result<Vec<ClaimTarget>, CliError> {
    let Some(ids) = ids else {
        let mut all: Vec<ClaimTarget> = ClaimId::ALL.into_iter().map(ClaimTarget::Claim).collect();
        all.push(ClaimTarget::BetaT);
        return Ok(all);
    };
    let mut out = Vec::new();
    for id in ids.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let target = if id.eq_ignore_ascii_case(BETA_T_ID) {
            ClaimTarget::BetaT
        } else {
            ClaimTarget::Claim(id.parse().map_err(|e: String| {
                CliError::Config(ConfigError::Validation {
                    field: "ids".into(),
                    reason: e,
                })
            })?)
        };
        if !out.contains(&target) {
            out.push(target);
        }
    }
    Ok(out)
}

fn evidence_field(evidence: &Evidence) -> String {
    evidence
        .iter()
        .map(|(name, value)| format!("{name}={}", fmt_num(*value)))
        .collect::<Vec<_>>()
        .join(";")
}

fn point_fields(config: &ScenarioConfig, point: Option<usize>) -> Vec<String> {
    match point.map(|k| &config.panel.points[k].params) {
        Some(p) => vec![
            point.unwrap().to_string(),
            p.mode.as_str().to_string(),
            fmt_num(p.v),
            fmt_num(p.gamma),
            fmt_num(p.t),
            fmt_num(p.beta),
            fmt_num(p.c0),
        ],
        None => vec![String::new(); 7],
    }
}

fn claim_rows(config: &ScenarioConfig, report: &ClaimReport) -> Vec<Vec<String>> {
    let mut head = vec![report.claim.label().to_string(), report.status.label().to_string()];
    head.extend(point_fields(config, report.point));
    head.extend([
        report.points_checked.to_string(),
        report.counterexamples.len().to_string(),
        report.failures.to_string(),
        evidence_field(&report.evidence),
    ]);
    let mut rows = vec![head];
    for (k, evidence) in &report.counterexamples {
        let mut row = vec![report.claim.label().to_string(), "counterexample".to_string()];
        row.extend(point_fields(config, Some(*k)));
        row.extend([String::new(), String::new(), String::new(), evidence_field(evidence)]);
        rows.push(row);
    }
    rows
}

fn beta_t_evidence(report: &BetaTReport) -> Evidence {
    let mut e = vec![
        ("level", report.level),
        ("pairs", report.pairs as f64),
        ("skipped", report.skipped as f64),
    ];
    if let Some(m) = report.max_rel_discrepancy {
        e.push(("max_rel_discrepancy", m));
    }
    if let Some((_, j)) = report.worst {
        e.push(("paired_point", j as f64));
    }
    e
}

fn describe_point(config: &ScenarioConfig, k: usize) -> String {
    let point = &config.panel.points[k];
    let p = &point.params;
    let tag = if point.is_synthetic() {
        " (synthetic opt-in game)"
    } else {
        ""
    };
    format!(
        "#{k} {} v={} gamma={} t={} beta={} c0={}{tag}",
        p.mode.as_str(),
        fmt_num(p.v),
        fmt_num(p.gamma),
        fmt_num(p.t),
        fmt_num(p.beta),
        fmt_num(p.c0)
    )
}

pub fn run_claims(config: &ScenarioConfig, targets: &[ClaimTarget]) -> Result<Artifacts, CliError> {
    let claims: Vec<ClaimId> = targets
        .iter()
        .filter_map(|t| match t {
            ClaimTarget::Claim(c) => Some(*c),
            ClaimTarget::BetaT => None,
        })
        .collect();
    let mut reports = find_witnesses(&claims, &config.panel, &config.claims).into_iter();

    let mut rows = Vec::new();
    let mut text = String::new();
    let _ = writeln!(
        text,
        "scenario {}: {} panel points",
        config.scenario_id,
        config.panel.len()
    );
    for target in targets {
        match target {
            ClaimTarget::Claim(_) => {
                let report = reports.next().expect("one report per claim");
                rows.extend(claim_rows(config, &report));
                let _ = writeln!(
                    text,
                    "\n{} [{}] {}",
                    report.claim.label(),
                    report.status.label(),
                    report.claim.statement()
                );
                let _ = writeln!(
                    text,
                    "  points checked {}, failed solves {}",
                    report.points_checked, report.failures
                );
                if let Some(k) = report.point {
                    let _ = writeln!(text, "  point {}", describe_point(config, k));
                }
                if !report.evidence.is_empty() {
                    let _ = writeln!(text, "  evidence {}", evidence_field(&report.evidence));
                }
                for (k, evidence) in &report.counterexamples {
                    let _ = writeln!(
                        text,
                        "  counterexample {}: {}",
                        describe_point(config, *k),
                        evidence_field(evidence)
                    );
                }
            }
            ClaimTarget::BetaT => {
                let report = beta_t_report(&config.panel, &config.claims);
                let evidence = beta_t_evidence(&report);
                let mut row = vec![BETA_T_ID.to_string(), "reported".to_string()];
                row.extend(point_fields(config, report.worst.map(|(i, _)| i)));
                row.extend([
                    report.pairs.to_string(),
                    String::new(),
                    report.skipped.to_string(),
                    evidence_field(&evidence),
                ]);
                rows.push(row);
                let _ = writeln!(
                    text,
                    "\n{BETA_T_ID} [reported] welfare at (beta, t) against (2 beta, t/2), mandated level {}",
                    fmt_num(report.level)
                );
                let _ = writeln!(
                    text,
                    "  pairs {}, skipped {}, max relative discrepancy {}",
                    report.pairs,
                    report.skipped,
                    opt(report.max_rel_discrepancy)
                );
                if let Some((i, j)) = report.worst {
                    let _ = writeln!(
                        text,
                        "  worst pair {} vs {}",
                        describe_point(config, i),
                        describe_point(config, j)
                    );
                }
            }
        }
    }
    Ok(Artifacts {
        files: vec![
            ("claims.csv".into(), write_csv(&CLAIM_COLUMNS, &rows)),
            ("claims.txt".into(), text),
        ],
        exit_code: EXIT_OK,
    })
}

/// Re-renders a sweep CSV; identical to the SVG `sweep` writes for the same
/// rows and objective.
pub fn run_render(csv: &str, objective: &str) -> Result<String, CliError> {
    let objective: Objective = objective.parse().map_err(|e: String| {
        CliError::Config(ConfigError::Validation {
            field: "objective".into(),
            reason: e,
        })
    })?;
    let table = Table::parse(csv).map_err(PlotError::from)?;
    Ok(render_svg(&table, objective.column())?)
}
