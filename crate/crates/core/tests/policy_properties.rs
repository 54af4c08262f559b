mod common;

use proptest::prelude::*;

use xdl_core::market::{FirmStrategy, MarketParams, XaiMode};
use xdl_core::policy::{fairness_index, objective_value, optimal_policy, Objective, Regime, RegimeKind};
use xdl_core::solver::{EquilibriumOutcome, Existence, GridScale, Solver, SolverConfig, StageCertificate};

fn small() -> SolverConfig {
    let mut c = SolverConfig::for_scale(GridScale::Coarse);
    c.quality_grid.steps = 9;
    c.xai_steps = 5;
    c
}

fn outcome(p: &MarketParams, s: [FirmStrategy; 2]) -> EquilibriumOutcome {
    EquilibriumOutcome::assemble(p, s, StageCertificate::default(), Existence::Unique)
}

/// Fit parity from reference integrals.
fn reference_fairness(p: &MarketParams, s: [FirmStrategy; 2]) -> f64 {
    let offers = common::offers(
        p.mode == XaiMode::Differentiated,
        [(s[0].x, s[0].q, s[0].p), (s[1].x, s[1].q, s[1].p)],
    );
    let r = common::integrate(p.v, p.gamma, p.t, p.group_boundary, &offers, 400_000);
    let mean = |g: usize| {
        if r.group_buyers[g] > 0.0 {
            r.group_fit[g] / r.group_buyers[g]
        } else {
            0.0
        }
    };
    let (a, b) = (mean(0), mean(1));
    if a.abs() + b.abs() == 0.0 {
        1.0
    } else {
        1.0 - (a - b).abs() / (a.abs() + b.abs())
    }
}

fn strategy() -> impl Strategy<Value = FirmStrategy> {
    (0.0..=1.0f64, 0.0..1.5f64, 0.0..3.0f64).prop_map(|(x, q, p)| FirmStrategy { x, q, p })
}

fn params(mode: XaiMode) -> impl Strategy<Value = MarketParams> {
    (0.0..3.0f64, 0.0..2.0f64, 0.0..4.0f64, 0.25..4.0f64)
        .prop_map(move |(v, gamma, t, beta)| MarketParams::new(v, gamma, t, beta, 0.0, mode).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fairness_is_invariant_under_reflection(p in params(XaiMode::Differentiated), s1 in strategy(), s2 in strategy()) {
        let o = outcome(&p, [s1, s2]);
        let reflected = o.swapped(&p);
        prop_assert!((fairness_index(&o) - fairness_index(&reflected)).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&fairness_index(&o)));
    }

    #[test]
    fn fairness_matches_reference_integration(
        mode in prop_oneof![Just(XaiMode::Differentiated), Just(XaiMode::Shared)],
        seed in params(XaiMode::Shared), s1 in strategy(), s2 in strategy(),
    ) {
        let p = MarketParams { mode, ..seed };
        let o = outcome(&p, [s1, s2]);
        // Means of tiny buyer masses are ill-conditioned.
        let buyers = o.surplus.group_fit.map(|g| g.buyers);
        prop_assume!(buyers.iter().all(|&b| b == 0.0 || b > 0.01));
        prop_assert!((fairness_index(&o) - reference_fairness(&p, [s1, s2])).abs() <= 1e-3);
    }

    #[test]
    fn outcomes_satisfy_the_welfare_identity(p in params(XaiMode::Shared), s1 in strategy(), s2 in strategy()) {
        let o = outcome(&p, [s1, s2]);
        prop_assert!((o.total_welfare - (o.profits[0] + o.profits[1] + o.surplus.cs_total)).abs() <= 1e-9);
        prop_assert!((objective_value(&o, Objective::TotalWelfare).unwrap() - o.total_welfare).abs() == 0.0);
    }
}

#[test]
fn shared_explanations_favour_the_revealed_end() {
    let p = MarketParams::new(1.0, 1.0, 1.0, 1.0, 0.0, XaiMode::Shared).unwrap();
    let s = FirmStrategy { x: 0.5, q: 0.2, p: 0.5 };
    let f = fairness_index(&outcome(&p, [s, s]));
    let reference = reference_fairness(&p, [s, s]);
    assert!((f - reference).abs() < 1e-4, "{f} vs {reference}");
    assert!(f < 1.0);
}

#[test]
fn mandatory_optimum_dominates_every_level() {
    let levels: Vec<f64> = (0..=4).map(|k| k as f64 / 4.0).collect();
    for (gamma, t, mode) in [
        (1.0, 1.0, XaiMode::Differentiated),
        (2.0, 0.5, XaiMode::Shared),
        (0.5, 4.0, XaiMode::Differentiated),
    ] {
        let p = MarketParams::new(2.0, gamma, t, 1.0, 0.0, mode).unwrap();
        let sweep = optimal_policy(&p, RegimeKind::Mandatory, Objective::TotalWelfare, &levels, &small()).unwrap();
        let max = sweep
            .table
            .iter()
            .filter_map(|e| e.value)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(sweep.value(), max);
        for entry in &sweep.table {
            if let Some(v) = entry.value {
                assert!(sweep.outcome().total_welfare >= v);
            }
        }
    }
}

#[test]
fn payoff_irrelevant_explanations_flatten_welfare_across_regimes() {
    let p = MarketParams::new(2.0, 0.0, 0.0, 1.0, 0.0, XaiMode::Differentiated).unwrap();
    let solver = Solver::new(p, &small()).unwrap();
    let base = solver.solve(&Regime::Unregulated).unwrap();
    for x_bar in [0.0, 0.25, 0.5, 1.0] {
        for regime in [Regime::Mandatory { x_bar }, Regime::Optional { x_bar }] {
            let o = solver.solve(&regime).unwrap();
            for objective in [Objective::TotalWelfare, Objective::ConsumerSurplus] {
                let (a, b) = (
                    objective_value(&o, objective).unwrap(),
                    objective_value(&base, objective).unwrap(),
                );
                assert!((a - b).abs() <= 1e-12, "{regime:?} {objective:?}: {a} vs {b}");
            }
        }
    }
}
