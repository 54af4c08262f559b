use xdl_cli::run::{parse_claim_ids, EXIT_NO_EQUILIBRIUM, EXIT_OK};
use xdl_cli::table::{Table, COLUMNS};
use xdl_cli::{parse_config, run_claims, run_compare, run_solve, run_sweep, ScenarioConfig};

const SMALL: &str = r#""solver":{"grid_scale":"coarse","quality_grid":{"steps":9},"xai_steps":5}"#;

fn config(params: &str, extra: &str) -> ScenarioConfig {
    parse_config(&format!(r#"{{"params":{params},{SMALL}{extra}}}"#), None).unwrap()
}

const P0: &str = r#"{"v":2,"gamma":1,"t":1,"beta":1,"mode":"Differentiated"}"#;

fn fills(svg: &str, tag: &str) -> Vec<String> {
    svg.lines()
        .filter(|l| l.starts_with(tag) && !l.contains(r##"fill="none""##))
        .map(|l| {
            l.split("fill=\"")
                .nth(1)
                .unwrap()
                .split('"')
                .next()
                .unwrap()
                .to_string()
        })
        .collect()
}

#[test]
fn five_by_five_sweep_has_twenty_five_rows() {
    let c = config(
        P0,
        r#","regime":{"kind":"Mandatory","x_bar":0.5},
           "sweep":[{"param":"v","min":1,"max":2,"steps":5},{"param":"beta","min":0.5,"max":2.5,"steps":5}]"#,
    );
    let a = run_sweep(&c).unwrap();
    let t = Table::parse(a.file("sweep.csv").unwrap()).unwrap();
    assert_eq!(t.header, COLUMNS);
    assert_eq!(t.rows.len(), 25);
    let svg = a.file("sweep.svg").unwrap();
    assert_eq!(fills(svg, r#"<rect x="#).len(), 25 + 1 + 6);
}

#[test]
fn sweep_rows_multiply_by_regimes() {
    let c = config(
        P0,
        r#","regime":[{"kind":"Mandatory","x_bar":0.5},{"kind":"Optional","x_bar":0.5}],
           "sweep":[{"param":"gamma","min":0.5,"max":1,"steps":3}]"#,
    );
    let t = Table::parse(run_sweep(&c).unwrap().file("sweep.csv").unwrap()).unwrap();
    assert_eq!(t.strings("regime").unwrap(), ["mandatory", "optional"].repeat(3));
}

#[test]
fn constant_welfare_sweep_is_flat_with_argmax_at_the_smallest_level() {
    let c = config(
        r#"{"v":2,"gamma":0,"t":0,"beta":1,"mode":"Differentiated"}"#,
        r#","regime":{"kind":"Mandatory","x_bar":0},"sweep":[{"param":"x_bar","min":0,"max":1,"steps":5}]"#,
    );
    let a = run_sweep(&c).unwrap();
    let t = Table::parse(a.file("sweep.csv").unwrap()).unwrap();
    let w: Vec<f64> = t
        .numbers("total_welfare")
        .unwrap()
        .into_iter()
        .map(Option::unwrap)
        .collect();
    assert!(w.iter().all(|x| *x == w[0]), "{w:?}");
    let svg = a.file("sweep.svg").unwrap();
    let colors = fills(svg, "<circle");
    assert_eq!(colors.len(), 5);
    assert!(colors.iter().all(|c| c == &colors[0]));
    assert!(svg.contains("max ") && svg.contains(" at x_bar=0<"), "{svg}");
}

#[test]
fn csv_rows_keep_the_welfare_identity() {
    let c = config(
        P0,
        r#","regime":[{"kind":"Unregulated"},{"kind":"Mandatory","x_bar":0.25},{"kind":"Optional","x_bar":0.75}]"#,
    );
    let t = Table::parse(run_solve(&c).unwrap().file("solve.csv").unwrap()).unwrap();
    let col = |n: &str| t.numbers(n).unwrap();
    let (p1, p2, cs, w) = (col("profit1"), col("profit2"), col("cs_total"), col("total_welfare"));
    for k in 0..t.rows.len() {
        if let (Some(a), Some(b), Some(c), Some(w)) = (p1[k], p2[k], cs[k], w[k]) {
            assert!((a + b + c - w).abs() <= 1e-9, "row {k}");
        }
    }
}

#[test]
fn solve_is_repeatable() {
    let text = format!(r#"{{"params":{P0},{SMALL},"regime":{{"kind":"Unregulated"}}}}"#);
    let a = run_solve(&parse_config(&text, None).unwrap()).unwrap();
    let b = run_solve(&parse_config(&text, None).unwrap()).unwrap();
    assert_eq!(a.files, b.files);
}

#[test]
fn compare_reports_three_regimes() {
    let c = config(
        P0,
        r#","levels":[0,0.5,1],"objectives":["TotalWelfare","ConsumerSurplus"]"#,
    );
    let a = run_compare(&c).unwrap();
    assert_eq!(a.exit_code, EXIT_OK);
    let t = Table::parse(a.file("compare.csv").unwrap()).unwrap();
    let regimes = t.strings("regime").unwrap();
    assert_eq!(regimes.len(), 5);
    assert_eq!(regimes.iter().filter(|r| **r == "unregulated").count(), 1);
    let summary = a.file("compare_summary.txt").unwrap();
    assert!(summary.contains("optima:") && summary.contains("welfare gaps"));
}

const NO_PURE_OPT_IN: &str = r#""payoffs":[[[1,0],[0,1]],[[0,1],[1,0]]]"#;

#[test]
fn synthetic_opt_in_game_is_detected_through_the_claims_run() {
    let c = config(
        P0,
        &format!(r#","panel":{{"preset":"none","synthetic":[{{"params":{P0},{NO_PURE_OPT_IN}}}]}}"#),
    );
    let a = run_claims(&c, &parse_claim_ids(Some("C4")).unwrap()).unwrap();
    assert_eq!(a.exit_code, EXIT_OK);
    let t = Table::parse(a.file("claims.csv").unwrap()).unwrap();
    assert_eq!(t.strings("claim").unwrap(), ["C4"]);
    assert_eq!(t.strings("status").unwrap(), ["witness_found"]);
    assert_eq!(t.strings("point").unwrap(), ["0"]);
    assert!(t.strings("evidence").unwrap()[0].contains("synthetic=1"));
    assert!(a.file("claims.txt").unwrap().contains("synthetic opt-in game"));
}

#[test]
fn claims_without_a_witness_report_an_exhausted_panel() {
    let c = config(
        P0,
        r#","panel":{"preset":"none","points":[{"v":2,"gamma":1,"t":1,"beta":1,"mode":"Shared"}]}"#,
    );
    let a = run_claims(&c, &parse_claim_ids(Some("C4,BT")).unwrap()).unwrap();
    let t = Table::parse(a.file("claims.csv").unwrap()).unwrap();
    assert_eq!(t.strings("claim").unwrap(), ["C4", "BT"]);
    assert_eq!(t.strings("status").unwrap()[1], "reported");
    assert!(["exhausted_panel", "witness_found"].contains(&t.strings("status").unwrap()[0]));
}

/// An economy whose opt-in game at level 0.75 has no pure equilibrium.
const NO_PURE: &str = r#"{"v":1,"gamma":0.5,"t":4,"beta":2,"mode":"Differentiated"}"#;

#[test]
fn regimes_without_equilibrium_are_rows_not_failures() {
    let coarse = |extra: &str| {
        parse_config(
            &format!(r#"{{"params":{NO_PURE},"solver":{{"grid_scale":"coarse"}}{extra}}}"#),
            None,
        )
        .unwrap()
    };
    let c = coarse(r#","regime":[{"kind":"Mandatory","x_bar":0},{"kind":"Optional","x_bar":0.75}]"#);
    let a = run_solve(&c).unwrap();
    assert_eq!(a.exit_code, EXIT_OK);
    let t = Table::parse(a.file("solve.csv").unwrap()).unwrap();
    let existence = t.strings("existence").unwrap();
    assert_eq!(*existence.last().unwrap(), "none_pure");
    assert_eq!(*t.strings("regime").unwrap().last().unwrap(), "optional");

    let c = coarse(r#","regime":{"kind":"Optional","x_bar":0.75}"#);
    assert_eq!(run_solve(&c).unwrap().exit_code, EXIT_NO_EQUILIBRIUM);
}
