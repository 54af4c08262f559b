//! Fixed-schema CSV rows.

use thiserror::Error;

use xdl_core::market::MarketParams;
use xdl_core::policy::{fairness_index, Regime};
use xdl_core::solver::EquilibriumOutcome;

pub const COLUMNS: [&str; 31] = [
    "scenario_id",
    "regime",
    "x_bar",
    "mode",
    "v",
    "gamma",
    "t",
    "beta",
    "c0",
    "x1",
    "q1",
    "p1",
    "x2",
    "q2",
    "p2",
    "d1",
    "d2",
    "d0",
    "profit1",
    "profit2",
    "cs_total",
    "cs_A",
    "cs_B",
    "total_welfare",
    "avg_xai_received",
    "avg_misfit",
    "fairness",
    "n_adopters",
    "classification",
    "existence",
    "max_dev_gain",
];

/// `printf("%.12g")`, with negative zero printed as `0`.
pub fn fmt_num(x: f64) -> String {
    fmt_sig(x, 12)
}

/// `printf("%.{digits}g")`.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One equilibrium of one regime, formatted in column order.
pub fn outcome_row(
    scenario_id: &str,
    params: &MarketParams,
    regime: &Regime,
    outcome: &EquilibriumOutcome,
) -> Vec<String> {
    let [s1, s2] = outcome.strategies;
    let n = fmt_num;
    vec![
        scenario_id.to_string(),
        regime.label().to_string(),
        regime.x_bar().map(n).unwrap_or_default(),
        params.mode.as_str().to_string(),
        n(params.v),
        n(params.gamma),
        n(params.t),
        n(params.beta),
        n(params.c0),
        n(s1.x),
        n(s1.q),
        n(s1.p),
        n(s2.x),
        n(s2.q),
        n(s2.p),
        n(outcome.demand.d1),
        n(outcome.demand.d2),
        n(outcome.demand.d0),
        n(outcome.profits[0]),
        n(outcome.profits[1]),
        n(outcome.surplus.cs_total),
        n(outcome.surplus.cs_by_group[0]),
        n(outcome.surplus.cs_by_group[1]),
        n(outcome.total_welfare),
        n(outcome.surplus.avg_xai_received),
        n(outcome.surplus.avg_misfit),
        n(fairness_index(outcome)),
        outcome.xai_adopters().to_string(),
        outcome
            .classification
            .map(|c| c.label())
            .unwrap_or_default()
            .to_string(),
        outcome.existence.label().to_string(),
        n(outcome.certificate.max_gain()),
    ]
}

pub fn write_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("CSV is empty")]
    Empty,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    Width { line: usize, expected: usize, found: usize },
    #[error("line {line}: `{value}` in column `{column}` is not a number")]
    NotNumeric { line: usize, column: String, value: String },
}

/// Parsed CSV with a header row. Fields never contain commas or quotes.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, CsvError> {
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or(CsvError::Empty)?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(CsvError::Width {
                    line: k + 2,
                    expected: header.len(),
                    found: row.len(),
                });
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, CsvError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CsvError::MissingColumn(name.to_string()))
    }

    /// Numeric column; empty fields are `None`.
    pub fn numbers(&self, name: &str) -> Result<Vec<Option<f64>>, CsvError> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let field = &row[c];
                if field.is_empty() {
                    return Ok(None);
                }
                field.parse::<f64>().map(Some).map_err(|_| CsvError::NotNumeric {
                    line: k + 2,
                    column: name.to_string(),
                    value: field.clone(),
                })
            })
            .collect()
    }

    pub fn strings(&self, name: &str) -> Result<Vec<&str>, CsvError> {
        let c = self.column(name)?;
        Ok(self.rows.iter().map(|row| row[c].as_str()).collect())
    }
}
