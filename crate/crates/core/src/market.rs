//! Market primitives: parameters, firm strategies, revealed explanation sets
//! and the pointwise utility / cost / profit evaluations.
//!
//! Consumers are spread uniformly over the feature line `[0, 1]`. A firm with
//! XAI level `x` reveals an interval of length `x` of that line. Consumers
//! whose feature of interest lies inside the interval get the full value of
//! an explanation; the rest pay a misfit cost proportional to their distance
//! from it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

fn check(field: &'static str, ok: bool, reason: impl Into<String>) -> Result<(), ModelError> {
    if ok {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            field,
            reason: reason.into(),
        })
    }
}

/// Which end of the feature line each firm's explanations reveal from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum XaiMode {
    /// Firm 1 reveals `[0, x1]`, firm 2 reveals `[1 - x2, 1]`.
    Differentiated,
    /// Both firms reveal from the left end, `[0, x]`.
    Shared,
}

impl XaiMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            XaiMode::Differentiated => "Differentiated",
            XaiMode::Shared => "Shared",
        }
    }
}

/// Firm label. Firm 1 is anchored at the left end of the feature line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Firm {
    One,
    Two,
}

impl Firm {
    pub fn index(self) -> usize {
        match self {
            Firm::One => 0,
            Firm::Two => 1,
        }
    }

    pub fn other(self) -> Firm {
        match self {
            Firm::One => Firm::Two,
            Firm::Two => Firm::One,
        }
    }

    pub fn from_index(i: usize) -> Firm {
        if i == 0 {
            Firm::One
        } else {
            Firm::Two
        }
    }
}

pub const DEFAULT_GROUP_BOUNDARY: f64 = 0.5;

/// Primitives of the economy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Base value of the product.
    pub v: f64,
    /// Utility per unit of XAI level.
    pub gamma: f64,
    /// Misfit cost per unit distance from the revealed set.
    pub t: f64,
    /// Coefficient of the convex per-unit cost of quality.
    pub beta: f64,
    /// Baseline marginal cost.
    pub c0: f64,
    pub mode: XaiMode,
    /// Consumers with `theta < group_boundary` belong to group A.
    pub group_boundary: f64,
}

impl MarketParams {
    pub fn new(v: f64, gamma: f64, t: f64, beta: f64, c0: f64, mode: XaiMode) -> Result<Self, ModelError> {
        let params = MarketParams {
            v,
            gamma,
            t,
            beta,
            c0,
            mode,
            group_boundary: DEFAULT_GROUP_BOUNDARY,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_group_boundary(mut self, boundary: f64) -> Result<Self, ModelError> {
        self.group_boundary = boundary;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, value) in [("v", self.v), ("gamma", self.gamma), ("t", self.t), ("c0", self.c0)] {
            check(field, value.is_finite(), "must be finite")?;
            check(field, value >= 0.0, format!("must be >= 0, got {value}"))?;
        }
        check("beta", self.beta.is_finite(), "must be finite")?;
        check("beta", self.beta > 0.0, format!("must be > 0, got {}", self.beta))?;
        check(
            "group_boundary",
            self.group_boundary > 0.0 && self.group_boundary < 1.0,
            format!("must lie in (0, 1), got {}", self.group_boundary),
        )
    }

    /// Scale used for relative tolerances.
    pub fn utility_scale(&self) -> f64 {
        (self.v + self.gamma).max(1.0)
    }
}

/// One firm's choice triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirmStrategy {
    pub x: f64,
    pub q: f64,
    pub p: f64,
}

impl FirmStrategy {
    pub fn new(x: f64, q: f64, p: f64) -> Result<Self, ModelError> {
        let s = FirmStrategy { x, q, p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check(
            "x",
            self.x.is_finite() && (0.0..=1.0).contains(&self.x),
            format!("must lie in [0, 1], got {}", self.x),
        )?;
        check(
            "q",
            self.q.is_finite() && self.q >= 0.0,
            format!("must be >= 0, got {}", self.q),
        )?;
        check(
            "p",
            self.p.is_finite() && self.p >= 0.0,
            format!("must be >= 0, got {}", self.p),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Consumer {
    pub theta: f64,
    pub group: Group,
}

impl Consumer {
    pub fn new(theta: f64, params: &MarketParams) -> Result<Self, ModelError> {
        check(
            "theta",
            (0.0..=1.0).contains(&theta),
            format!("must lie in [0, 1], got {theta}"),
        )?;
        Ok(Consumer {
            theta,
            group: group_of(theta, params),
        })
    }
}

pub fn group_of(theta: f64, params: &MarketParams) -> Group {
    if theta < params.group_boundary {
        Group::A
    } else {
        Group::B
    }
}

/// The part of the feature line a firm's explanation reveals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevealedSet {
    pub lo: f64,
    pub hi: f64,
    pub empty: bool,
}

impl RevealedSet {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }
}

pub fn revealed_interval(firm: Firm, x: f64, mode: XaiMode) -> RevealedSet {
    if x <= 0.0 {
        // Anchor the empty set at the firm's end so lo == hi holds.
        let at = match (firm, mode) {
            (Firm::Two, XaiMode::Differentiated) => 1.0,
            _ => 0.0,
        };
        return RevealedSet {
            lo: at,
            hi: at,
            empty: true,
        };
    }
    match (firm, mode) {
        (Firm::Two, XaiMode::Differentiated) => RevealedSet {
            lo: 1.0 - x,
            hi: 1.0,
            empty: false,
        },
        _ => RevealedSet {
            lo: 0.0,
            hi: x,
            empty: false,
        },
    }
}

/// Distance from `theta` to the revealed set; zero inside it and for the
/// empty set.
pub fn misfit(theta: f64, set: &RevealedSet) -> f64 {
    if set.empty {
        return 0.0;
    }
    if theta < set.lo {
        set.lo - theta
    } else if theta > set.hi {
        theta - set.hi
    } else {
        0.0
    }
}

/// Explanation utility `x * (gamma - t * misfit)` for a consumer at `theta`.
pub fn explanation_term(theta: f64, params: &MarketParams, x: f64, firm: Firm) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let set = revealed_interval(firm, x, params.mode);
    x * (params.gamma - params.t * misfit(theta, &set))
}

pub fn utility(theta: f64, params: &MarketParams, s: &FirmStrategy, firm: Firm) -> f64 {
    params.v + s.q + explanation_term(theta, params, s.x, firm) - s.p
}

pub fn unit_cost(q: f64, params: &MarketParams) -> f64 {
    params.c0 + params.beta * q * q
}

pub fn profit(s: &FirmStrategy, demand: f64, params: &MarketParams) -> f64 {
    (s.p - unit_cost(s.q, params)) * demand
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64, gamma: f64, t: f64) -> MarketParams {
        MarketParams::new(v, gamma, t, 1.0, 0.0, XaiMode::Differentiated).unwrap()
    }

    #[test]
    fn revealed_interval_examples() {
        let r = revealed_interval(Firm::One, 0.5, XaiMode::Differentiated);
        assert_eq!((r.lo, r.hi, r.empty), (0.0, 0.5, false));
        let r = revealed_interval(Firm::Two, 0.25, XaiMode::Differentiated);
        assert_eq!((r.lo, r.hi), (0.75, 1.0));
        let r = revealed_interval(Firm::Two, 0.4, XaiMode::Shared);
        assert_eq!((r.lo, r.hi), (0.0, 0.4));
        let r = revealed_interval(Firm::Two, 0.0, XaiMode::Differentiated);
        assert!(r.empty);
        assert_eq!(r.lo, r.hi);
    }

    #[test]
    fn misfit_examples() {
        let left = revealed_interval(Firm::One, 0.5, XaiMode::Differentiated);
        assert_eq!(misfit(0.25, &left), 0.0);
        assert!((misfit(0.9, &left) - 0.4).abs() < 1e-15);
        let right = revealed_interval(Firm::Two, 0.25, XaiMode::Differentiated);
        assert_eq!(misfit(0.5, &right), 0.25);
        let empty = revealed_interval(Firm::One, 0.0, XaiMode::Shared);
        assert_eq!(misfit(0.9, &empty), 0.0);
    }

    #[test]
    fn utility_examples() {
        let params = p(2.0, 1.0, 1.0);
        let s = FirmStrategy::new(0.5, 0.5, 1.0).unwrap();
        assert_eq!(utility(0.25, &params, &s, Firm::One), 2.0);
        assert!((utility(0.75, &params, &s, Firm::One) - 1.875).abs() < 1e-15);
        let no_xai = FirmStrategy::new(0.0, 1.0, 1.0).unwrap();
        for theta in [0.0, 0.3, 1.0] {
            for (gamma, t) in [(0.0, 0.0), (3.0, 7.0)] {
                assert_eq!(utility(theta, &p(2.0, gamma, t), &no_xai, Firm::Two), 2.0);
            }
        }
    }

    #[test]
    fn cost_and_profit_examples() {
        let mut params = p(1.0, 1.0, 1.0);
        params.c0 = 0.3;
        assert_eq!(unit_cost(0.0, &params), 0.3);
        params.c0 = 0.0;
        assert_eq!(unit_cost(1.0, &params), 1.0);
        params.beta = 2.0;
        params.c0 = 0.1;
        assert!((unit_cost(0.5, &params) - 0.6).abs() < 1e-15);

        let params = p(1.0, 1.0, 1.0);
        assert_eq!(profit(&FirmStrategy::new(0.0, 0.0, 1.0).unwrap(), 0.5, &params), 0.5);
        assert_eq!(profit(&FirmStrategy::new(0.3, 0.7, 2.0).unwrap(), 0.0, &params), 0.0);
        let s = FirmStrategy::new(0.0, 1.0, 1.5).unwrap();
        assert!((profit(&s, 0.4, &params) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn validation_names_the_field() {
        let err = MarketParams::new(2.0, 1.0, -1.0, 1.0, 0.0, XaiMode::Shared).unwrap_err();
        assert!(matches!(err, ModelError::InvalidParameter { field: "t", .. }));
        let err = MarketParams::new(2.0, 1.0, 1.0, 0.0, 0.0, XaiMode::Shared).unwrap_err();
        assert!(matches!(err, ModelError::InvalidParameter { field: "beta", .. }));
        assert!(p(1.0, 1.0, 1.0).with_group_boundary(1.0).is_err());
        assert!(FirmStrategy::new(1.5, 0.0, 0.0).is_err());
        assert!(FirmStrategy::new(0.5, -0.1, 0.0).is_err());
    }

    #[test]
    fn consumer_group_follows_boundary() {
        let params = p(1.0, 1.0, 1.0);
        assert_eq!(Consumer::new(0.2, &params).unwrap().group, Group::A);
        assert_eq!(Consumer::new(0.5, &params).unwrap().group, Group::B);
        assert!(Consumer::new(1.2, &params).is_err());
    }
}
