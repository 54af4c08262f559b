//! Exact demand and consumer surplus.
//!
//! Both firms' utilities are piecewise linear in the consumer location
//! `theta`, with kinks only at the ends of the revealed sets. On every linear
//! piece the consumer's choice can change only where two of the lines
//! `{U1, U2, 0}` cross, so the whole line splits into at most a dozen
//! segments with a constant choice. Each segment is integrated in closed
//! form.
//!
//! Where both utilities coincide on a segment of positive length the segment
//! goes to the higher-quality firm, as for single consumers in
//! [`best_choice`]; at equal quality it is shared equally instead of going to
//! firm 1, which keeps the two firms' roles exchangeable.

use crate::market::{
    explanation_term, misfit, revealed_interval, utility, Firm, FirmStrategy, MarketParams, RevealedSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Choice {
    Firm1,
    Firm2,
    None,
}

/// Market shares of the two firms and of the outside option.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    pub d1: f64,
    pub d2: f64,
    pub d0: f64,
    /// Locations where the consumer's best choice changes.
    pub breakpoints: Vec<f64>,
}

impl DemandProfile {
    pub fn demand(&self, firm: Firm) -> f64 {
        match firm {
            Firm::One => self.d1,
            Firm::Two => self.d2,
        }
    }
}

/// Buyer mass and integrated explanation fit inside one consumer group.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GroupFit {
    pub buyers: f64,
    pub fit_integral: f64,
}

impl GroupFit {
    /// Average explanation fit of the group's buyers; zero when nobody buys.
    pub fn mean_fit(&self) -> f64 {
        if self.buyers > 0.0 {
            self.fit_integral / self.buyers
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurplusReport {
    pub cs_total: f64,
    /// Surplus of groups A and B.
    pub cs_by_group: [f64; 2],
    pub avg_xai_received: f64,
    pub avg_misfit: f64,
    pub group_fit: [GroupFit; 2],
}

/// Pointwise choice. Ties between firms go to the higher-quality firm, then
/// to firm 1; a tie with the outside option goes to buying.
pub fn best_choice(theta: f64, params: &MarketParams, s1: &FirmStrategy, s2: &FirmStrategy) -> Choice {
    let u1 = utility(theta, params, s1, Firm::One);
    let u2 = utility(theta, params, s2, Firm::Two);
    choose(u1, u2, s1.q, s2.q)
}

fn choose(u1: f64, u2: f64, q1: f64, q2: f64) -> Choice {
    if u1.max(u2) < 0.0 {
        return Choice::None;
    }
    if u2 > u1 || (u2 == u1 && q2 > q1) {
        Choice::Firm2
    } else {
        Choice::Firm1
    }
}

/// `a + b * theta`
#[derive(Debug, Clone, Copy, PartialEq)]
struct Line {
    a: f64,
    b: f64,
}

impl Line {
    fn at(&self, theta: f64) -> f64 {
        self.a + self.b * theta
    }

    /// Exact integral over `[l, r]`.
    fn integral(&self, l: f64, r: f64) -> f64 {
        (r - l) * (self.a + 0.5 * self.b * (l + r))
    }

    fn minus(&self, other: &Line) -> Line {
        Line {
            a: self.a - other.a,
            b: self.b - other.b,
        }
    }

    fn root(&self) -> Option<f64> {
        if self.b != 0.0 {
            Some(-self.a / self.b)
        } else {
            None
        }
    }
}

/// Restriction of one firm's utility, explanation fit and misfit to a piece
/// that contains no end of its revealed set.
#[derive(Debug, Clone, Copy)]
struct FirmLines {
    utility: Line,
    fit: Line,
    misfit: Line,
    x: f64,
}

fn firm_lines(params: &MarketParams, s: &FirmStrategy, set: &RevealedSet, mid: f64) -> FirmLines {
    let base = params.v + s.q - s.p;
    let x = s.x;
    let (fit, misfit) = if set.empty || x <= 0.0 {
        (Line { a: 0.0, b: 0.0 }, Line { a: 0.0, b: 0.0 })
    } else if mid < set.lo {
        (
            Line {
                a: x * (params.gamma - params.t * set.lo),
                b: x * params.t,
            },
            Line { a: set.lo, b: -1.0 },
        )
    } else if mid > set.hi {
        (
            Line {
                a: x * (params.gamma + params.t * set.hi),
                b: -x * params.t,
            },
            Line { a: -set.hi, b: 1.0 },
        )
    } else {
        (
            Line {
                a: x * params.gamma,
                b: 0.0,
            },
            Line { a: 0.0, b: 0.0 },
        )
    };
    FirmLines {
        utility: Line {
            a: base + fit.a,
            b: fit.b,
        },
        fit,
        misfit,
        x,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SegmentChoice {
    One,
    Two,
    Split,
    Abstain,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    l: f64,
    r: f64,
    choice: SegmentChoice,
    lines: [FirmLines; 2],
}

/// Small fixed-capacity sorted point set.
struct Points {
    buf: [f64; 8],
    len: usize,
}

impl Points {
    fn new() -> Self {
        Points { buf: [0.0; 8], len: 0 }
    }

    fn insert(&mut self, value: f64) {
        if self.as_slice().contains(&value) {
            return;
        }
        let mut i = self.len;
        while i > 0 && self.buf[i - 1] > value {
            self.buf[i] = self.buf[i - 1];
            i -= 1;
        }
        self.buf[i] = value;
        self.len += 1;
    }

    fn as_slice(&self) -> &[f64] {
        &self.buf[..self.len]
    }
}

const ROOT_SNAP: f64 = 1e-14;

fn push_interior(points: &mut Points, value: f64) {
    if value > 0.0 && value < 1.0 {
        points.insert(value);
    }
}

/// Walks `[0, 1]` left to right, calling `f` on every maximal segment with a
/// constant choice structure. `own` plays the role of firm 1 and `other` of
/// firm 2.
fn for_each_segment<F: FnMut(&Segment)>(
    params: &MarketParams,
    own: &FirmStrategy,
    other: &FirmStrategy,
    split_groups: bool,
    mut f: F,
) {
    let sets = [
        revealed_interval(Firm::One, own.x, params.mode),
        revealed_interval(Firm::Two, other.x, params.mode),
    ];
    let mut kinks = Points::new();
    kinks.insert(0.0);
    kinks.insert(1.0);
    for set in &sets {
        if !set.empty {
            push_interior(&mut kinks, set.lo);
            push_interior(&mut kinks, set.hi);
        }
    }
    if split_groups {
        push_interior(&mut kinks, params.group_boundary);
    }

    for piece in kinks.as_slice().windows(2) {
        let (l, r) = (piece[0], piece[1]);
        let mid = 0.5 * (l + r);
        let lines = [
            firm_lines(params, own, &sets[0], mid),
            firm_lines(params, other, &sets[1], mid),
        ];
        let (u1, u2) = (lines[0].utility, lines[1].utility);

        let mut cuts = Points::new();
        cuts.insert(l);
        cuts.insert(r);
        for line in [u1.minus(&u2), u1, u2] {
            if let Some(root) = line.root() {
                // Crossings within rounding distance of a kink are the kink.
                if root > l + ROOT_SNAP && root < r - ROOT_SNAP {
                    cuts.insert(root);
                }
            }
        }
        for sub in cuts.as_slice().windows(2) {
            let (sl, sr) = (sub[0], sub[1]);
            if sr <= sl {
                continue;
            }
            let m = 0.5 * (sl + sr);
            let (v1, v2) = (u1.at(m), u2.at(m));
            let choice = if v1.max(v2) < 0.0 {
                SegmentChoice::Abstain
            } else if v1 > v2 {
                SegmentChoice::One
            } else if v2 > v1 {
                SegmentChoice::Two
            } else if own.q > other.q {
                SegmentChoice::One
            } else if other.q > own.q {
                SegmentChoice::Two
            } else {
                SegmentChoice::Split
            };
            f(&Segment {
                l: sl,
                r: sr,
                choice,
                lines,
            });
        }
    }
}

/// Demand of `own` when it is placed in the firm-1 slot against `other`.
///
/// By reflection symmetry of the uniform consumer line this is also firm 2's
/// demand when called with the arguments swapped, so the same function
/// serves both firms.
pub fn own_demand(params: &MarketParams, own: &FirmStrategy, other: &FirmStrategy) -> f64 {
    let mut mass = 0.0;
    for_each_segment(params, own, other, false, |seg| match seg.choice {
        SegmentChoice::One => mass += seg.r - seg.l,
        SegmentChoice::Split => mass += 0.5 * (seg.r - seg.l),
        _ => {}
    });
    mass
}

/// Profit of `own` in the firm-1 slot.
pub fn own_profit(params: &MarketParams, own: &FirmStrategy, other: &FirmStrategy) -> f64 {
    crate::market::profit(own, own_demand(params, own, other), params)
}

pub fn demand_profile(params: &MarketParams, s1: &FirmStrategy, s2: &FirmStrategy) -> DemandProfile {
    evaluate(params, s1, s2).0
}

pub fn consumer_surplus(params: &MarketParams, s1: &FirmStrategy, s2: &FirmStrategy) -> SurplusReport {
    evaluate(params, s1, s2).1
}

/// Demand profile and surplus report in one pass over the segments.
pub fn evaluate(params: &MarketParams, s1: &FirmStrategy, s2: &FirmStrategy) -> (DemandProfile, SurplusReport) {
    let mut cs = [0.0; 2];
    let mut group_fit = [GroupFit::default(); 2];
    let mut xai_integral = 0.0;
    let mut misfit_integral = 0.0;
    let mut buyers = 0.0;
    let mut breakpoints = Vec::new();
    let mut last: Option<SegmentChoice> = None;

    for_each_segment(params, s1, s2, true, |seg| {
        if let Some(prev) = last {
            if prev != seg.choice && breakpoints.last() != Some(&seg.l) {
                breakpoints.push(seg.l);
            }
        }
        last = Some(seg.choice);

        let len = seg.r - seg.l;
        // Segments never straddle the group boundary.
        let g = if 0.5 * (seg.l + seg.r) < params.group_boundary {
            0
        } else {
            1
        };
        let [a, b] = seg.lines;
        let chosen: Option<(f64, Line, Line, Line)> = match seg.choice {
            SegmentChoice::Abstain => None,
            SegmentChoice::One => Some((a.x * len, a.utility, a.fit, a.misfit)),
            SegmentChoice::Two => Some((b.x * len, b.utility, b.fit, b.misfit)),
            SegmentChoice::Split => Some((
                0.5 * (a.x + b.x) * len,
                a.utility,
                Line {
                    a: 0.5 * (a.fit.a + b.fit.a),
                    b: 0.5 * (a.fit.b + b.fit.b),
                },
                Line {
                    a: 0.5 * (a.misfit.a + b.misfit.a),
                    b: 0.5 * (a.misfit.b + b.misfit.b),
                },
            )),
        };
        if let Some((xai, u, fit, mis)) = chosen {
            cs[g] += u.integral(seg.l, seg.r).max(0.0);
            buyers += len;
            xai_integral += xai;
            misfit_integral += mis.integral(seg.l, seg.r);
            group_fit[g].buyers += len;
            group_fit[g].fit_integral += fit.integral(seg.l, seg.r);
        }
    });

    let d1 = own_demand(params, s1, s2);
    let d2 = own_demand(params, s2, s1);
    let d0 = (1.0 - d1 - d2).max(0.0);
    let (avg_xai_received, avg_misfit) = if buyers > 0.0 {
        ((xai_integral / buyers).clamp(0.0, 1.0), misfit_integral / buyers)
    } else {
        (0.0, 0.0)
    };
    (
        DemandProfile {
            d1,
            d2,
            d0,
            breakpoints,
        },
        SurplusReport {
            cs_total: cs[0] + cs[1],
            cs_by_group: cs,
            avg_xai_received,
            avg_misfit,
            group_fit,
        },
    )
}

/// Explanation-term gap `|e1 - e2|` at `theta`.
pub fn explanation_gap(theta: f64, params: &MarketParams, s1: &FirmStrategy, s2: &FirmStrategy) -> f64 {
    (explanation_term(theta, params, s1.x, Firm::One) - explanation_term(theta, params, s2.x, Firm::Two)).abs()
}

/// Reference integration on a uniform midpoint grid of `n` cells using the
/// pointwise choice rule. Converges to [`evaluate`] as `n` grows; kept as an
/// independent check of the exact path.
pub fn oracle_demand(
    params: &MarketParams,
    s1: &FirmStrategy,
    s2: &FirmStrategy,
    n: usize,
) -> (DemandProfile, SurplusReport) {
    assert!(n >= 1, "oracle needs at least one cell");
    let h = 1.0 / n as f64;
    let sets = [
        revealed_interval(Firm::One, s1.x, params.mode),
        revealed_interval(Firm::Two, s2.x, params.mode),
    ];
    let mut mass = [0.0; 3];
    let mut cs = [0.0; 2];
    let mut group_fit = [GroupFit::default(); 2];
    let (mut xai, mut mis) = (0.0, 0.0);
    let mut breakpoints = Vec::new();
    let mut last = None;
    for i in 0..n {
        let theta = (i as f64 + 0.5) * h;
        let choice = best_choice(theta, params, s1, s2);
        if last.is_some_and(|c| c != choice) {
            breakpoints.push(i as f64 * h);
        }
        last = Some(choice);
        let g = if theta < params.group_boundary { 0 } else { 1 };
        let (firm, s, set) = match choice {
            Choice::None => {
                mass[2] += h;
                continue;
            }
            Choice::Firm1 => (Firm::One, s1, &sets[0]),
            Choice::Firm2 => (Firm::Two, s2, &sets[1]),
        };
        mass[firm.index()] += h;
        cs[g] += utility(theta, params, s, firm) * h;
        xai += s.x * h;
        mis += misfit(theta, set) * h;
        group_fit[g].buyers += h;
        group_fit[g].fit_integral += explanation_term(theta, params, s.x, firm) * h;
    }
    let buyers = mass[0] + mass[1];
    let (avg_xai_received, avg_misfit) = if buyers > 0.0 {
        (xai / buyers, mis / buyers)
    } else {
        (0.0, 0.0)
    };
    (
        DemandProfile {
            d1: mass[0],
            d2: mass[1],
            d0: mass[2],
            breakpoints,
        },
        SurplusReport {
            cs_total: cs[0] + cs[1],
            cs_by_group: cs,
            avg_xai_received,
            avg_misfit,
            group_fit,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::XaiMode;

    fn params(mode: XaiMode) -> MarketParams {
        MarketParams::new(2.0, 1.0, 1.0, 1.0, 0.0, mode).unwrap()
    }

    fn s(x: f64, q: f64, p: f64) -> FirmStrategy {
        FirmStrategy::new(x, q, p).unwrap()
    }

    #[test]
    fn best_choice_examples() {
        assert_eq!(choose(1.5, 1.0, 0.0, 0.0), Choice::Firm1);
        assert_eq!(choose(-0.2, -0.1, 0.0, 0.0), Choice::None);
        assert_eq!(choose(1.0, 1.0, 0.4, 0.6), Choice::Firm2);
        assert_eq!(choose(1.0, 1.0, 0.5, 0.5), Choice::Firm1);
        assert_eq!(choose(0.0, -1.0, 0.0, 0.0), Choice::Firm1);
    }

    #[test]
    fn symmetric_strategies_split_evenly() {
        let p = params(XaiMode::Differentiated);
        let st = s(0.5, 0.3, 0.8);
        let d = demand_profile(&p, &st, &st);
        assert!((d.d1 - 0.5).abs() < 1e-15 && (d.d2 - 0.5).abs() < 1e-15);
        assert_eq!(d.d0, 0.0);
        assert_eq!(d.breakpoints, vec![0.5]);
    }

    #[test]
    fn price_above_max_utility_sells_nothing() {
        let p = params(XaiMode::Differentiated);
        let q1 = 0.4;
        let d = demand_profile(&p, &s(0.7, q1, p.v + q1 + p.gamma + 1.0), &s(0.2, 0.1, 1.0));
        assert_eq!(d.d1, 0.0);
    }

    #[test]
    fn identical_products_share_the_market() {
        for mode in [XaiMode::Differentiated, XaiMode::Shared] {
            let p = params(mode);
            let a = s(if mode == XaiMode::Shared { 0.6 } else { 1.0 }, 0.2, 0.9);
            let d = demand_profile(&p, &a, &a);
            assert_eq!((d.d1, d.d2, d.d0), (0.5, 0.5, 0.0));
        }
        let p = params(XaiMode::Differentiated);
        let a = s(0.0, 0.2, 0.9);
        assert_eq!(own_demand(&p, &a, &a), 0.5);
    }

    #[test]
    fn surplus_examples() {
        let p = params(XaiMode::Differentiated);
        let r = consumer_surplus(&p, &s(0.0, 0.0, 2.0), &s(0.0, 0.0, 2.0));
        assert_eq!(r.cs_total, 0.0);
        let r = consumer_surplus(&p, &s(0.0, 0.0, 0.0), &s(0.0, 0.0, 0.0));
        assert_eq!(r.cs_total, 2.0);
        assert_eq!(r.avg_xai_received, 0.0);
        assert_eq!(r.cs_by_group, [1.0, 1.0]);
    }

    #[test]
    fn reference_point_matches_oracle() {
        let p = params(XaiMode::Differentiated);
        let (s1, s2) = (s(0.5, 0.0, 0.5), s(0.5, 0.0, 0.7));
        let (d, r) = evaluate(&p, &s1, &s2);
        let (od, or) = oracle_demand(&p, &s1, &s2, 1_000_000);
        assert!((d.d1 - od.d1).abs() < 1e-5);
        assert!((d.d2 - od.d2).abs() < 1e-5);
        assert!((d.d0 - od.d0).abs() < 1e-5);
        assert!((r.cs_total - or.cs_total).abs() < 1e-5);
        // Right of 0.5: U1 = 2 - 0.5 (theta - 0.5) meets the flat U2 = 1.8 at 0.9.
        assert!((d.d1 - 0.9).abs() < 1e-12);
    }

    #[test]
    fn oracle_single_cell_uses_tie_rule() {
        let p = params(XaiMode::Differentiated);
        let st = s(0.5, 0.3, 0.8);
        let (d, _) = oracle_demand(&p, &st, &st, 1);
        assert_eq!((d.d1, d.d2, d.d0), (1.0, 0.0, 0.0));
        let (d, _) = oracle_demand(&p, &st, &st, 1_000_000);
        assert!((d.d1 - 0.5).abs() < 1e-5 && (d.d2 - 0.5).abs() < 1e-5 && d.d0 < 1e-5);
    }

    #[test]
    fn shared_mode_can_split_market_twice() {
        // Firm 2 reveals more; firm 1 is cheaper. Firm 1 wins near 0 and
        // again at the far end where the wide set's slope bites.
        let p = MarketParams::new(3.0, 1.0, 4.0, 1.0, 0.0, XaiMode::Shared).unwrap();
        let (s1, s2) = (s(0.2, 0.0, 0.05), s(0.6, 0.0, 0.3));
        let (d, _) = evaluate(&p, &s1, &s2);
        let (od, _) = oracle_demand(&p, &s1, &s2, 200_000);
        assert!((d.d1 - od.d1).abs() < 1e-4, "{} vs {}", d.d1, od.d1);
        assert!((d.d1 + d.d2 + d.d0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn explanation_gap_vanishes_at_full_differentiated_xai() {
        let p = params(XaiMode::Differentiated);
        for theta in [0.0, 0.3, 0.9] {
            assert_eq!(explanation_gap(theta, &p, &s(1.0, 0.1, 0.2), &s(1.0, 0.4, 0.5)), 0.0);
        }
    }
}
