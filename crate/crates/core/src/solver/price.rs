//! Innermost stage: simultaneous price competition for fixed XAI levels and
//! qualities.

use crate::demand::{evaluate, own_profit};
use crate::market::{unit_cost, FirmStrategy, MarketParams};

use super::nash::{verify_nash, NashCertificate};
use super::{select_equilibrium, Grids};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceMethod {
    /// Exhaustive scan of the joint price grid.
    GridScan,
    /// Off-grid point from damped best-response iteration, certified
    /// against the grid.
    Iteration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceStage {
    pub prices: [f64; 2],
    pub profits: [f64; 2],
    pub certificate: NashCertificate,
    pub method: PriceMethod,
    pub iterations: usize,
    /// False when neither the joint scan nor the iteration produced an
    /// epsilon-equilibrium; `prices` then hold the joint-grid cell with the
    /// smallest deviation gain.
    pub found: bool,
}

impl PriceStage {
    pub(crate) fn swapped(self) -> Self {
        PriceStage {
            prices: [self.prices[1], self.prices[0]],
            profits: [self.profits[1], self.profits[0]],
            certificate: NashCertificate {
                gains: [self.certificate.gains[1], self.certificate.gains[0]],
            },
            ..self
        }
    }
}

/// Brent's method (parabolic steps with golden-section safeguard) for the
/// maximum of `f` on `[a, b]`.
fn brent_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const CGOLD: f64 = 1.0 - INV_PHI;
    let g = |x: f64| -f(x);
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = g(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0_f64, 0.0_f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = tol * 0.5 + 1e-15 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = g(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    (x, -fx)
}

/// Profit-maximizing price against a fixed opponent.
///
/// The own firm is evaluated in the firm-1 slot; thanks to the reflection
/// symmetry of the consumer line the same call gives firm 2's best response
/// when firm 2's `(x, q)` and firm 1's strategy are passed. Scans the firm's
/// price grid, which starts at its unit cost (ties toward the lower price),
/// then refines with a Brent line search over the cells bracketing the grid maximum.
pub fn price_best_response(params: &MarketParams, own: (f64, f64), opponent: &FirmStrategy, grids: &Grids) -> f64 {
    best_response_with_value(params, own, opponent, grids).0
}

fn best_response_with_value(
    params: &MarketParams,
    (x, q): (f64, f64),
    opponent: &FirmStrategy,
    grids: &Grids,
) -> (f64, f64) {
    let profit_at = |p: f64| own_profit(params, &FirmStrategy { x, q, p }, opponent);
    let grid = grids.price_grid(unit_cost(q, params));
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (k, &p) in grid.iter().enumerate() {
        let value = profit_at(p);
        if value > best_value {
            best = k;
            best_value = value;
        }
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (p, value) = brent_max(profit_at, lo, hi, grids.tolerance);
    if value > best_value {
        (p, value)
    } else {
        (grid[best], best_value)
    }
}

fn strategies(xs: [f64; 2], qs: [f64; 2], ps: [f64; 2]) -> [FirmStrategy; 2] {
    [
        FirmStrategy {
            x: xs[0],
            q: qs[0],
            p: ps[0],
        },
        FirmStrategy {
            x: xs[1],
            q: qs[1],
            p: ps[1],
        },
    ]
}

fn payoffs(params: &MarketParams, xs: [f64; 2], qs: [f64; 2], ps: [f64; 2]) -> [f64; 2] {
    let [s1, s2] = strategies(xs, qs, ps);
    [own_profit(params, &s1, &s2), own_profit(params, &s2, &s1)]
}

/// Solves the price subgame at fixed `(x1, x2)` and `(q1, q2)`.
///
/// The joint price grid is scanned first; its epsilon-equilibria are
/// selected symmetric first, then by welfare. When the grid has none, firms
/// update simultaneously, `p <- (1 - damping) p + damping BR(p_other)`, from
/// `warm_start` or the middle of each firm's grid, and a settled point that
/// passes certification against every grid price is reported instead.
///
/// The subgame is solved in a canonical firm order so that exchanging the
/// firms' inputs exchanges the outputs bit for bit.
pub fn price_stage_equilibrium(
    params: &MarketParams,
    xs: [f64; 2],
    qs: [f64; 2],
    grids: &Grids,
    warm_start: Option<[f64; 2]>,
) -> PriceStage {
    let swap = (xs[0], qs[0]) > (xs[1], qs[1]);
    if swap {
        let warm = warm_start.map(|w| [w[1], w[0]]);
        return solve_canonical(params, [xs[1], xs[0]], [qs[1], qs[0]], grids, warm).swapped();
    }
    solve_canonical(params, xs, qs, grids, warm_start)
}

fn solve_canonical(
    params: &MarketParams,
    xs: [f64; 2],
    qs: [f64; 2],
    grids: &Grids,
    warm_start: Option<[f64; 2]>,
) -> PriceStage {
    let scan = grid_scan(params, xs, qs, grids);
    if scan.found {
        return scan;
    }
    let p_max = grids.price_max;
    // Symmetric subgames keep symmetric iterates.
    let warm_start = match warm_start {
        Some(w) if xs[0] == xs[1] && qs[0] == qs[1] => Some([w[0].min(w[1]); 2]),
        w => w,
    };
    let mut ps = warm_start.unwrap_or_else(|| {
        let cost = |q: f64| unit_cost(q, params).min(p_max);
        [0.5 * (cost(qs[0]) + p_max), 0.5 * (cost(qs[1]) + p_max)]
    });
    let lambda = grids.damping;
    let mut deltas: Vec<f64> = Vec::with_capacity(grids.max_iterations);
    let mut converged = false;
    for _ in 0..grids.max_iterations {
        let [s1, s2] = strategies(xs, qs, ps);
        let br1 = price_best_response(params, (xs[0], qs[0]), &s2, grids);
        let br2 = price_best_response(params, (xs[1], qs[1]), &s1, grids);
        let next = [
            (1.0 - lambda) * ps[0] + lambda * br1,
            (1.0 - lambda) * ps[1] + lambda * br2,
        ];
        let delta = (next[0] - ps[0]).abs().max((next[1] - ps[1]).abs());
        ps = next;
        deltas.push(delta);
        if delta <= grids.tolerance {
            converged = true;
            break;
        }
        // A contracting iteration shrinks its steps geometrically; steps that
        // stay put signal a Bertrand-style crawl or a cycle.
        let k = deltas.len();
        if k > 20 && delta > 0.5 * deltas[k - 11] {
            break;
        }
    }
    let iterations = deltas.len();
    // Moves below one grid cell count as settled; certification decides.
    let cell = grids
        .price_cell(unit_cost(qs[0], params))
        .min(grids.price_cell(unit_cost(qs[1], params)));
    let settled = converged || deltas.last().is_some_and(|&d| d < cell);

    if settled {
        let certificate = certify(params, xs, qs, ps, grids);
        if certificate.is_epsilon_nash(grids.epsilon) {
            return PriceStage {
                prices: ps,
                profits: payoffs(params, xs, qs, ps),
                certificate,
                method: PriceMethod::Iteration,
                iterations,
                found: true,
            };
        }
    }
    PriceStage { iterations, ..scan }
}

/// Deviation gains against every grid price.
pub(crate) fn certify(
    params: &MarketParams,
    xs: [f64; 2],
    qs: [f64; 2],
    ps: [f64; 2],
    grids: &Grids,
) -> NashCertificate {
    let [g1, g2] = firm_grids(params, qs, grids);
    verify_nash(|player, p| payoffs(params, xs, qs, p)[player], ps, [&g1, &g2])
}

fn firm_grids(params: &MarketParams, qs: [f64; 2], grids: &Grids) -> [Vec<f64>; 2] {
    [
        grids.price_grid(unit_cost(qs[0], params)),
        grids.price_grid(unit_cost(qs[1], params)),
    ]
}

/// Exhaustive scan of the joint price grid. Firm 2's payoffs are only filled
/// in for rows holding a firm-1 best response, unless no equilibrium exists
/// and the least-regret cell is needed.
fn grid_scan(params: &MarketParams, xs: [f64; 2], qs: [f64; 2], grids: &Grids) -> PriceStage {
    let [g1, g2] = firm_grids(params, qs, grids);
    let (n, m) = (g1.len(), g2.len());
    let eps = grids.epsilon;
    let at = |i: usize, j: usize| strategies(xs, qs, [g1[i], g2[j]]);
    let u1: Vec<f64> = (0..n * m)
        .map(|k| {
            let [s1, s2] = at(k / m, k % m);
            own_profit(params, &s1, &s2)
        })
        .collect();
    let mut col_best = vec![f64::NEG_INFINITY; m];
    for (k, &u) in u1.iter().enumerate() {
        col_best[k % m] = col_best[k % m].max(u);
    }
    let mut u2 = vec![f64::NAN; n * m];
    let mut row_best = vec![f64::NEG_INFINITY; n];
    let mut fill_row = |i: usize, u2: &mut [f64]| {
        if row_best[i] > f64::NEG_INFINITY {
            return row_best[i];
        }
        for j in 0..m {
            let [s1, s2] = at(i, j);
            let u = own_profit(params, &s2, &s1);
            u2[i * m + j] = u;
            row_best[i] = row_best[i].max(u);
        }
        row_best[i]
    };

    let mut equilibria = Vec::new();
    for i in 0..n {
        if !(0..m).any(|j| u1[i * m + j] >= col_best[j] - eps) {
            continue;
        }
        let best2 = fill_row(i, &mut u2);
        for j in 0..m {
            if u1[i * m + j] >= col_best[j] - eps && u2[i * m + j] >= best2 - eps {
                equilibria.push((i, j));
            }
        }
    }
    let gains = |(i, j): (usize, usize), row_best: f64, u2: &[f64]| {
        [
            (col_best[j] - u1[i * m + j]).max(0.0),
            (row_best - u2[i * m + j]).max(0.0),
        ]
    };

    let (cell, found) = if equilibria.is_empty() {
        let bests: Vec<f64> = (0..n).map(|i| fill_row(i, &mut u2)).collect();
        let regret = |&(i, j): &(usize, usize)| {
            let [a, b] = gains((i, j), bests[i], &u2);
            a.max(b)
        };
        let all = (0..n).flat_map(|i| (0..m).map(move |j| (i, j)));
        (
            all.min_by(|a, b| regret(a).total_cmp(&regret(b)))
                .expect("price grid is non-empty"),
            false,
        )
    } else {
        let symmetric: Vec<bool> = equilibria.iter().map(|&(i, j)| i == j).collect();
        let welfare: Vec<f64> = equilibria
            .iter()
            .map(|&(i, j)| {
                let [s1, s2] = at(i, j);
                let (d, r) = evaluate(params, &s1, &s2);
                crate::market::profit(&s1, d.d1, params) + crate::market::profit(&s2, d.d2, params) + r.cs_total
            })
            .collect();
        let pick = select_equilibrium(&symmetric, &welfare).expect("non-empty");
        (equilibria[pick], true)
    };
    let best2 = fill_row(cell.0, &mut u2);
    let k = cell.0 * m + cell.1;
    PriceStage {
        prices: [g1[cell.0], g2[cell.1]],
        profits: [u1[k], u2[k]],
        certificate: NashCertificate {
            gains: gains(cell, best2, &u2),
        },
        method: PriceMethod::GridScan,
        iterations: 0,
        found,
    }
}
