//! Midpoint-rule reference integration written directly from the model
//! definitions, sharing no code with the library's demand routines.

#![allow(dead_code)]

/// Integrated quantities over the consumer line.
#[derive(Debug, Clone, Copy, Default)]
pub struct Integrals {
    pub d: [f64; 3],
    pub cs: [f64; 2],
    /// Buyer mass and integrated explanation term per group.
    pub group_buyers: [f64; 2],
    pub group_fit: [f64; 2],
    /// Integrals of the XAI level and the misfit received by buyers.
    pub xai: f64,
    pub misfit: f64,
}

impl Integrals {
    pub fn cs_total(&self) -> f64 {
        self.cs[0] + self.cs[1]
    }
}

/// One firm as the oracle sees it: `(x, q, p)` and the revealed interval.
#[derive(Debug, Clone, Copy)]
pub struct Offer {
    pub x: f64,
    pub q: f64,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Offer {
    pub fn new(x: f64, q: f64, p: f64, from_right: bool) -> Self {
        let (lo, hi) = if from_right { (1.0 - x, 1.0) } else { (0.0, x) };
        Offer { x, q, p, lo, hi }
    }

    pub fn distance(&self, theta: f64) -> f64 {
        if self.x == 0.0 {
            0.0
        } else if theta < self.lo {
            self.lo - theta
        } else if theta > self.hi {
            theta - self.hi
        } else {
            0.0
        }
    }

    pub fn fit(&self, theta: f64, gamma: f64, t: f64) -> f64 {
        self.x * (gamma - t * self.distance(theta))
    }

    pub fn utility(&self, theta: f64, v: f64, gamma: f64, t: f64) -> f64 {
        v + self.q - self.p + self.fit(theta, gamma, t)
    }
}

/// The two offers of an economy; `differentiated` anchors firm 2 at the
/// right end.
pub fn offers(differentiated: bool, s: [(f64, f64, f64); 2]) -> [Offer; 2] {
    [
        Offer::new(s[0].0, s[0].1, s[0].2, false),
        Offer::new(s[1].0, s[1].1, s[1].2, differentiated),
    ]
}

/// Midpoint rule with `n` cells. Pointwise utility ties between firms go to
/// the higher quality and split evenly at equal quality; a tie with the
/// outside option buys.
pub fn integrate(v: f64, gamma: f64, t: f64, boundary: f64, offers: &[Offer; 2], n: usize) -> Integrals {
    let h = 1.0 / n as f64;
    let mut out = Integrals::default();
    for i in 0..n {
        let theta = (i as f64 + 0.5) * h;
        let g = usize::from(theta >= boundary);
        let u = [
            offers[0].utility(theta, v, gamma, t),
            offers[1].utility(theta, v, gamma, t),
        ];
        let shares: [f64; 2] = if u[0] > u[1] || (u[0] == u[1] && offers[0].q > offers[1].q) {
            [1.0, 0.0]
        } else if u[1] > u[0] || offers[1].q > offers[0].q {
            [0.0, 1.0]
        } else {
            [0.5, 0.5]
        };
        for k in 0..2 {
            let w = shares[k] * h;
            if w == 0.0 {
                continue;
            }
            if u[k] < 0.0 {
                out.d[2] += w;
                continue;
            }
            out.d[k] += w;
            out.cs[g] += u[k] * w;
            out.group_buyers[g] += w;
            out.group_fit[g] += offers[k].fit(theta, gamma, t) * w;
            out.xai += offers[k].x * w;
            out.misfit += offers[k].distance(theta) * w;
        }
    }
    out
}
