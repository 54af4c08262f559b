//! Epsilon-Nash certification on finite deviation sets.

/// Largest payoff gain each player can get by deviating unilaterally.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NashCertificate {
    pub gains: [f64; 2],
}

impl NashCertificate {
    pub fn is_epsilon_nash(&self, epsilon: f64) -> bool {
        self.gains[0] <= epsilon && self.gains[1] <= epsilon
    }

    pub fn max_gain(&self) -> f64 {
        self.gains[0].max(self.gains[1])
    }
}

/// Scans every deviation in `deviations[player]` against `profile`.
///
/// `payoff(player, profile)` returns that player's payoff. Gains are clamped
/// at zero; a profile is an epsilon-equilibrium iff both gains are at most
/// epsilon.
pub fn verify_nash<A, F>(payoff: F, profile: [A; 2], deviations: [&[A]; 2]) -> NashCertificate
where
    A: Copy,
    F: Fn(usize, [A; 2]) -> f64,
{
    let mut gains = [0.0; 2];
    for player in 0..2 {
        let base = payoff(player, profile);
        for &dev in deviations[player] {
            let mut alt = profile;
            alt[player] = dev;
            let gain = payoff(player, alt) - base;
            if gain > gains[player] {
                gains[player] = gain;
            }
        }
    }
    NashCertificate { gains }
}

/// Two-player payoff table, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Bimatrix {
    pub rows: usize,
    pub cols: usize,
    pub row_payoff: Vec<f64>,
    pub col_payoff: Vec<f64>,
}

impl Bimatrix {
    pub fn new(rows: usize, cols: usize, row_payoff: Vec<f64>, col_payoff: Vec<f64>) -> Self {
        assert_eq!(row_payoff.len(), rows * cols);
        assert_eq!(col_payoff.len(), rows * cols);
        Bimatrix {
            rows,
            cols,
            row_payoff,
            col_payoff,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> [f64; 2]) -> Self {
        let mut a = Vec::with_capacity(rows * cols);
        let mut b = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let [x, y] = f(i, j);
                a.push(x);
                b.push(y);
            }
        }
        Bimatrix::new(rows, cols, a, b)
    }

    pub fn payoffs(&self, i: usize, j: usize) -> [f64; 2] {
        let k = i * self.cols + j;
        [self.row_payoff[k], self.col_payoff[k]]
    }

    /// Unilateral deviation gains at cell `(i, j)`.
    pub fn certificate(&self, i: usize, j: usize) -> NashCertificate {
        let rows: Vec<usize> = (0..self.rows).collect();
        let cols: Vec<usize> = (0..self.cols).collect();
        verify_nash(|player, [r, c]| self.payoffs(r, c)[player], [i, j], [&rows, &cols])
    }
}

/// All cells that are epsilon-equilibria, in row-major order. Cells with
/// `eligible[k] == false` may serve as deviations but are never reported.
pub fn pure_equilibria(game: &Bimatrix, epsilon: f64, eligible: Option<&[bool]>) -> Vec<(usize, usize)> {
    let mut col_best = vec![f64::NEG_INFINITY; game.cols];
    let mut row_best = vec![f64::NEG_INFINITY; game.rows];
    for i in 0..game.rows {
        for j in 0..game.cols {
            let [a, b] = game.payoffs(i, j);
            col_best[j] = col_best[j].max(a);
            row_best[i] = row_best[i].max(b);
        }
    }
    let mut out = Vec::new();
    for i in 0..game.rows {
        for j in 0..game.cols {
            if let Some(ok) = eligible {
                if !ok[i * game.cols + j] {
                    continue;
                }
            }
            let [a, b] = game.payoffs(i, j);
            if a >= col_best[j] - epsilon && b >= row_best[i] - epsilon {
                out.push((i, j));
            }
        }
    }
    out
}
