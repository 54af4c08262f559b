//! Parameter panels scanned by the claim searches.

use crate::market::{MarketParams, XaiMode};

/// Opt-in payoffs `[a1][a2] -> [firm 1, firm 2]`, action 1 = offer XAI.
pub type OptInPayoffs = [[[f64; 2]; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct PanelPoint {
    pub params: MarketParams,
    /// Hand-built opt-in game standing in for the solved one. Only the
    /// opt-in existence check reads it; every other search skips the point.
    pub synthetic_opt_in: Option<OptInPayoffs>,
}

impl PanelPoint {
    pub fn economy(params: MarketParams) -> Self {
        PanelPoint {
            params,
            synthetic_opt_in: None,
        }
    }

    pub fn is_synthetic(&self) -> bool {
        self.synthetic_opt_in.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    pub points: Vec<PanelPoint>,
}

impl Panel {
    /// Cartesian product, ordered mode, v, gamma, t, beta (last fastest).
    pub fn grid(v: &[f64], gamma: &[f64], t: &[f64], beta: &[f64], c0: f64, modes: &[XaiMode]) -> Self {
        let mut points = Vec::new();
        for &mode in modes {
            for &v in v {
                for &g in gamma {
                    for &t in t {
                        for &b in beta {
                            let params = MarketParams::new(v, g, t, b, c0, mode).expect("panel values are valid");
                            points.push(PanelPoint::economy(params));
                        }
                    }
                }
            }
        }
        Panel { points }
    }

    /// 300 points: v in {1, 2}, gamma in {0.5, 1, 2}, t and beta in
    /// {0.25, 0.5, 1, 2, 4}, c0 = 0, both modes.
    pub fn standard() -> Self {
        let tb = [0.25, 0.5, 1.0, 2.0, 4.0];
        Panel::grid(
            &[1.0, 2.0],
            &[0.5, 1.0, 2.0],
            &tb,
            &tb,
            0.0,
            &[XaiMode::Differentiated, XaiMode::Shared],
        )
    }

    /// About ten times denser: v in {0.5, 1, 1.5, 2}, gamma in
    /// {0.25, 0.5, 1, 1.5, 2}, t and beta on nine points spaced by a factor
    /// sqrt(2) from 0.25 to 4; 3240 points.
    pub fn refined() -> Self {
        let tb: Vec<f64> = (0..9).map(|k| 0.25 * 2f64.powf(k as f64 / 2.0)).collect();
        Panel::grid(
            &[0.5, 1.0, 1.5, 2.0],
            &[0.25, 0.5, 1.0, 1.5, 2.0],
            &tb,
            &tb,
            0.0,
            &[XaiMode::Differentiated, XaiMode::Shared],
        )
    }

    pub fn only_mode(&self, mode: XaiMode) -> Self {
        Panel {
            points: self.points.iter().filter(|p| p.params.mode == mode).cloned().collect(),
        }
    }

    /// Puts a synthetic opt-in game in front of the panel.
    pub fn with_synthetic(mut self, params: MarketParams, payoffs: OptInPayoffs) -> Self {
        self.points.insert(
            0,
            PanelPoint {
                params,
                synthetic_opt_in: Some(payoffs),
            },
        );
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
