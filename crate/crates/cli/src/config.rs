//! Scenario documents: JSON in, validated configuration out.

use serde::Deserialize;
use serde_json::error::Category;
use thiserror::Error;

use xdl_core::market::{MarketParams, ModelError, XaiMode, DEFAULT_GROUP_BOUNDARY};
use xdl_core::policy::{ClaimSettings, Objective, Panel, PanelPoint, Regime, RegimeKind};
use xdl_core::solver::{GridScale, GridSpec, SolverConfig, SolverError};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<ModelError> for ConfigError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParameter { field, reason } => ConfigError::invalid(field, reason),
        }
    }
}

impl From<SolverError> for ConfigError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidConfig { field, reason } => ConfigError::invalid(field, reason),
            other => ConfigError::invalid("solver", other.to_string()),
        }
    }
}

fn from_json_error(e: serde_json::Error) -> ConfigError {
    match e.classify() {
        Category::Data => {
            let message = e.to_string();
            if let Some(rest) = message.strip_prefix("unknown field `") {
                let field = rest.split('`').next().unwrap_or_default();
                ConfigError::invalid(field, "unknown key")
            } else if let Some(rest) = message.strip_prefix("missing field `") {
                let field = rest.split('`').next().unwrap_or_default();
                ConfigError::invalid(field, "missing")
            } else {
                ConfigError::invalid("document", message)
            }
        }
        _ => ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    v: f64,
    gamma: f64,
    t: f64,
    beta: f64,
    #[serde(default)]
    c0: f64,
    mode: XaiMode,
    #[serde(default)]
    group_boundary: Option<f64>,
}

impl ParamsDoc {
    fn build(&self) -> Result<MarketParams, ConfigError> {
        let p = MarketParams::new(self.v, self.gamma, self.t, self.beta, self.c0, self.mode)?;
        Ok(p.with_group_boundary(self.group_boundary.unwrap_or(DEFAULT_GROUP_BOUNDARY))?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegimeDoc {
    kind: RegimeKind,
    #[serde(default)]
    x_bar: Option<f64>,
}

impl RegimeDoc {
    fn build(&self) -> Result<Regime, ConfigError> {
        match (self.kind, self.x_bar) {
            (RegimeKind::Unregulated, None) => Ok(Regime::Unregulated),
            (RegimeKind::Unregulated, Some(_)) => Err(ConfigError::invalid("x_bar", "not allowed for Unregulated")),
            (_, None) => Err(ConfigError::invalid("x_bar", "required for Mandatory and Optional")),
            (kind, Some(x)) if (0.0..=1.0).contains(&x) => Ok(kind.with_level(x)),
            (_, Some(x)) => Err(ConfigError::invalid("x_bar", format!("must lie in [0, 1], got {x}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverDoc {
    grid_scale: Option<GridScale>,
    price_grid: Option<GridSpec>,
    quality_grid: Option<GridSpec>,
    xai_steps: Option<usize>,
    epsilon: Option<f64>,
    max_br_iterations: Option<usize>,
    damping: Option<f64>,
}

impl SolverDoc {
    fn build(&self, scale_override: Option<GridScale>) -> Result<SolverConfig, ConfigError> {
        let scale = scale_override.or(self.grid_scale).unwrap_or(GridScale::Default);
        let mut c = SolverConfig::for_scale(scale);
        if let Some(g) = self.price_grid {
            c.price_grid = g;
        }
        if let Some(g) = self.quality_grid {
            c.quality_grid = g;
        }
        if let Some(n) = self.xai_steps {
            c.xai_steps = n;
        }
        if self.epsilon.is_some() {
            c.epsilon = self.epsilon;
        }
        if let Some(n) = self.max_br_iterations {
            c.max_br_iterations = n;
        }
        if let Some(d) = self.damping {
            c.damping = d;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Parameters a sweep axis may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisParam {
    V,
    Gamma,
    T,
    Beta,
    C0,
    GroupBoundary,
    XBar,
}

impl AxisParam {
    pub fn name(&self) -> &'static str {
        match self {
            AxisParam::V => "v",
            AxisParam::Gamma => "gamma",
            AxisParam::T => "t",
            AxisParam::Beta => "beta",
            AxisParam::C0 => "c0",
            AxisParam::GroupBoundary => "group_boundary",
            AxisParam::XBar => "x_bar",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: AxisParam,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        xdl_core::solver::linspace(self.min, self.max, self.steps)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputDoc {
    dir: Option<String>,
    #[serde(default = "yes")]
    svg: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputDoc {
    fn default() -> Self {
        OutputDoc { dir: None, svg: true }
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum PanelPreset {
    Default,
    Refined,
    None,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SyntheticDoc {
    params: ParamsDoc,
    payoffs: [[[f64; 2]; 2]; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PanelDoc {
    #[serde(default = "default_preset")]
    preset: PanelPreset,
    #[serde(default)]
    modes: Option<Vec<XaiMode>>,
    #[serde(default)]
    points: Vec<ParamsDoc>,
    #[serde(default)]
    synthetic: Vec<SyntheticDoc>,
}

fn default_preset() -> PanelPreset {
    PanelPreset::Default
}

impl PanelDoc {
    fn build(&self) -> Result<Panel, ConfigError> {
        let mut panel = match self.preset {
            PanelPreset::Default => Panel::standard(),
            PanelPreset::Refined => Panel::refined(),
            PanelPreset::None => Panel::default(),
        };
        for p in &self.points {
            panel.points.push(PanelPoint::economy(p.build()?));
        }
        if let Some(modes) = &self.modes {
            panel.points.retain(|p| modes.contains(&p.params.mode));
        }
        for s in self.synthetic.iter().rev() {
            if s.payoffs.iter().flatten().flatten().any(|x| !x.is_finite()) {
                return Err(ConfigError::invalid("payoffs", "must be finite"));
            }
            panel = panel.with_synthetic(s.params.build()?, s.payoffs);
        }
        Ok(panel)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClaimsDoc {
    mandatory_levels: Option<Vec<f64>>,
    optional_levels: Option<Vec<f64>>,
    beta_t_level: Option<f64>,
}

fn check_levels(field: &str, levels: &[f64]) -> Result<(), ConfigError> {
    if levels.is_empty() {
        return Err(ConfigError::invalid(field, "must not be empty"));
    }
    if let Some(x) = levels.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(ConfigError::invalid(
            field,
            format!("levels must lie in [0, 1], got {x}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default)]
    scenario_id: Option<String>,
    params: ParamsDoc,
    #[serde(default)]
    regime: Option<OneOrMany<RegimeDoc>>,
    #[serde(default)]
    solver: SolverDoc,
    #[serde(default)]
    sweep: Vec<SweepAxis>,
    #[serde(default)]
    objectives: Option<Vec<String>>,
    #[serde(default)]
    levels: Option<Vec<f64>>,
    #[serde(default)]
    output: OutputDoc,
    #[serde(default)]
    panel: Option<PanelDoc>,
    #[serde(default)]
    claims: ClaimsDoc,
}

/// Validated scenario with all defaults filled in.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    pub params: MarketParams,
    pub regimes: Vec<Regime>,
    pub solver: SolverConfig,
    pub sweep: Vec<SweepAxis>,
    pub objectives: Vec<Objective>,
    /// Policy levels searched by `compare`; `None` uses the XAI grid.
    pub levels: Option<Vec<f64>>,
    pub output_dir: Option<String>,
    pub svg: bool,
    pub panel: Panel,
    pub claims: ClaimSettings,
}

/// Parses and validates a scenario document. `grid_scale` overrides the
/// document's scale; explicit solver fields still apply on top.
pub fn parse_config(text: &str, grid_scale: Option<GridScale>) -> Result<ScenarioConfig, ConfigError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(from_json_error)?;
    let params = doc.params.build()?;
    let regimes = match doc.regime {
        Some(r) => r
            .into_vec()
            .iter()
            .map(RegimeDoc::build)
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![Regime::Unregulated],
    };
    if regimes.is_empty() {
        return Err(ConfigError::invalid("regime", "list must not be empty"));
    }
    let solver = doc.solver.build(grid_scale)?;

    if doc.sweep.len() > 2 {
        return Err(ConfigError::invalid("sweep", "at most 2 axes"));
    }
    for axis in &doc.sweep {
        if axis.steps < 2 {
            return Err(ConfigError::invalid(
                "steps",
                format!("axis `{}` needs at least 2 steps", axis.param.name()),
            ));
        }
        if !(axis.min.is_finite() && axis.max.is_finite() && axis.min <= axis.max) {
            return Err(ConfigError::invalid(axis.param.name(), "axis needs finite min <= max"));
        }
        if axis.param == AxisParam::XBar {
            if axis.min < 0.0 || axis.max > 1.0 {
                return Err(ConfigError::invalid("x_bar", "axis must stay within [0, 1]"));
            }
            if regimes.iter().any(|r| r.x_bar().is_none()) {
                return Err(ConfigError::invalid("x_bar", "axis needs regimes with a level"));
            }
        }
    }
    if doc.sweep.len() == 2 && doc.sweep[0].param == doc.sweep[1].param {
        return Err(ConfigError::invalid(doc.sweep[0].param.name(), "axis listed twice"));
    }
    // Every grid point must be a valid economy.
    for axis in &doc.sweep {
        for value in axis.values() {
            apply_axis(&params, &regimes[0], axis.param, value)?;
        }
    }

    let objectives = match doc.objectives {
        Some(names) => names
            .iter()
            .map(|n| {
                n.parse::<Objective>()
                    .map_err(|_| ConfigError::invalid("objectives", format!("unknown objective `{n}`")))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![Objective::TotalWelfare],
    };
    if objectives.is_empty() {
        return Err(ConfigError::invalid("objectives", "must not be empty"));
    }
    if let Some(levels) = &doc.levels {
        check_levels("levels", levels)?;
    }

    let mut claims = ClaimSettings {
        config: solver,
        ..ClaimSettings::default()
    };
    if let Some(levels) = doc.claims.mandatory_levels {
        check_levels("mandatory_levels", &levels)?;
        claims.mandatory_levels = Some(levels);
    }
    if let Some(levels) = doc.claims.optional_levels {
        check_levels("optional_levels", &levels)?;
        claims.optional_levels = levels;
    }
    if let Some(level) = doc.claims.beta_t_level {
        check_levels("beta_t_level", &[level])?;
        claims.beta_t_level = level;
    }

    let panel = match &doc.panel {
        Some(p) => p.build()?,
        None => Panel::standard(),
    };
    let scenario_id = doc.scenario_id.unwrap_or_else(|| "scenario".to_string());
    if scenario_id.is_empty() || scenario_id.contains([',', '"', '\n', '\r']) {
        return Err(ConfigError::invalid(
            "scenario_id",
            "must be non-empty without commas, quotes or newlines",
        ));
    }

    Ok(ScenarioConfig {
        scenario_id,
        params,
        regimes,
        solver,
        sweep: doc.sweep,
        objectives,
        levels: doc.levels,
        output_dir: doc.output.dir,
        svg: doc.output.svg,
        panel,
        claims,
    })
}

/// Economy and regime at one sweep coordinate.
pub fn apply_axis(
    params: &MarketParams,
    regime: &Regime,
    param: AxisParam,
    value: f64,
) -> Result<(MarketParams, Regime), ConfigError> {
    let mut p = *params;
    let mut r = *regime;
    match param {
        AxisParam::V => p.v = value,
        AxisParam::Gamma => p.gamma = value,
        AxisParam::T => p.t = value,
        AxisParam::Beta => p.beta = value,
        AxisParam::C0 => p.c0 = value,
        AxisParam::GroupBoundary => p.group_boundary = value,
        AxisParam::XBar => {
            r = match r.x_bar() {
                Some(_) => r.kind().with_level(value),
                None => return Err(ConfigError::invalid("x_bar", "axis needs regimes with a level")),
            }
        }
    }
    p.validate()?;
    Ok((p, r))
}
