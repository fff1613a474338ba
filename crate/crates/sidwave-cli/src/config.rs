//! Experiment configuration: one TOML file describes the model, the
//! data, the grid, the stepping control, and per-subcommand inputs.
//! Command-line overrides (`--override key=value` with dotted paths)
//! are applied to the parsed TOML tree before validation, so every
//! field can be adjusted without editing the file. The effective
//! configuration is echoed into summaries for provenance.

use serde::{Deserialize, Serialize};
use sidwave::diagnostics::WeightSpec;
use sidwave::feasibility::solve_feasible;
use sidwave::model::{
    make_grid, sample_initial_data, Damping, InitialData, ModelSpec, Nonlinearity, Profile,
    RadialGrid,
};
use sidwave::solver::{Observers, StepControl};
use sidwave::{Error, Result};
use std::path::Path;

const DEFAULT_CFL: f64 = 0.5;
const DEFAULT_DT_FLOOR: f64 = 1e-7;
const DEFAULT_REFINE_FACTOR: u32 = 2;
const DEFAULT_MARGIN: f64 = 1.0;
const DEFAULT_STRIDE: usize = 1;
const DEFAULT_BISECT_ITERS: usize = 4;
const DEFAULT_ESCALATE_STEPS: usize = 4;
const DEFAULT_AMP_FACTOR: f64 = 2.0;
const DEFAULT_HORIZON_FACTOR: f64 = 1.5;
const DEFAULT_BASE_NR: usize = 250;
const DEFAULT_LEVELS: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub data: DataSection,
    pub grid: GridSection,
    #[serde(default)]
    pub control: ControlSection,
    pub run: RunSection,
    #[serde(default)]
    pub weight: WeightSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub feasibility: FeasibilitySection,
    #[serde(default)]
    pub diffusion: DiffusionSection,
    #[serde(default)]
    pub testfn: TestfnSection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub escalate: EscalateSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: u32,
    pub p: f64,
    #[serde(default = "default_nonlinearity")]
    pub nonlinearity: String,
    pub damping: DampingSection,
}

fn default_nonlinearity() -> String {
    "abs-pow".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSection {
    /// `scale-invariant` (coefficient `mu / (1+t)`) or `power-law`
    /// (coefficient `(1+t)^{-beta}`).
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<ProfileSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u1: Option<ProfileSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    /// `polynomial-bump`, `truncated-gaussian`, or `zero`.
    pub kind: String,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
}

fn default_amplitude() -> f64 {
    1.0
}

impl ProfileSection {
    pub fn build(&self) -> Result<Option<Profile>> {
        match self.kind.as_str() {
            "zero" => Ok(None),
            "polynomial-bump" => Ok(Some(Profile::PolynomialBump {
                amplitude: self.amplitude,
                radius: self.radius.unwrap_or(1.0),
                smoothness: self.smoothness.unwrap_or(3),
            })),
            "truncated-gaussian" => {
                let width = self.width.unwrap_or(1.0);
                Ok(Some(Profile::TruncatedGaussian {
                    amplitude: self.amplitude,
                    width,
                    cutoff: self.cutoff.unwrap_or(5.0 * width),
                }))
            }
            other => Err(Error::Config(format!(
                "unknown profile kind '{other}' (expected polynomial-bump, truncated-gaussian, or zero)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nr: usize,
    /// Extra radius beyond the light cone when `r_max` is auto-sized.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Explicit domain radius; when omitted it is computed as
    /// `data support + horizon + margin`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dt_floor")]
    pub dt_floor: f64,
    /// Sup-norm level that triggers blow-up classification; omitted
    /// means the solver default (10^6 times the initial sup-norm).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup_threshold: Option<f64>,
    #[serde(default = "default_refine_factor")]
    pub refine_factor: u32,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}
fn default_dt_floor() -> f64 {
    DEFAULT_DT_FLOOR
}
fn default_refine_factor() -> u32 {
    DEFAULT_REFINE_FACTOR
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection {
            cfl: DEFAULT_CFL,
            dt_floor: DEFAULT_DT_FLOOR,
            blowup_threshold: None,
            refine_factor: DEFAULT_REFINE_FACTOR,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_stride() -> usize {
    DEFAULT_STRIDE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    /// `auto` derives the weight exponent from the feasibility chain
    /// when one exists, `explicit` uses the given `delta`, `none`
    /// disables weighting (weighted columns then equal the plain ones).
    #[serde(default = "default_weight_mode")]
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

fn default_weight_mode() -> String {
    "auto".to_string()
}

impl Default for WeightSection {
    fn default() -> Self {
        WeightSection {
            mode: default_weight_mode(),
            delta: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub p_list: Vec<f64>,
    #[serde(default)]
    pub mu_list: Vec<f64>,
    /// Bisection steps refining the empirical threshold between the
    /// largest blow-up value and the smallest global-looking value.
    #[serde(default = "default_bisect_iters")]
    pub bisect_iters: usize,
}

fn default_bisect_iters() -> usize {
    DEFAULT_BISECT_ITERS
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            p_list: Vec::new(),
            mu_list: Vec::new(),
            bisect_iters: DEFAULT_BISECT_ITERS,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilitySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default)]
    pub eps_list: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSection {
    #[serde(default)]
    pub compare_times: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestfnSection {
    #[serde(default)]
    pub r_list: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    /// `gaussian` (globally smooth) or `bump` (compactly supported).
    #[serde(default = "default_case")]
    pub case: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default = "default_base_nr")]
    pub base_nr: usize,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_case() -> String {
    "gaussian".to_string()
}
fn default_base_nr() -> usize {
    DEFAULT_BASE_NR
}
fn default_levels() -> usize {
    DEFAULT_LEVELS
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection {
            case: default_case(),
            n: None,
            base_nr: DEFAULT_BASE_NR,
            levels: DEFAULT_LEVELS,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscalateSection {
    /// When enabled, sweep members climb a geometric (amplitude,
    /// horizon) ladder until blow-up fires or the rungs run out.
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_escalate_steps")]
    pub max_steps: usize,
    #[serde(default = "default_amp_factor")]
    pub amp_factor: f64,
    #[serde(default = "default_horizon_factor")]
    pub horizon_factor: f64,
}

fn default_escalate_steps() -> usize {
    DEFAULT_ESCALATE_STEPS
}
fn default_amp_factor() -> f64 {
    DEFAULT_AMP_FACTOR
}
fn default_horizon_factor() -> f64 {
    DEFAULT_HORIZON_FACTOR
}

impl Default for EscalateSection {
    fn default() -> Self {
        EscalateSection {
            enabled: false,
            max_steps: DEFAULT_ESCALATE_STEPS,
            amp_factor: DEFAULT_AMP_FACTOR,
            horizon_factor: DEFAULT_HORIZON_FACTOR,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value = text
            .parse()
            .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        for raw in overrides {
            apply_override(&mut value, raw)?;
        }
        value
            .try_into()
            .map_err(|e| Error::Config(format!("config error: {e}")))
    }

    /// Effective configuration flattened to sorted dotted-key lines for
    /// the summary echo.
    pub fn echo_lines(&self) -> Vec<String> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut lines = Vec::new();
        flatten_value("config", &value, &mut lines);
        lines.sort();
        lines
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        let damping = self.build_damping()?;
        let nonlinearity = match self.model.nonlinearity.as_str() {
            "abs-pow" => Nonlinearity::AbsPow,
            "signed-pow" => Nonlinearity::SignedPow,
            "neg-abs-pow" => Nonlinearity::NegAbsPow,
            "none" => Nonlinearity::None,
            other => {
                return Err(Error::Config(format!(
                    "unknown nonlinearity '{other}' (expected abs-pow, signed-pow, neg-abs-pow, or none)"
                )))
            }
        };
        ModelSpec::new(self.model.n, damping, self.model.p, nonlinearity)
    }

    pub fn build_damping(&self) -> Result<Damping> {
        let d = &self.model.damping;
        match d.kind.as_str() {
            "scale-invariant" => {
                let mu = d.mu.ok_or_else(|| {
                    Error::Config("scale-invariant damping needs model.damping.mu".into())
                })?;
                Ok(Damping::ScaleInvariant { mu })
            }
            "power-law" => {
                let beta = d.beta.ok_or_else(|| {
                    Error::Config("power-law damping needs model.damping.beta".into())
                })?;
                Ok(Damping::PowerLaw { beta })
            }
            other => Err(Error::Config(format!(
                "unknown damping kind '{other}' (expected scale-invariant or power-law)"
            ))),
        }
    }

    pub fn data_support(&self) -> Result<f64> {
        let mut support = 0.0f64;
        for section in [&self.data.u0, &self.data.u1].into_iter().flatten() {
            if let Some(profile) = section.build()? {
                support = support.max(profile.support_radius());
            }
        }
        Ok(support)
    }

    /// Domain radius: explicit when given, otherwise sized so the light
    /// cone from the data support stays inside the grid for the whole
    /// horizon, plus the margin.
    pub fn resolve_r_max(&self, horizon: f64) -> Result<f64> {
        match self.grid.r_max {
            Some(r) => Ok(r),
            None => Ok(self.data_support()? + horizon + self.grid.margin),
        }
    }

    pub fn step_control(&self) -> StepControl {
        StepControl {
            cfl: self.control.cfl,
            dt_floor: self.control.dt_floor,
            blowup_threshold: self.control.blowup_threshold,
            refine_factor: self.control.refine_factor,
        }
    }

    /// Resolve the observation weight. `auto` supplies the feasibility
    /// chain's `delta` when the model is scale-invariant and the power
    /// sits above the parabolic critical exponent; otherwise it quietly
    /// falls back to no weighting.
    pub fn resolve_weight(&self) -> Result<Option<WeightSpec>> {
        let damping = self.build_damping()?;
        match self.weight.mode.as_str() {
            "none" => Ok(None),
            "explicit" => {
                let delta = self.weight.delta.ok_or_else(|| {
                    Error::Config("weight.mode = explicit needs weight.delta".into())
                })?;
                let Damping::ScaleInvariant { mu } = damping else {
                    return Err(Error::Config(
                        "weighted observables are defined for scale-invariant damping only"
                            .into(),
                    ));
                };
                Ok(Some(WeightSpec::new(mu, delta)?))
            }
            "auto" => {
                let Damping::ScaleInvariant { mu } = damping else {
                    return Ok(None);
                };
                match solve_feasible(self.model.n, self.model.p, None) {
                    Ok(params) => Ok(Some(WeightSpec::new(mu, params.delta)?)),
                    Err(_) => Ok(None),
                }
            }
            other => Err(Error::Config(format!(
                "unknown weight mode '{other}' (expected auto, explicit, or none)"
            ))),
        }
    }
}

/// Everything a solver run needs, resolved from a configuration.
pub struct Prepared {
    pub model: ModelSpec,
    pub grid: RadialGrid,
    pub data: InitialData,
    pub control: StepControl,
    pub observers: Observers,
    pub horizon: f64,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let model = cfg.build_model()?;
    let horizon = cfg.run.horizon;
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!(
            "run.horizon must be finite and nonnegative, got {horizon}"
        )));
    }
    let r_max = cfg.resolve_r_max(horizon)?;
    let grid = make_grid(r_max, cfg.grid.nr)?;
    let u0 = cfg.data.u0.as_ref().map(|s| s.build()).transpose()?.flatten();
    let u1 = cfg.data.u1.as_ref().map(|s| s.build()).transpose()?.flatten();
    let data = sample_initial_data(u0.as_ref(), u1.as_ref(), &grid)?;
    let observers = Observers {
        weight: cfg.resolve_weight()?,
        stride: cfg.run.snapshot_stride,
        trace_every: None,
        trace_times: Vec::new(),
    };
    Ok(Prepared {
        model,
        grid,
        data,
        control: cfg.step_control(),
        observers,
        horizon,
    })
}

/// Apply one `key=value` override onto the TOML tree. The value text is
/// parsed as a TOML literal (numbers, booleans, arrays, strings); bare
/// words fall back to strings.
pub fn apply_override(root: &mut toml::Value, raw: &str) -> Result<()> {
    let (path, text) = raw.split_once('=').ok_or_else(|| {
        Error::Config(format!("override '{raw}' must look like key.path=value"))
    })?;
    let path = path.trim();
    let text = text.trim();
    if path.is_empty() {
        return Err(Error::Config(format!("override '{raw}' has an empty key")));
    }
    let value = parse_override_value(text)?;
    let segments: Vec<&str> = path.split('.').collect();
    let mut node = root;
    for seg in &segments[..segments.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override path '{path}' crosses a non-table value"))
        })?;
        node = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    let table = node.as_table_mut().ok_or_else(|| {
        Error::Config(format!("override path '{path}' crosses a non-table value"))
    })?;
    table.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

fn parse_override_value(text: &str) -> Result<toml::Value> {
    if text.is_empty() {
        return Err(Error::Config("override has an empty value".into()));
    }
    let wrapped = format!("v = {text}");
    if let Ok(parsed) = wrapped.parse::<toml::Value>() {
        if let Some(v) = parsed.get("v") {
            return Ok(v.clone());
        }
    }
    Ok(toml::Value::String(text.to_string()))
}

fn flatten_value(prefix: &str, value: &toml::Value, out: &mut Vec<String>) {
    match value {
        toml::Value::Table(map) => {
            for (k, v) in map {
                flatten_value(&format!("{prefix}.{k}"), v, out);
            }
        }
        other => out.push(format!("{prefix} = {other}")),
    }
}
