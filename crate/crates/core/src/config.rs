//! JSON run configuration for the command-line tool.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ensure, Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{Hurst, KernelSpec};
use crate::model::{InitialLaw, ModelParams, RescalingScheme, VolFunction, VolMode};
use crate::rates::{SolverOptions, VariationalProblem};
use crate::smile::SmileKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Kernels,
    Simulate,
    Rate,
    Smile,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub horizon: f64,
    pub spacing: Spacing,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 32, horizon: 1.0, spacing: Spacing::Uniform }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<TimeGrid> {
        match self.spacing {
            Spacing::Uniform => TimeGrid::uniform_horizon(self.n, self.horizon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelsConfig {
    /// Kernel to tabulate; the model's `F` kernel if absent.
    pub kernel: Option<KernelSpec>,
    pub gram: bool,
}

impl Default for KernelsConfig {
    fn default() -> Self {
        Self { kernel: None, gram: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_paths: usize,
    /// Level of the tail event `X_1 >= level` estimated along `eps_ladder`.
    pub level: Option<f64>,
    pub vol_mode: VolMode,
    /// Number of `X` paths written to `paths.csv` at the first `ε`.
    pub write_paths: usize,
    pub allow_scheme_violation: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            level: Some(1.0),
            vol_mode: VolMode::Scaled,
            write_paths: 0,
            allow_scheme_violation: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFamily {
    #[default]
    Tail,
    SmallTime,
    RandomStart,
    /// The explicit `problem`.
    Problem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    pub family: RateFamily,
    pub levels: Vec<f64>,
    /// Scaling exponent; the model's `b` if absent.
    pub b: Option<f64>,
    pub support: Option<(f64, f64)>,
    pub terminal_time: Option<f64>,
    pub include_drift: Option<bool>,
    pub problem: Option<VariationalProblem>,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            family: RateFamily::Tail,
            levels: vec![1.0],
            b: None,
            support: None,
            terminal_time: None,
            include_drift: None,
            problem: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSmileConfig {
    pub t: f64,
    pub strikes: Vec<f64>,
    pub n_paths: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

fn default_bootstrap() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmileConfig {
    pub queries: Vec<SmileKind>,
    pub mc: Option<McSmileConfig>,
}

impl Default for SmileConfig {
    fn default() -> Self {
        Self { queries: vec![SmileKind::TailSlope { t: 1.0 }], mc: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelParams,
    pub law: InitialLaw,
    pub scheme: RescalingScheme,
    pub grid: GridConfig,
    pub eps_ladder: Vec<f64>,
    pub solver: SolverOptions,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub kernels: KernelsConfig,
    pub simulate: SimulateConfig,
    pub rate: RateConfig,
    pub smile: SmileConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Verify,
            model: ModelParams {
                lambda: 0.0,
                beta: -1.0,
                xi: 1.0,
                rho: 0.0,
                hurst: Hurst::new(0.3).expect("valid"),
                vol: VolFunction::linear(1.0),
            },
            law: InitialLaw::Point { value: 0.0 },
            scheme: RescalingScheme::Tails { b: 1.0 },
            grid: GridConfig::default(),
            eps_ladder: vec![0.7, 0.6, 0.5, 0.4],
            solver: SolverOptions::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            kernels: KernelsConfig::default(),
            simulate: SimulateConfig::default(),
            rate: RateConfig::default(),
            smile: SmileConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.law.validate()?;
        self.grid.build()?;
        ensure(self.grid.horizon > 0.0, || "grid horizon must be positive".into())?;
        ensure(self.eps_ladder.iter().all(|e| *e > 0.0 && e.is_finite()), || {
            "eps ladder entries must be positive".into()
        })?;
        if let Some(p) = &self.rate.problem {
            p.validate()?;
        }
        if self.rate.family == RateFamily::Problem {
            ensure(self.rate.problem.is_some(), || "rate family `problem` needs a `problem` block".into())?;
        }
        Ok(())
    }
}

/// Sets `path` (dot separated) in a JSON object to `value`. The value is
/// parsed as JSON and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidParameter(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(Error::InvalidParameter(format!("empty key in override `{assignment}`")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::InvalidParameter(format!("override `{path}` descends into a non-object")))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one key")
}

/// Parses a configuration, or the `config` block of a run manifest, after
/// applying overrides.
pub fn load(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut root: Value = serde_json::from_str(text)?;
    if let Some(inner) = root.get("config").filter(|_| root.get("manifest_version").is_some()) {
        root = inner.clone();
    }
    if !root.is_object() {
        return Err(Error::InvalidParameter("configuration must be a JSON object".into()));
    }
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let config: RunConfig = serde_json::from_value(root)?;
    config.validate()?;
    Ok(config)
}
