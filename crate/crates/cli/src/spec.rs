//! Experiment documents: a TOML table of top-level settings, a `[base]` parameter
//! table, optional `[[sweep]]` axes and `[optimize]` search settings.

use std::fmt;
use std::path::PathBuf;

use noma_harq::optimize::{OutageConstraints, Scheme, SearchSettings};
use noma_harq::{Config, InterferenceMode, PhiMode};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// A user-facing configuration problem; reported with exit code 2.
#[derive(Debug)]
pub struct SpecError(pub String);

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SpecError {}

pub fn spec_error(msg: impl Into<String>) -> anyhow::Error {
    SpecError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    AnalyticExact,
    #[default]
    AnalyticApprox,
    MonteCarlo,
    /// Monte Carlo beside the analytic path chosen by `phi_mode` (approximate by default).
    Both,
}

impl Engine {
    pub fn parse(s: &str) -> anyhow::Result<Self> {
        Value::String(s.to_string())
            .try_into()
            .map_err(|_| spec_error(format!("unknown engine `{s}` (analytic-exact, analytic-approx, monte-carlo, both)")))
    }

    pub fn label(self) -> &'static str {
        match self {
            Engine::AnalyticExact => "analytic-exact",
            Engine::AnalyticApprox => "analytic-approx",
            Engine::MonteCarlo => "monte-carlo",
            Engine::Both => "both",
        }
    }

    pub fn uses_monte_carlo(self) -> bool {
        matches!(self, Engine::MonteCarlo | Engine::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    #[default]
    Evaluate,
    OptimizeRates,
    OptimizeJoint,
    OptimizeAse,
    /// Single-round OMA closed-form optimum.
    Remark1,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    #[serde(default = "default_eps")]
    pub eps1: f64,
    #[serde(default = "default_eps")]
    pub eps2: f64,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub refine_grid: Option<usize>,
    #[serde(default)]
    pub refinements: Option<usize>,
    #[serde(default)]
    pub lambda_min: Option<f64>,
    #[serde(default)]
    pub lambda_max: Option<f64>,
    #[serde(default)]
    pub lambda_points: Option<usize>,
}

fn default_eps() -> f64 {
    0.01
}

impl Default for OptimizeSpec {
    fn default() -> Self {
        OptimizeSpec {
            eps1: default_eps(),
            eps2: default_eps(),
            r_max: None,
            grid: None,
            refine_grid: None,
            refinements: None,
            lambda_min: None,
            lambda_max: None,
            lambda_points: None,
        }
    }
}

impl OptimizeSpec {
    pub fn settings(&self, phi_mode: PhiMode) -> SearchSettings {
        let d = SearchSettings::default();
        let grid = self.grid.unwrap_or(d.grid);
        SearchSettings {
            r_max: self.r_max.unwrap_or(d.r_max),
            grid,
            refine_grid: self.refine_grid.unwrap_or(grid),
            refinements: self.refinements.unwrap_or(d.refinements),
            shrink: d.shrink,
            lambda_min: self.lambda_min.unwrap_or(d.lambda_min),
            lambda_max: self.lambda_max.unwrap_or(d.lambda_max),
            lambda_points: self.lambda_points.unwrap_or(d.lambda_points),
            phi_mode,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub task: Task,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
    /// Empty means the task's default metrics.
    #[serde(default)]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub base: Table,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    #[serde(default)]
    pub optimize: OptimizeSpec,
}

fn default_trials() -> u64 {
    100_000
}

fn default_seed() -> u64 {
    1
}

pub const EVALUATE_METRICS: &[&str] = &[
    "ltat",
    "outage_o1",
    "outage_o2",
    "outage_joint",
    "expected_rounds",
];

pub const OPTIMIZE_METRICS: &[&str] = &[
    "objective",
    "feasible",
    "r1",
    "r2",
    "beta2",
    "lambda",
    "outage_o1",
    "outage_o2",
];

/// Everything a single sweep point needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub cfg: Config,
    pub scheme: Scheme,
    pub phi_mode: PhiMode,
    pub eps1: f64,
    pub eps2: f64,
}

impl Point {
    pub fn constraints(&self) -> anyhow::Result<OutageConstraints> {
        OutageConstraints::new(self.eps1, self.eps2).map_err(|e| spec_error(e.to_string()))
    }
}

pub const PARAMS: &[&str] = &[
    "lambda",
    "alpha",
    "snr_db",
    "p_over_sigma2",
    "d1",
    "d2",
    "d_inter",
    "beta2",
    "r1",
    "r2",
    "k_max",
    "cooperative",
    "interference_mode",
    "scheme",
    "phi_mode",
    "eps",
    "eps1",
    "eps2",
];

fn as_f64(name: &str, v: &Value) -> anyhow::Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(spec_error(format!("`{name}` must be a number, got {v}"))),
    }
}

fn as_str<'a>(name: &str, v: &'a Value) -> anyhow::Result<&'a str> {
    v.as_str()
        .ok_or_else(|| spec_error(format!("`{name}` must be a string, got {v}")))
}

pub fn set_param(p: &mut Point, name: &str, v: &Value) -> anyhow::Result<()> {
    let c = &mut p.cfg;
    match name {
        "lambda" => c.lambda = as_f64(name, v)?,
        "alpha" => c.alpha = as_f64(name, v)?,
        "snr_db" => *c = c.with_snr_db(as_f64(name, v)?),
        "p_over_sigma2" => c.p_over_sigma2 = as_f64(name, v)?,
        "d1" => c.d1 = as_f64(name, v)?,
        "d2" => c.d2 = as_f64(name, v)?,
        "d_inter" => c.d_inter = as_f64(name, v)?,
        "beta2" => c.beta2 = as_f64(name, v)?,
        "r1" => c.r1 = as_f64(name, v)?,
        "r2" => c.r2 = as_f64(name, v)?,
        "k_max" => {
            let k = as_f64(name, v)?;
            if k.fract() != 0.0 || k < 0.0 {
                return Err(spec_error(format!("`k_max` must be a positive integer, got {v}")));
            }
            c.k_max = k as usize;
        }
        "cooperative" => {
            c.cooperative = match v {
                Value::Boolean(b) => *b,
                _ => return Err(spec_error(format!("`cooperative` must be true or false, got {v}"))),
            }
        }
        "interference_mode" => {
            c.interference_mode = match as_str(name, v)? {
                "correlated" => InterferenceMode::Correlated,
                "independent" | "independent-per-round" => InterferenceMode::IndependentPerRound,
                "none" => InterferenceMode::None,
                other => {
                    return Err(spec_error(format!(
                        "`interference_mode` must be correlated, independent or none, got `{other}`"
                    )))
                }
            }
        }
        "scheme" => {
            p.scheme = match as_str(name, v)? {
                "noma" => Scheme::Noma,
                "oma" => Scheme::Oma,
                other => return Err(spec_error(format!("`scheme` must be noma or oma, got `{other}`"))),
            }
        }
        "phi_mode" => {
            p.phi_mode = match as_str(name, v)? {
                "exact" => PhiMode::Exact,
                "approx" => PhiMode::Approx,
                other => return Err(spec_error(format!("`phi_mode` must be exact or approx, got `{other}`"))),
            }
        }
        "eps" => {
            let e = as_f64(name, v)?;
            p.eps1 = e;
            p.eps2 = e;
        }
        "eps1" => p.eps1 = as_f64(name, v)?,
        "eps2" => p.eps2 = as_f64(name, v)?,
        other => {
            return Err(spec_error(format!(
                "unknown parameter `{other}` (known: {})",
                PARAMS.join(", ")
            )))
        }
    }
    Ok(())
}

/// Text form of a parameter value in records: numbers with 17 significant digits.
pub fn render_value(v: &Value) -> String {
    match v {
        Value::Float(x) => format_number(*x),
        Value::Integer(i) => format_number(*i as f64),
        Value::String(s) => s.clone(),
        Value::Boolean(b) => b.to_string(),
        other => other.to_string(),
    }
}

pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e| spec_error(format!("malformed experiment file: {e}")))?;
        Self::from_table(table)
    }

    pub fn from_table(table: Table) -> anyhow::Result<Self> {
        let spec: ExperimentSpec = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| spec_error(format!("invalid experiment: {}", e.message())))?;
        spec.check()?;
        Ok(spec)
    }

    /// Base point before sweeps.
    pub fn base_point(&self) -> anyhow::Result<Point> {
        let mut p = Point {
            cfg: Config::default(),
            scheme: Scheme::Noma,
            phi_mode: PhiMode::Approx,
            eps1: self.optimize.eps1,
            eps2: self.optimize.eps2,
        };
        for (k, v) in &self.base {
            set_param(&mut p, k, v).map_err(|e| spec_error(format!("[base] {e}")))?;
        }
        Ok(p)
    }

    /// Sweep points in row-major order (last axis fastest), with their labels.
    pub fn points(&self) -> anyhow::Result<Vec<(Vec<Value>, Point)>> {
        let base = self.base_point()?;
        let mut out = vec![(Vec::new(), base)];
        for axis in &self.sweep {
            let mut next = Vec::with_capacity(out.len() * axis.values.len());
            for (labels, p) in &out {
                for v in &axis.values {
                    let mut q = *p;
                    set_param(&mut q, &axis.param, v)
                        .map_err(|e| spec_error(format!("sweep over `{}`: {e}", axis.param)))?;
                    let mut l = labels.clone();
                    l.push(v.clone());
                    next.push((l, q));
                }
            }
            out = next;
        }
        for (labels, p) in &out {
            p.cfg.validate().map_err(|e| {
                spec_error(format!("at sweep point {}: {e}", self.describe(labels)))
            })?;
            p.constraints()?;
        }
        Ok(out)
    }

    pub fn param_names(&self) -> String {
        self.sweep
            .iter()
            .map(|a| a.param.as_str())
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn describe(&self, labels: &[Value]) -> String {
        self.sweep
            .iter()
            .zip(labels)
            .map(|(a, v)| format!("{}={}", a.param, v))
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn metrics(&self) -> Vec<String> {
        if !self.metrics.is_empty() {
            return self.metrics.clone();
        }
        let defaults: &[&str] = match self.task {
            Task::Evaluate => &EVALUATE_METRICS[..4],
            _ => OPTIMIZE_METRICS,
        };
        defaults.iter().map(|s| s.to_string()).collect()
    }

    fn check(&self) -> anyhow::Result<()> {
        if self.engine.uses_monte_carlo() && self.trials == 0 {
            return Err(spec_error("`trials` must be at least 1 when the engine includes monte-carlo"));
        }
        if self.task != Task::Evaluate && self.engine.uses_monte_carlo() {
            return Err(spec_error("optimization tasks run on an analytic engine"));
        }
        let known: &[&str] = match self.task {
            Task::Evaluate => EVALUATE_METRICS,
            _ => OPTIMIZE_METRICS,
        };
        for m in &self.metrics {
            if !known.contains(&m.as_str()) {
                return Err(spec_error(format!(
                    "unknown metric `{m}` for this task (known: {})",
                    known.join(", ")
                )));
            }
        }
        for axis in &self.sweep {
            if !PARAMS.contains(&axis.param.as_str()) {
                return Err(spec_error(format!(
                    "sweep parameter `{}` is not a config field (known: {})",
                    axis.param,
                    PARAMS.join(", ")
                )));
            }
            if axis.values.is_empty() {
                return Err(spec_error(format!("sweep over `{}` has no values", axis.param)));
            }
        }
        Ok(())
    }
}

/// Applies `key=value` overrides to a raw experiment table. Top-level keys replace
/// settings, `optimize.<key>` search settings, `sweep.<param>` a sweep's values, and any
/// other key is a `[base]` parameter.
pub fn apply_overrides(table: &mut Table, overrides: &[String]) -> anyhow::Result<()> {
    const TOP: &[&str] = &["name", "task", "engine", "trials", "seed", "output", "json", "metrics"];
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| spec_error(format!("override `{o}` is not of the form key=value")))?;
        let value = parse_value(raw.trim());
        let key = key.trim();
        if let Some(param) = key.strip_prefix("sweep.") {
            let values = match value {
                Value::Array(a) => a,
                v => vec![v],
            };
            let sweeps = table
                .entry("sweep")
                .or_insert_with(|| Value::Array(Vec::new()))
                .as_array_mut()
                .ok_or_else(|| spec_error("`sweep` must be an array of tables"))?;
            let existing = sweeps
                .iter_mut()
                .find(|s| s.get("param").and_then(Value::as_str) == Some(param));
            match existing {
                Some(s) => {
                    s.as_table_mut()
                        .expect("sweep entries are tables")
                        .insert("values".into(), Value::Array(values));
                }
                None => {
                    let mut t = Table::new();
                    t.insert("param".into(), Value::String(param.into()));
                    t.insert("values".into(), Value::Array(values));
                    sweeps.push(Value::Table(t));
                }
            }
        } else if let Some(k) = key.strip_prefix("optimize.") {
            sub_table(table, "optimize")?.insert(k.into(), value);
        } else if TOP.contains(&key) {
            table.insert(key.into(), value);
        } else {
            let k = key.strip_prefix("base.").unwrap_or(key);
            sub_table(table, "base")?.insert(k.into(), value);
        }
    }
    Ok(())
}

fn sub_table<'a>(table: &'a mut Table, name: &str) -> anyhow::Result<&'a mut Table> {
    table
        .entry(name)
        .or_insert_with(|| Value::Table(Table::new()))
        .as_table_mut()
        .ok_or_else(|| spec_error(format!("`{name}` must be a table")))
}

/// A TOML literal if it parses as one, otherwise a bare string; `[a,b]` with bare
/// words (quotes eaten by the shell) is a list of such values.
fn parse_value(raw: &str) -> Value {
    if let Some(v) = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
    {
        return v;
    }
    match raw.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        Some(inner) => Value::Array(
            inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(parse_value)
                .collect(),
        ),
        None => Value::String(raw.to_string()),
    }
}

pub fn to_toml(spec: &ExperimentSpec) -> anyhow::Result<String> {
    Ok(toml::to_string_pretty(spec)?)
}
