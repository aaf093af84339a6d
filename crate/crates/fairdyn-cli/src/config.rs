//! Scenario configuration: JSON schema, `--set` overrides, validation, and
//! construction of the domain objects.

use crate::error::CliError;
use fairdyn::control::{LenderParams, SolverOptions};
use fairdyn::dynamics::DynamicsParams;
use fairdyn::policy::{FairPolicy, FixedPolicy};
use fairdyn::population::PopulationState;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// One group's initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub name: String,
    pub mu: f64,
    pub c: f64,
    #[serde(default)]
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub beta: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LenderConfig {
    pub interest: f64,
    pub discount: f64,
}

/// Policy descriptor. `kind` selects the family member or special policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    DemographicParity { s: f64 },
    EqualityOfOpportunity { s: f64 },
    EqualizedOdds,
    Blind { threshold: f64 },
    Custom { s: f64, k1: f64, k2: f64 },
    Fixed { threshold: f64 },
    Optimal,
}

impl PolicySpec {
    /// Short name used in file stems and report keys.
    pub fn slug(&self) -> &'static str {
        match self {
            PolicySpec::DemographicParity { .. } => "demographic_parity",
            PolicySpec::EqualityOfOpportunity { .. } => "equality_of_opportunity",
            PolicySpec::EqualizedOdds => "equalized_odds",
            PolicySpec::Blind { .. } => "blind",
            PolicySpec::Custom { .. } => "custom",
            PolicySpec::Fixed { .. } => "fixed",
            PolicySpec::Optimal => "optimal",
        }
    }

    pub fn is_fair(&self) -> bool {
        !matches!(self, PolicySpec::Fixed { .. } | PolicySpec::Optimal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_action_grid")]
    pub action_grid: usize,
}

fn default_grid_size() -> usize {
    513
}
fn default_tol() -> f64 {
    1e-9
}
fn default_action_grid() -> usize {
    257
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_size: default_grid_size(),
            tol: default_tol(),
            action_grid: default_action_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for emitted files; defaults to the config file's directory.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// File-name stem; defaults to the config file's stem.
    #[serde(default)]
    pub stem: Option<String>,
}

/// A full scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub groups: Vec<GroupConfig>,
    pub dynamics: DynamicsConfig,
    pub lender: LenderConfig,
    /// Policy for `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicySpec>,
    /// Policy list for `compare-policies`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<PolicySpec>>,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn solver_options(&self) -> SolverOptions {
        let s = self.solver.clone().unwrap_or_default();
        SolverOptions {
            grid_size: s.grid_size,
            tol: s.tol,
            action_grid: s.action_grid,
        }
    }

    /// Build the validated population states.
    pub fn states(&self) -> Result<Vec<PopulationState>, CliError> {
        self.groups
            .iter()
            .enumerate()
            .map(|(i, g)| {
                PopulationState::new(g.mu, g.c)
                    .map_err(|e| CliError::validation(e.to_string(), format!("groups.{i}")))
            })
            .collect()
    }

    pub fn group_params(&self) -> Result<Vec<DynamicsParams>, CliError> {
        self.groups
            .iter()
            .enumerate()
            .map(|(i, g)| {
                DynamicsParams::new(self.dynamics.beta, self.dynamics.nu, g.alpha).map_err(|e| {
                    CliError::validation(e.to_string(), format!("groups.{i}.alpha"))
                })
            })
            .collect()
    }

    pub fn lender_params(&self) -> Result<LenderParams, CliError> {
        LenderParams::new(self.lender.interest, self.lender.discount)
            .map_err(|e| CliError::validation(e.to_string(), "lender"))
    }

    /// Shared shape across groups, or a validation error naming the field.
    pub fn shared_shape(&self) -> Result<f64, CliError> {
        let c0 = self.groups[0].c;
        for (i, g) in self.groups.iter().enumerate() {
            if (g.c - c0).abs() > 1e-12 * c0.max(1.0) {
                return Err(CliError::validation(
                    format!("groups must share the shape parameter, got {} and {}", c0, g.c),
                    format!("groups.{i}.c"),
                ));
            }
        }
        Ok(c0)
    }

    pub fn shared_alpha(&self) -> Result<f64, CliError> {
        let a0 = self.groups[0].alpha;
        for (i, g) in self.groups.iter().enumerate() {
            if (g.alpha - a0).abs() > 1e-12 {
                return Err(CliError::validation(
                    "this command requires all groups to share alpha".to_string(),
                    format!("groups.{i}.alpha"),
                ));
            }
        }
        Ok(a0)
    }

    /// Structural validation common to every command.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.groups.is_empty() {
            return Err(CliError::validation("at least one group", "groups"));
        }
        let mut names: Vec<&str> = self.groups.iter().map(|g| g.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.groups.len() {
            return Err(CliError::validation("group names must be unique", "groups"));
        }
        if self.horizon < 1 {
            return Err(CliError::validation("horizon must be at least 1", "horizon"));
        }
        self.states()?;
        self.group_params()?;
        self.lender_params()?;
        if let Some(policy) = &self.policy {
            self.validate_policy(policy, "policy")?;
        }
        if let Some(policies) = &self.policies {
            if policies.is_empty() {
                return Err(CliError::validation(
                    "policy list must not be empty",
                    "policies",
                ));
            }
            for (i, p) in policies.iter().enumerate() {
                self.validate_policy(p, &format!("policies.{i}"))?;
            }
        }
        if let Some(s) = &self.solver {
            if s.grid_size < 64 {
                return Err(CliError::validation(
                    "grid_size must be at least 64",
                    "solver.grid_size",
                ));
            }
            if s.tol.is_nan() || s.tol <= 0.0 {
                return Err(CliError::validation("tol must be positive", "solver.tol"));
            }
        }
        Ok(())
    }

    fn validate_policy(&self, policy: &PolicySpec, field: &str) -> Result<(), CliError> {
        // Fair policies require a shared shape parameter across groups.
        if policy.is_fair() {
            self.shared_shape()
                .map_err(|e| CliError::validation(e.message(), field))?;
        }
        match policy {
            PolicySpec::DemographicParity { s } => {
                FairPolicy::demographic_parity(*s)
                    .map_err(|e| CliError::validation(e.to_string(), format!("{field}.s")))?;
            }
            PolicySpec::EqualityOfOpportunity { s } => {
                FairPolicy::equality_of_opportunity(*s)
                    .map_err(|e| CliError::validation(e.to_string(), format!("{field}.s")))?;
            }
            PolicySpec::EqualizedOdds => {
                if self.groups.len() != 2 {
                    return Err(CliError::validation(
                        "equalized odds applies to exactly two groups",
                        field,
                    ));
                }
            }
            PolicySpec::Blind { threshold } => {
                FairPolicy::blind(*threshold).map_err(|e| {
                    CliError::validation(e.to_string(), format!("{field}.threshold"))
                })?;
            }
            PolicySpec::Custom { s, k1, k2 } => {
                let p = FairPolicy::custom(*s, *k1, *k2)
                    .map_err(|e| CliError::validation(e.to_string(), field))?;
                // Check the offset bounds against every group state now
                // rather than failing mid-run.
                for (i, st) in self.states()?.iter().enumerate() {
                    fairdyn::policy::fair_threshold(&p, st).map_err(|e| {
                        CliError::validation(e.to_string(), format!("{field} (groups.{i})"))
                    })?;
                }
            }
            PolicySpec::Fixed { threshold } => {
                FixedPolicy::new(*threshold).map_err(|e| {
                    CliError::validation(e.to_string(), format!("{field}.threshold"))
                })?;
            }
            PolicySpec::Optimal => {
                // Solved per group; each group's alpha is honored.
            }
        }
        Ok(())
    }
}

/// Parse a config file, apply `--set path=value` overrides, validate.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display()), "config"))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        CliError::validation(format!("{}: {e}", path.display()), "config")
    })?;
    for entry in overrides {
        apply_override(&mut value, entry)?;
    }
    let config: ScenarioConfig = serde_json::from_value(value).map_err(|e| {
        CliError::validation(format!("{}: {e}", path.display()), "config")
    })?;
    config.validate()?;
    Ok(config)
}

/// Apply one `dotted.path=value` override to the JSON tree. Array elements
/// are addressed by index (`groups.0.mu=0.5`).
fn apply_override(root: &mut serde_json::Value, entry: &str) -> Result<(), CliError> {
    let (path, raw) = entry.split_once('=').ok_or_else(|| {
        CliError::validation(format!("override `{entry}` is not path=value"), "--set")
    })?;
    let new_value: serde_json::Value = if let Ok(n) = raw.parse::<i64>() {
        serde_json::json!(n)
    } else if let Ok(n) = raw.parse::<f64>() {
        serde_json::json!(n)
    } else {
        match raw {
            "true" => serde_json::json!(true),
            "false" => serde_json::json!(false),
            _ => serde_json::json!(raw),
        }
    };
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if last {
            match cursor {
                serde_json::Value::Object(map) => {
                    map.insert(seg.to_string(), new_value);
                    return Ok(());
                }
                serde_json::Value::Array(items) => {
                    let idx: usize = seg.parse().map_err(|_| {
                        CliError::validation(format!("bad array index `{seg}`"), "--set")
                    })?;
                    if idx >= items.len() {
                        return Err(CliError::validation(
                            format!("index {idx} out of range in `{path}`"),
                            "--set",
                        ));
                    }
                    items[idx] = new_value;
                    return Ok(());
                }
                _ => {
                    return Err(CliError::validation(
                        format!("`{path}` does not address an object or array"),
                        "--set",
                    ))
                }
            }
        }
        cursor = match cursor {
            serde_json::Value::Object(map) => map.get_mut(*seg).ok_or_else(|| {
                CliError::validation(format!("no field `{seg}` in `{path}`"), "--set")
            })?,
            serde_json::Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| {
                    CliError::validation(format!("bad array index `{seg}`"), "--set")
                })?;
                items.get_mut(idx).ok_or_else(|| {
                    CliError::validation(format!("index {idx} out of range in `{path}`"), "--set")
                })?
            }
            _ => {
                return Err(CliError::validation(
                    format!("`{path}` walks through a scalar"),
                    "--set",
                ))
            }
        };
    }
    unreachable!("split never yields an empty segment list")
}

/// Where a run's artifacts go: `<dir>/<stem>_<suffix>`.
#[derive(Debug, Clone)]
pub struct OutputTarget {
    pub dir: PathBuf,
    pub stem: String,
}

impl OutputTarget {
    pub fn resolve(
        config: &ScenarioConfig,
        config_path: &Path,
        dir_flag: &Option<PathBuf>,
        stem_flag: &Option<String>,
    ) -> OutputTarget {
        let dir = dir_flag
            .clone()
            .or_else(|| config.output.dir.clone())
            .unwrap_or_else(|| {
                config_path
                    .parent()
                    .map(|p| p.to_path_buf())
                    .unwrap_or_else(|| PathBuf::from("."))
            });
        let stem = stem_flag
            .clone()
            .or_else(|| config.output.stem.clone())
            .unwrap_or_else(|| {
                config_path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "scenario".to_string())
            });
        OutputTarget { dir, stem }
    }

    pub fn file(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}", self.stem))
    }
}
