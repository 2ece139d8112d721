//! JSON run configuration and the replayable run manifest.
//!
//! A config names one or more designs plus the shared model, grids, seeds
//! and tests; it expands to one [`ExperimentConfig`] per design. All designs
//! share the master seed, so cross-design comparisons use common random
//! numbers.
//!
//! The manifest written next to the results embeds the fully resolved
//! config; feeding a manifest back to `run --config` replays the run and
//! reproduces the CSV byte for byte.

use serde::{Deserialize, Serialize};
use sparsetest::bench::{ExperimentConfig, ModelKind, SPolicy};
use sparsetest::designs::DesignSpec;
use sparsetest::stats::StatKind;

fn default_sigma() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_s_policy() -> SPolicy {
    SPolicy::AdaptiveOne
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Single-design shorthand; merged into `designs` when resolving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub designs: Vec<DesignSpec>,
    pub model: ModelKind,
    pub alpha_grid: Vec<f64>,
    pub signal_grid: Vec<f64>,
    pub trials: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_true")]
    pub sigma_known: bool,
    pub tests: Vec<StatKind>,
    #[serde(default = "default_s_policy")]
    pub s_policy: SPolicy,
    #[serde(default = "default_true")]
    pub fresh_design_per_trial: bool,
}

impl RunConfig {
    /// Apply CLI overrides and fold the single-design shorthand into the
    /// design list.
    pub fn resolve(mut self, seed: Option<u64>, trials: Option<u32>) -> Result<RunConfig, String> {
        if let Some(seed) = seed {
            self.master_seed = seed;
        }
        if let Some(trials) = trials {
            self.trials = trials;
        }
        if let Some(d) = self.design.take() {
            self.designs.insert(0, d);
        }
        if self.designs.is_empty() {
            return Err("config names no design (use `design` or `designs`)".into());
        }
        Ok(self)
    }

    /// One experiment per design, sharing every other setting.
    pub fn experiments(&self) -> Vec<ExperimentConfig> {
        self.designs
            .iter()
            .map(|design| ExperimentConfig {
                design: design.clone(),
                model: self.model,
                alpha_grid: self.alpha_grid.clone(),
                signal_grid: self.signal_grid.clone(),
                trials: self.trials,
                master_seed: self.master_seed,
                sigma: self.sigma,
                sigma_known: self.sigma_known,
                tests: self.tests.clone(),
                s_policy: self.s_policy,
                fresh_design_per_trial: self.fresh_design_per_trial,
            })
            .collect()
    }
}

/// Parse a config file, accepting either a bare [`RunConfig`] or a manifest
/// produced by a previous run (replay).
pub fn parse_config(text: &str) -> Result<RunConfig, String> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?;
    let config_value = match value.get("config") {
        Some(inner) if value.get("tool").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(config_value).map_err(|e| format!("invalid config: {e}"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Outputs {
    pub results_csv: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plots: Vec<String>,
}

/// Everything needed to replay a run, plus bookkeeping timestamps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub config: RunConfig,
    pub outputs: Outputs,
}
