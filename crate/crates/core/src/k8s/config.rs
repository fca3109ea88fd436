//! Scenario files.
//!
//! ```json
//! {
//!   "cluster": {"machines": [{"id": "m1", "ram_gb": 8, "cores": 1, "rtt_ms": 0, "preloaded": ["app"]}],
//!               "registry_bandwidth_gbps": 1.0, "scheduler_mode": "spread"},
//!   "deployment": {"C": 4, "rho": {"pods": 1, "containers": 2},
//!                  "pod": {"restart_policy": "Never", "image": {"name": "app", "size_gb": 1.2}}},
//!   "timing": {"t1": {"dist": "constant", "params": {"value": 2.0}}, "...": "..."},
//!   "run": {"seed": 1, "replications": 30}
//! }
//! ```

use std::path::Path;

use podnet_petri::DEFAULT_MAX_EVENTS;
use serde::{Deserialize, Serialize};

use super::{build_deployment, ClusterSpec, DeploymentSpec, K8sError, PodSpec, Result, Rho, RunOptions, TimingProfile};

/// Either an exact `{pods, containers}` fraction or a decimal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Fraction(Rho),
    Decimal(f64),
}

impl RhoSpec {
    pub fn resolve(self, containers: u64) -> Result<Rho> {
        match self {
            RhoSpec::Fraction(r) => Ok(r),
            RhoSpec::Decimal(d) => Rho::from_decimal(d, containers),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentConfig {
    #[serde(rename = "C")]
    pub containers: u64,
    pub rho: RhoSpec,
    pub pod: PodSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub seed: u64,
    pub replications: usize,
    pub max_events: u64,
    pub horizon_s: Option<f64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { seed: 0, replications: 1, max_events: DEFAULT_MAX_EVENTS, horizon_s: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cluster: ClusterSpec,
    pub deployment: DeploymentConfig,
    pub timing: TimingProfile,
    #[serde(default)]
    pub run: RunSettings,
}

impl Scenario {
    /// Parses and validates a scenario. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<Scenario> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            K8sError::Invalid(format!("{path}: {}", e.into_inner()))
        })?;
        s.cluster.validate()?;
        s.timing.validate()?;
        s.deployment()?;
        if s.run.replications == 0 {
            return Err(K8sError::Invalid("run.replications: must be >= 1".into()));
        }
        if let Some(h) = s.run.horizon_s {
            if !(h >= 0.0) {
                return Err(K8sError::Invalid(format!("run.horizon_s: must be >= 0, got {h}")));
            }
        }
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| K8sError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn deployment(&self) -> Result<DeploymentSpec> {
        let d = &self.deployment;
        let rho = d.rho.resolve(d.containers).map_err(|e| match e {
            K8sError::Invalid(m) => K8sError::Invalid(format!("deployment.rho: {m}")),
            other => other,
        })?;
        build_deployment(d.containers, rho, &d.pod, self.timing.clone())
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions { seed: self.run.seed, max_events: self.run.max_events, horizon: self.run.horizon_s }
    }
}
