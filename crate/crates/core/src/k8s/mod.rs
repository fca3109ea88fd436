//! Pods as tokens of a system net, containers as tokens of per-pod child
//! nets, a resource-constrained scheduler and a shared image registry.

use std::collections::BTreeSet;
use std::fmt;

use podnet_petri::{DelayDistribution, NetError, SimError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod config;
mod metrics;
mod nets;
mod sim;

pub use config::{DeploymentConfig, RhoSpec, RunSettings, Scenario};
pub use metrics::{
    restart_cycle_time, ContainerPhase, CreationRecord, DownloadRecord, MachineUsage, PodPhase, PodRecord, RestartRecord,
    SimResult,
};
pub use nets::{build_system_net, container_net, system_net, SystemNet};
pub use sim::{
    image_download_delay, simulate, simulate_replications, simulate_with, DownloadHook, PodScheduler, RunOptions,
};

#[derive(Debug, Error)]
pub enum K8sError {
    #[error("{pods} pods cannot evenly hold {containers} containers (rho = {rho})")]
    NonIntegralLayout { containers: u64, pods: f64, rho: String },
    #[error("invalid specification: {0}")]
    Invalid(String),
    #[error("no restart observed for container {container} of pod {pod}")]
    NoRestartObserved { pod: usize, container: i64 },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub type Result<T, E = K8sError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    #[serde(rename = "id", alias = "node_id")]
    pub node_id: String,
    pub ram_gb: f64,
    pub cores: f64,
    #[serde(default)]
    pub rtt_ms: f64,
    #[serde(default, rename = "preloaded", alias = "preloaded_images")]
    pub preloaded_images: BTreeSet<String>,
}

impl Machine {
    pub fn new(node_id: &str, ram_gb: f64, cores: f64) -> Self {
        Machine { node_id: node_id.to_owned(), ram_gb, cores, rtt_ms: 0.0, preloaded_images: BTreeSet::new() }
    }

    pub fn rtt(mut self, rtt_ms: f64) -> Self {
        self.rtt_ms = rtt_ms;
        self
    }

    pub fn preload(mut self, image: &str) -> Self {
        self.preloaded_images.insert(image.to_owned());
        self
    }
}

/// How the scheduler picks among the machines that fit a pod.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerMode {
    /// Lowest machine in declaration order.
    #[serde(alias = "first-fit", alias = "first-fit-by-id")]
    FirstFit,
    /// Round robin over the machines that fit.
    #[default]
    #[serde(alias = "round_robin", alias = "round-robin")]
    Spread,
    /// Uniform among the machines that fit, drawn from the run's seed.
    #[serde(alias = "seeded-random", alias = "seeded_random")]
    Random,
}

/// Where container creation is serialized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreationMode {
    /// Each machine creates one container at a time.
    #[default]
    MachineSerial,
    /// Pods on a machine are created one after another; the containers of
    /// one pod are created concurrently.
    PodParallel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub machines: Vec<Machine>,
    pub registry_bandwidth_gbps: f64,
    #[serde(default)]
    pub scheduler_mode: SchedulerMode,
    #[serde(default)]
    pub creation: CreationMode,
}

impl ClusterSpec {
    pub fn new(machines: Vec<Machine>, registry_bandwidth_gbps: f64) -> Self {
        ClusterSpec {
            machines,
            registry_bandwidth_gbps,
            scheduler_mode: SchedulerMode::default(),
            creation: CreationMode::default(),
        }
    }

    /// `n` identical machines named `m1..mn`.
    pub fn homogeneous(n: usize, ram_gb: f64, cores: f64, registry_bandwidth_gbps: f64) -> Self {
        let machines = (1..=n).map(|i| Machine::new(&format!("m{i}"), ram_gb, cores)).collect();
        Self::new(machines, registry_bandwidth_gbps)
    }

    pub fn scheduler(mut self, mode: SchedulerMode) -> Self {
        self.scheduler_mode = mode;
        self
    }

    pub fn creation(mut self, mode: CreationMode) -> Self {
        self.creation = mode;
        self
    }

    pub fn preload_all(mut self, image: &str) -> Self {
        for m in &mut self.machines {
            m.preloaded_images.insert(image.to_owned());
        }
        self
    }

    pub fn n(&self) -> usize {
        self.machines.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.machines.is_empty() {
            return Err(K8sError::Invalid("cluster.machines: at least one machine is required".into()));
        }
        if !(self.registry_bandwidth_gbps > 0.0 && self.registry_bandwidth_gbps.is_finite()) {
            return Err(K8sError::Invalid(format!(
                "cluster.registry_bandwidth_gbps: must be > 0, got {}",
                self.registry_bandwidth_gbps
            )));
        }
        let mut ids = BTreeSet::new();
        for (i, m) in self.machines.iter().enumerate() {
            if !ids.insert(m.node_id.as_str()) {
                return Err(K8sError::Invalid(format!("cluster.machines[{i}].id: duplicate `{}`", m.node_id)));
            }
            for (field, v) in [("ram_gb", m.ram_gb), ("cores", m.cores), ("rtt_ms", m.rtt_ms)] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(K8sError::Invalid(format!("cluster.machines[{i}].{field}: must be >= 0, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RestartPolicy {
    Always = 0,
    OnFailure = 1,
    Never = 2,
}

impl RestartPolicy {
    pub fn code(self) -> i64 {
        self as i64
    }
}

impl fmt::Display for RestartPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RestartPolicy::Always => "Always",
            RestartPolicy::OnFailure => "OnFailure",
            RestartPolicy::Never => "Never",
        })
    }
}

impl Serialize for RestartPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RestartPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Code(i64),
            Name(String),
        }
        let bad = |what: String| serde::de::Error::custom(format!("unknown restart policy {what}, expected Always, OnFailure, Never or 0..2"));
        match Raw::deserialize(d)? {
            Raw::Code(0) => Ok(RestartPolicy::Always),
            Raw::Code(1) => Ok(RestartPolicy::OnFailure),
            Raw::Code(2) => Ok(RestartPolicy::Never),
            Raw::Code(c) => Err(bad(c.to_string())),
            Raw::Name(n) => match n.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
                "always" => Ok(RestartPolicy::Always),
                "onfailure" => Ok(RestartPolicy::OnFailure),
                "never" => Ok(RestartPolicy::Never),
                _ => Err(bad(format!("`{n}`"))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub name: String,
    pub size_gb: f64,
}

/// Resource requests are per container; a pod asks for `containers` times
/// as much.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PodSpec {
    #[serde(default)]
    pub pod_id: String,
    #[serde(default = "one")]
    pub containers: u32,
    #[serde(default)]
    pub ram_request_gb: f64,
    #[serde(default)]
    pub cpu_request_cores: f64,
    pub restart_policy: RestartPolicy,
    pub image: Image,
}

fn one() -> u32 {
    1
}

impl PodSpec {
    pub fn new(image: &str, size_gb: f64) -> Self {
        PodSpec {
            pod_id: String::new(),
            containers: 1,
            ram_request_gb: 0.0,
            cpu_request_cores: 0.0,
            restart_policy: RestartPolicy::Never,
            image: Image { name: image.to_owned(), size_gb },
        }
    }

    pub fn requests(mut self, ram_gb: f64, cores: f64) -> Self {
        self.ram_request_gb = ram_gb;
        self.cpu_request_cores = cores;
        self
    }

    pub fn restart(mut self, policy: RestartPolicy) -> Self {
        self.restart_policy = policy;
        self
    }

    pub fn containers(mut self, k: u32) -> Self {
        self.containers = k;
        self
    }

    pub fn total_ram_gb(&self) -> f64 {
        self.ram_request_gb * self.containers as f64
    }

    pub fn total_cores(&self) -> f64 {
        self.cpu_request_cores * self.containers as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.containers == 0 {
            return Err(K8sError::Invalid(format!("pod `{}`: needs at least one container", self.pod_id)));
        }
        for (field, v) in [("ram_request_gb", self.ram_request_gb), ("cpu_request_cores", self.cpu_request_cores)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(K8sError::Invalid(format!("pod.{field}: must be >= 0, got {v}")));
            }
        }
        if !(self.image.size_gb >= 0.0 && self.image.size_gb.is_finite()) {
            return Err(K8sError::Invalid(format!("pod.image.size_gb: must be >= 0, got {}", self.image.size_gb)));
        }
        Ok(())
    }
}

/// Delays of the container lifecycle. Restart termination and graceful
/// termination each use one distribution for both the success and the
/// failure path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingProfile {
    /// container creation
    pub t1: DelayDistribution,
    /// container execution
    pub t2: DelayDistribution,
    /// time to container failure
    #[serde(default = "never")]
    pub t3: DelayDistribution,
    /// container termination before a restart
    pub t4_t5: DelayDistribution,
    /// graceful container termination
    pub t6_t7: DelayDistribution,
    #[serde(default = "default_grace")]
    pub grace_period_s: f64,
}

fn never() -> DelayDistribution {
    DelayDistribution::Never
}

fn default_grace() -> f64 {
    30.0
}

impl TimingProfile {
    /// Deterministic profile without failures and with the default grace period.
    pub fn constant(t1: f64, t2: f64, t4_t5: f64, t6_t7: f64) -> Self {
        TimingProfile {
            t1: DelayDistribution::constant(t1),
            t2: DelayDistribution::constant(t2),
            t3: DelayDistribution::Never,
            t4_t5: DelayDistribution::constant(t4_t5),
            t6_t7: DelayDistribution::constant(t6_t7),
            grace_period_s: default_grace(),
        }
    }

    pub fn failures(mut self, t3: DelayDistribution) -> Self {
        self.t3 = t3;
        self
    }

    pub fn grace(mut self, seconds: f64) -> Self {
        self.grace_period_s = seconds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, d) in [("t1", &self.t1), ("t2", &self.t2), ("t3", &self.t3), ("t4_t5", &self.t4_t5), ("t6_t7", &self.t6_t7)]
        {
            d.validate().map_err(|e| K8sError::Invalid(format!("timing.{name}: {e}")))?;
        }
        if !(self.grace_period_s >= 0.0 && self.grace_period_s.is_finite()) {
            return Err(K8sError::Invalid(format!("timing.grace_period_s: must be >= 0, got {}", self.grace_period_s)));
        }
        Ok(())
    }
}

/// Ratio of pods to containers, kept as a fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rho {
    pub pods: u64,
    pub containers: u64,
}

impl Rho {
    pub const ONE: Rho = Rho { pods: 1, containers: 1 };

    pub fn new(pods: u64, containers: u64) -> Self {
        Rho { pods, containers }
    }

    pub fn value(self) -> f64 {
        self.pods as f64 / self.containers as f64
    }

    /// Number of pods for `c` containers, if the layout is exact.
    pub fn pods_for(self, c: u64) -> Result<u64> {
        let err = |pods: f64| K8sError::NonIntegralLayout { containers: c, pods, rho: self.to_string() };
        if self.pods == 0 || self.containers == 0 || self.pods > self.containers {
            return Err(K8sError::Invalid(format!("rho {self} must lie in (0, 1]")));
        }
        let num = c * self.pods;
        if !num.is_multiple_of(self.containers) {
            return Err(err(num as f64 / self.containers as f64));
        }
        let pods = num / self.containers;
        if pods == 0 || !c.is_multiple_of(pods) {
            return Err(err(pods as f64));
        }
        Ok(pods)
    }

    /// Reads a decimal ratio against a known container count.
    pub fn from_decimal(rho: f64, c: u64) -> Result<Rho> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(K8sError::Invalid(format!("rho {rho} must lie in (0, 1]")));
        }
        let pods = (rho * c as f64).round();
        if (pods - rho * c as f64).abs() > 1e-9 * (c as f64).max(1.0) || pods < 1.0 {
            return Err(K8sError::NonIntegralLayout { containers: c, pods: rho * c as f64, rho: rho.to_string() });
        }
        Ok(Rho::new(pods as u64, c))
    }
}

impl fmt::Display for Rho {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.pods, self.containers)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentSpec {
    /// Total number of containers.
    pub containers: u64,
    pub rho: Rho,
    pub pods: Vec<PodSpec>,
    pub timing: TimingProfile,
}

impl DeploymentSpec {
    pub fn containers_per_pod(&self) -> u64 {
        self.containers / self.pods.len().max(1) as u64
    }
}

/// Splits `c` containers into `rho * c` identical pods cloned from `template`.
pub fn build_deployment(c: u64, rho: Rho, template: &PodSpec, timing: TimingProfile) -> Result<DeploymentSpec> {
    if c == 0 {
        return Err(K8sError::Invalid("deployment.C: at least one container".into()));
    }
    let n_pods = rho.pods_for(c)?;
    let per_pod = (c / n_pods) as u32;
    template.clone().containers(per_pod).validate()?;
    timing.validate()?;
    let base = if template.pod_id.is_empty() { "pod" } else { template.pod_id.as_str() };
    let pods = (0..n_pods)
        .map(|i| PodSpec { pod_id: format!("{base}-{i}"), containers: per_pod, ..template.clone() })
        .collect();
    Ok(DeploymentSpec { containers: c, rho, pods, timing })
}

/// Integer resource units used inside the nets: MB of RAM and millicores.
pub(crate) fn ram_units(gb: f64) -> i64 {
    (gb * 1024.0).round() as i64
}

pub(crate) fn cpu_units(cores: f64) -> i64 {
    (cores * 1000.0).round() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template() -> PodSpec {
        PodSpec::new("app", 1.0)
    }

    #[test]
    fn layouts() {
        let t = TimingProfile::constant(1.0, 0.0, 0.1, 0.1);
        let d = build_deployment(40, Rho::new(1, 4), &template(), t.clone()).unwrap();
        assert_eq!(d.pods.len(), 10);
        assert!(d.pods.iter().all(|p| p.containers == 4));
        assert_eq!(d.pods[3].pod_id, "pod-3");

        let d = build_deployment(1, Rho::ONE, &template(), t.clone()).unwrap();
        assert_eq!((d.pods.len(), d.pods[0].containers), (1, 1));

        let rho = Rho::from_decimal(0.3, 10).unwrap();
        assert_eq!(rho, Rho::new(3, 10));
        assert!(matches!(build_deployment(10, rho, &template(), t), Err(K8sError::NonIntegralLayout { .. })));
    }

    #[test]
    fn decimal_rho_must_land_on_an_integer_pod_count() {
        assert_eq!(Rho::from_decimal(0.25, 40).unwrap().pods_for(40).unwrap(), 10);
        assert!(Rho::from_decimal(0.33, 10).is_err());
        assert!(Rho::from_decimal(1.5, 10).is_err());
    }

    #[test]
    fn restart_policy_spellings() {
        for (text, want) in [("0", RestartPolicy::Always), ("\"OnFailure\"", RestartPolicy::OnFailure), ("\"never\"", RestartPolicy::Never)] {
            assert_eq!(serde_json::from_str::<RestartPolicy>(text).unwrap(), want);
        }
        assert!(serde_json::from_str::<RestartPolicy>("3").is_err());
        assert_eq!(serde_json::to_string(&RestartPolicy::OnFailure).unwrap(), "\"OnFailure\"");
    }

    #[test]
    fn cluster_validation() {
        assert!(ClusterSpec::new(vec![], 1.0).validate().is_err());
        assert!(ClusterSpec::homogeneous(2, 8.0, 1.0, 0.0).validate().is_err());
        let dup = ClusterSpec::new(vec![Machine::new("a", 1.0, 1.0), Machine::new("a", 1.0, 1.0)], 1.0);
        assert!(dup.validate().is_err());
        assert!(ClusterSpec::homogeneous(3, 8.0, 1.0, 1.0).validate().is_ok());
    }
}
