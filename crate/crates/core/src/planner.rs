//! Choosing how many containers to put in each pod.
//!
//! Two layouts are considered: one pod per machine holding `ceil(C/n)`
//! containers, or one container per pod. CPU and I/O bound workloads get a
//! pod per machine whenever there are more containers than machines.
//! Network bound workloads weigh the faster creation of grouped containers
//! against the execution overhead of sharing a pod's network.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{predict_deploy_time, Calibration, CalibrationError, CalibrationTable, OverheadFactor};
use crate::format::sig6;

/// Overhead assumed for grouped containers when none was measured.
pub const DEFAULT_OVERHEAD: f64 = 1.01;
/// Deployment counts as negligible below this fraction of the execution time.
pub const DEFAULT_NEGLIGIBLE_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("missing calibration: {0}")]
    MissingCalibration(String),
    #[error("invalid plan input: {0}")]
    Invalid(String),
}

pub type Result<T, E = PlanError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadKind {
    #[serde(alias = "cpu", alias = "CpuIntensive")]
    CpuIntensive,
    #[serde(alias = "io", alias = "IoIntensive")]
    IoIntensive,
    #[serde(alias = "network", alias = "NetworkIntensive")]
    NetworkIntensive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppProfile {
    pub kind: WorkloadKind,
    #[serde(default)]
    pub is_service: bool,
    /// Whether deployment time is negligible next to execution time. When
    /// unset, services count as negligible and other workloads are judged
    /// from the calibration.
    #[serde(default)]
    pub deployment_negligible: Option<bool>,
}

impl AppProfile {
    pub fn new(kind: WorkloadKind) -> Self {
        AppProfile { kind, is_service: false, deployment_negligible: None }
    }

    pub fn service(mut self) -> Self {
        self.is_service = true;
        self
    }

    pub fn negligible(mut self, yes: bool) -> Self {
        self.deployment_negligible = Some(yes);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanInput {
    pub containers: u64,
    pub machines: u64,
    pub profile: AppProfile,
    /// Execution time with one container per pod.
    pub exec_time_s: f64,
    pub calibration: Option<CalibrationTable>,
    pub overhead: OverheadFactor,
    pub negligible_fraction: f64,
}

impl PlanInput {
    pub fn new(containers: u64, machines: u64, profile: AppProfile, exec_time_s: f64) -> Self {
        PlanInput {
            containers,
            machines,
            profile,
            exec_time_s,
            calibration: None,
            overhead: OverheadFactor::default(),
            negligible_fraction: DEFAULT_NEGLIGIBLE_FRACTION,
        }
    }

    pub fn calibration(mut self, table: CalibrationTable) -> Self {
        self.calibration = Some(table);
        self
    }

    pub fn overhead(mut self, f: OverheadFactor) -> Self {
        self.overhead = f;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.containers == 0 || self.machines == 0 {
            return Err(PlanError::Invalid("C and n must be >= 1".into()));
        }
        if !(self.exec_time_s >= 0.0 && self.exec_time_s.is_finite()) {
            return Err(PlanError::Invalid(format!("exec_time_s must be >= 0, got {}", self.exec_time_s)));
        }
        Ok(())
    }

    fn creation_time(&self, rho: f64, what: &str) -> Result<f64> {
        let table = self
            .calibration
            .as_ref()
            .ok_or_else(|| PlanError::MissingCalibration(format!("no creation-time table for {what}")))?;
        let c = u32::try_from(self.containers).unwrap_or(u32::MAX);
        let n = u32::try_from(self.machines).unwrap_or(u32::MAX);
        table.creation_time(rho, n, c).map_err(|e: CalibrationError| PlanError::MissingCalibration(format!("{what}: {e}")))
    }

    /// Overhead at `rho` and where it came from.
    fn alpha(&self, rho: f64) -> (f64, AlphaSource) {
        match self.overhead.at(rho) {
            Some(a) => (a, AlphaSource::Calibration),
            None => (DEFAULT_OVERHEAD, AlphaSource::Default),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// One pod per machine.
    #[serde(rename = "Rule1")]
    PodPerMachine,
    /// One container per pod.
    #[serde(rename = "Rule2")]
    ContainerPerPod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub pods: u64,
    pub containers_per_pod: u64,
}

impl Layout {
    fn for_rule(rule: Rule, c: u64, n: u64) -> Layout {
        match rule {
            Rule::ContainerPerPod => Layout { pods: c, containers_per_pod: 1 },
            Rule::PodPerMachine => {
                let per = c.div_ceil(n);
                Layout { pods: c.div_ceil(per), containers_per_pod: per }
            }
        }
    }

    pub fn capacity(&self) -> u64 {
        self.pods * self.containers_per_pod
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSource {
    Calibration,
    Default,
}

/// One branch of the decision, with the numbers it was decided on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum DecisionStep {
    Workload { kind: WorkloadKind, is_service: bool },
    MoreContainersThanMachines { containers: u64, machines: u64, holds: bool },
    DeploymentNegligible {
        declared: Option<bool>,
        is_service: bool,
        deploy_time_s: Option<f64>,
        exec_time_s: f64,
        fraction: f64,
        holds: bool,
    },
    /// Grouping pays off unless the creation time it saves is smaller than
    /// the execution overhead it adds.
    CreationVsOverhead {
        creation_one_per_pod_s: f64,
        creation_per_machine_s: f64,
        alpha: f64,
        alpha_source: AlphaSource,
        machines: u64,
        containers: u64,
        exec_time_s: f64,
        saved_s: f64,
        overhead_s: f64,
        crossover_exec_time_s: Option<f64>,
        holds: bool,
    },
    Chosen { rule: Rule, pods: u64, containers_per_pod: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecommendation {
    #[serde(rename = "rho")]
    pub layout: Layout,
    pub rule: Rule,
    /// Predicted deployment plus execution time, when a calibration is available.
    #[serde(rename = "predicted_Tt_s")]
    pub predicted_total_s: Option<f64>,
    pub decision_trace: Vec<DecisionStep>,
}

impl PlanRecommendation {
    /// Pods per container; exact only when the layout has no slack.
    pub fn rho(&self, containers: u64) -> f64 {
        self.layout.pods as f64 / containers as f64
    }

    pub fn explain(&self) -> String {
        let mut out = String::new();
        for step in &self.decision_trace {
            let line = match step {
                DecisionStep::Workload { kind, is_service } => {
                    format!("workload: {kind:?}{}", if *is_service { " (service)" } else { "" })
                }
                DecisionStep::MoreContainersThanMachines { containers, machines, holds } => {
                    format!("C = {containers} > n = {machines}: {}", yes_no(*holds))
                }
                DecisionStep::DeploymentNegligible { declared, deploy_time_s, exec_time_s, fraction, holds, .. } => match (declared, deploy_time_s) {
                    (Some(_), _) => format!("deployment negligible (declared): {}", yes_no(*holds)),
                    (None, Some(d)) => format!(
                        "deployment negligible ({} s < {} x {} s): {}",
                        sig6(*d),
                        sig6(*fraction),
                        sig6(*exec_time_s),
                        yes_no(*holds)
                    ),
                    (None, None) => format!("deployment negligible (service): {}", yes_no(*holds)),
                },
                DecisionStep::CreationVsOverhead { saved_s, overhead_s, alpha, alpha_source, holds, .. } => format!(
                    "creation time saved per container by grouping {} s < execution overhead share {} s (alpha {} from {:?}): {}",
                    sig6(*saved_s),
                    sig6(*overhead_s),
                    sig6(*alpha),
                    alpha_source,
                    yes_no(*holds)
                ),
                DecisionStep::Chosen { rule, pods, containers_per_pod } => {
                    let name = match rule {
                        Rule::PodPerMachine => "one pod per machine",
                        Rule::ContainerPerPod => "one container per pod",
                    };
                    format!("chosen: {name}, {pods} pods x {containers_per_pod} containers")
                }
            };
            out.push_str(&line);
            out.push('\n');
        }
        if let Some(t) = self.predicted_total_s {
            out.push_str(&format!("predicted total time: {} s\n", sig6(t)));
        }
        out
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// True when one container per pod is the faster choice: the creation time
/// saved by grouping is smaller than the execution overhead grouping adds.
pub fn eq1_holds(creation_one_per_pod_s: f64, creation_per_machine_s: f64, n: u64, c: u64, alpha: f64, exec_time_s: f64) -> bool {
    creation_one_per_pod_s - creation_per_machine_s < n as f64 * (alpha - 1.0) / c as f64 * exec_time_s
}

/// Deployment plus execution time at `rho`, assuming at least as many pods
/// as machines.
pub fn predict_total(rho: f64, input: &PlanInput) -> Result<f64> {
    input.validate()?;
    let tc = input.creation_time(rho, &format!("rho = {rho}"))?;
    let (alpha, _) = input.alpha(rho);
    Ok(input.containers as f64 / input.machines as f64 * tc + alpha * input.exec_time_s)
}

pub fn recommend(input: &PlanInput) -> Result<PlanRecommendation> {
    input.validate()?;
    let (c, n) = (input.containers, input.machines);
    let p = &input.profile;
    let mut trace = vec![DecisionStep::Workload { kind: p.kind, is_service: p.is_service }];
    let spread = c > n;

    let rule = match p.kind {
        WorkloadKind::CpuIntensive | WorkloadKind::IoIntensive => {
            trace.push(DecisionStep::MoreContainersThanMachines { containers: c, machines: n, holds: spread });
            if spread {
                Rule::PodPerMachine
            } else {
                Rule::ContainerPerPod
            }
        }
        WorkloadKind::NetworkIntensive => {
            let (negligible, deploy) = match (p.deployment_negligible, p.is_service) {
                (Some(d), _) => (d, None),
                (None, true) => (true, None),
                (None, false) => {
                    let tc = input.creation_time(1.0, "rho = 1")?;
                    let d = predict_deploy_time(c, c, n, tc);
                    (d < input.negligible_fraction * input.exec_time_s, Some(d))
                }
            };
            trace.push(DecisionStep::DeploymentNegligible {
                declared: p.deployment_negligible,
                is_service: p.is_service,
                deploy_time_s: deploy,
                exec_time_s: input.exec_time_s,
                fraction: input.negligible_fraction,
                holds: negligible,
            });
            if negligible {
                Rule::ContainerPerPod
            } else {
                trace.push(DecisionStep::MoreContainersThanMachines { containers: c, machines: n, holds: spread });
                if !spread {
                    Rule::ContainerPerPod
                } else {
                    let grouped = n as f64 / c as f64;
                    let tc1 = input.creation_time(1.0, "rho = 1")?;
                    let tcg = input.creation_time(grouped, &format!("rho = {n}/{c}"))?;
                    let (alpha, alpha_source) = input.alpha(grouped);
                    let holds = eq1_holds(tc1, tcg, n, c, alpha, input.exec_time_s);
                    let per_exec = n as f64 * (alpha - 1.0) / c as f64;
                    trace.push(DecisionStep::CreationVsOverhead {
                        creation_one_per_pod_s: tc1,
                        creation_per_machine_s: tcg,
                        alpha,
                        alpha_source,
                        machines: n,
                        containers: c,
                        exec_time_s: input.exec_time_s,
                        saved_s: tc1 - tcg,
                        overhead_s: per_exec * input.exec_time_s,
                        crossover_exec_time_s: (per_exec > 0.0).then(|| (tc1 - tcg) / per_exec),
                        holds,
                    });
                    if holds {
                        Rule::ContainerPerPod
                    } else {
                        Rule::PodPerMachine
                    }
                }
            }
        }
    };

    let layout = Layout::for_rule(rule, c, n);
    trace.push(DecisionStep::Chosen { rule, pods: layout.pods, containers_per_pod: layout.containers_per_pod });
    let rho = layout.pods as f64 / c as f64;
    let predicted_total_s = match &input.calibration {
        Some(_) => Some(predict_total(rho, input)?),
        None => None,
    };
    Ok(PlanRecommendation { layout, rule, predicted_total_s, decision_trace: trace })
}

/// Plan request file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    #[serde(rename = "C")]
    pub containers: u64,
    #[serde(rename = "n")]
    pub machines: u64,
    pub profile: AppProfile,
    #[serde(default)]
    pub exec_time_s: f64,
    /// Output of `calibrate`, inline.
    #[serde(default)]
    pub calibration: Option<Calibration>,
    /// Output of `calibrate`, as a path relative to the plan file.
    #[serde(default)]
    pub calibration_file: Option<PathBuf>,
    #[serde(default)]
    pub overhead: Option<f64>,
    #[serde(default = "default_fraction")]
    pub negligible_fraction: f64,
}

fn default_fraction() -> f64 {
    DEFAULT_NEGLIGIBLE_FRACTION
}

impl PlanConfig {
    pub fn from_json(text: &str) -> Result<PlanConfig> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            PlanError::Invalid(format!("{path}: {}", e.into_inner()))
        })
    }

    /// Resolves the calibration (inline or from `calibration_file`, relative to `base`).
    pub fn into_input(self, base: &Path) -> Result<PlanInput> {
        let calibration = match (&self.calibration, &self.calibration_file) {
            (Some(c), _) => Some(c.clone()),
            (None, Some(f)) => {
                let path = base.join(f);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| PlanError::MissingCalibration(format!("{}: {e}", path.display())))?;
                Some(
                    serde_json::from_str::<Calibration>(&text)
                        .map_err(|e| PlanError::Invalid(format!("calibration_file: {e}")))?,
                )
            }
            (None, None) => None,
        };
        let mut input = PlanInput::new(self.containers, self.machines, self.profile, self.exec_time_s);
        input.negligible_fraction = self.negligible_fraction;
        if let Some(cal) = calibration {
            input.calibration = cal.table;
            input.overhead = cal.overhead;
        }
        if let Some(a) = self.overhead {
            input.overhead = OverheadFactor::constant(a).map_err(|e| PlanError::Invalid(format!("overhead: {e}")))?;
        }
        Ok(input)
    }
}
