//! Observations extracted from a finished run.

use std::collections::HashMap;

use podnet_petri::{InstanceId, Phase, SimulationState, StopReason, Token, Trace, Value};
use serde::{Deserialize, Serialize};

use super::nets::pod_index;
use super::{ClusterSpec, DeploymentSpec, K8sError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PodPhase {
    PendingScheduling,
    Pending,
    Running,
    RunningFailed,
    Success,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContainerPhase {
    Waiting,
    Running,
    Success,
    Failure,
    SuccessExit,
    FailedExit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PodRecord {
    pub pod_id: String,
    pub machine: Option<String>,
    pub schedule_time: Option<f64>,
    /// When the last of its containers started running.
    pub running_time: Option<f64>,
    pub terminal_time: Option<f64>,
    /// From the start of graceful termination to resource release.
    pub termination_s: Option<f64>,
    pub phase: PodPhase,
    pub restarts: u32,
    pub containers: Vec<ContainerPhase>,
}

/// One creation of one container (the first, or one after a restart).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreationRecord {
    pub pod: usize,
    pub container: i64,
    /// 0 for the first creation, then one more per restart.
    pub attempt: i64,
    pub machine: Option<String>,
    pub start: f64,
    pub end: f64,
}

/// Termination of a container that is about to be restarted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub pod: usize,
    pub container: i64,
    /// Attempt number of the creation that follows.
    pub attempt: i64,
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DownloadRecord {
    pub machine: String,
    pub start: f64,
    /// `None` if the run stopped mid-transfer.
    pub end: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineUsage {
    pub node_id: String,
    pub ram_free_gb: f64,
    pub cores_free: f64,
    pub pods: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimResult {
    pub seed: u64,
    pub end_time: f64,
    pub events: u64,
    /// False if the run was cut off at the horizon.
    pub settled: bool,
    /// Time until every pod is Running, image downloads included.
    pub total_time_s: Option<f64>,
    /// Time during which at least one machine was downloading the image.
    pub download_time_s: f64,
    /// Deployment time without the downloads.
    pub deploy_time_s: Option<f64>,
    pub pods: Vec<PodRecord>,
    pub creations: Vec<CreationRecord>,
    pub restarts: Vec<RestartRecord>,
    pub downloads: Vec<DownloadRecord>,
    pub machines: Vec<MachineUsage>,
    #[serde(skip)]
    pub trace: Trace,
}

impl SimResult {
    pub fn termination_times(&self) -> Vec<f64> {
        self.pods.iter().filter_map(|p| p.termination_s).collect()
    }

    pub fn restart_count(&self) -> usize {
        self.restarts.len()
    }
}

/// Restart cycle durations of one container: each restart termination
/// plus the creation that follows it.
pub fn restart_cycle_time(result: &SimResult, pod: usize, container: i64) -> Result<Vec<f64>> {
    let cycles: Vec<f64> = result
        .restarts
        .iter()
        .filter(|r| r.pod == pod && r.container == container)
        .filter_map(|r| {
            result
                .creations
                .iter()
                .find(|c| c.pod == pod && c.container == container && c.attempt == r.attempt)
                .map(|c| (r.end - r.start) + (c.end - c.start))
        })
        .collect();
    if cycles.is_empty() {
        return Err(K8sError::NoRestartObserved { pod, container });
    }
    Ok(cycles)
}

fn pod_of(tok: &Token) -> Option<usize> {
    tok.get(0).and_then(Value::as_net).and_then(pod_index)
}

fn token_in<'a>(tokens: &'a [(String, Token)], place: &str) -> Option<&'a Token> {
    tokens.iter().find(|(p, _)| p == place).map(|(_, t)| t)
}

/// Total length of the union of the intervals.
fn covered(mut spans: Vec<(f64, f64)>) -> f64 {
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (s, e) in spans {
        match cur {
            Some((cs, ce)) if s <= ce => cur = Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                total += ce - cs;
                cur = Some((s, e));
            }
            None => cur = Some((s, e)),
        }
    }
    total + cur.map_or(0.0, |(s, e)| e - s)
}

fn container_phase(place: &str) -> ContainerPhase {
    match place {
        "Running" => ContainerPhase::Running,
        "Success" | "SuccessWait" => ContainerPhase::Success,
        "Failure" | "Failed" | "FailWait" => ContainerPhase::Failure,
        "SuccessExit" => ContainerPhase::SuccessExit,
        "FailedExit" => ContainerPhase::FailedExit,
        _ => ContainerPhase::Waiting,
    }
}

pub(crate) fn extract(
    cluster: &ClusterSpec,
    deployment: &DeploymentSpec,
    n_pods: usize,
    seed: u64,
    mut sim: SimulationState,
    reason: StopReason,
) -> SimResult {
    let node = |m: i64| cluster.machines.get(m as usize).map(|x| x.node_id.clone());
    let end_time = sim.clock();
    let mut pods: Vec<PodRecord> = deployment
        .pods
        .iter()
        .take(n_pods)
        .map(|p| PodRecord {
            pod_id: p.pod_id.clone(),
            machine: None,
            schedule_time: None,
            running_time: None,
            terminal_time: None,
            termination_s: None,
            phase: PodPhase::PendingScheduling,
            restarts: 0,
            containers: Vec::new(),
        })
        .collect();
    let mut placed: Vec<Option<i64>> = vec![None; n_pods];
    let mut terminating: Vec<Option<f64>> = vec![None; n_pods];
    let mut started: HashMap<u64, (f64, usize, i64, i64)> = HashMap::new();
    let mut creations = Vec::new();
    let mut restarts = Vec::new();
    let mut downloads: Vec<(u64, DownloadRecord)> = Vec::new();

    for ev in sim.trace().iter() {
        for part in &ev.parts {
            let t = ev.time;
            if part.instance == InstanceId(0) {
                match (part.transition.as_str(), ev.phase) {
                    ("schedule", Phase::Consume) => {
                        let pod = token_in(&part.tokens, "PendingScheduling").and_then(pod_of);
                        let m = token_in(&part.tokens, "Machines").and_then(|k| k.int(0));
                        if let (Some(i), Some(m)) = (pod, m) {
                            pods[i].schedule_time = Some(t);
                            pods[i].machine = node(m);
                            placed[i] = Some(m);
                        }
                    }
                    ("podRunning", Phase::Produce) => {
                        if let Some(i) = token_in(&part.tokens, "Running").and_then(pod_of) {
                            pods[i].running_time.get_or_insert(t);
                        }
                    }
                    ("terminate" | "terminateF", Phase::Consume) => {
                        if let Some(i) = part.tokens.first().and_then(|(_, k)| pod_of(k)) {
                            terminating[i] = Some(t);
                        }
                    }
                    ("podSuccess" | "podFailed", Phase::Produce) => {
                        let place = if part.transition == "podSuccess" { "Success" } else { "Failed" };
                        if let Some(i) = token_in(&part.tokens, place).and_then(pod_of) {
                            pods[i].terminal_time = Some(t);
                            pods[i].termination_s = terminating[i].map(|s| t - s);
                        }
                    }
                    ("download", Phase::Consume) => {
                        if let Some(m) = part.tokens.first().and_then(|(_, k)| k.int(0)) {
                            downloads.push((
                                ev.firing,
                                DownloadRecord { machine: node(m).unwrap_or_default(), start: t, end: None },
                            ));
                        }
                    }
                    ("download", Phase::Produce) => {
                        if let Some(d) = downloads.iter_mut().find(|(f, _)| *f == ev.firing) {
                            d.1.end = Some(t);
                        }
                    }
                    _ => {}
                }
                continue;
            }
            let Some(pod) = pod_index(part.instance) else { continue };
            match (part.transition.as_str(), ev.phase) {
                ("T1" | "T4" | "T5", Phase::Consume) => {
                    if let Some((_, k)) = part.tokens.first() {
                        started.insert(ev.firing, (t, pod, k.int(0).unwrap_or(0), k.int(1).unwrap_or(0)));
                    }
                }
                ("T1", Phase::Produce) => {
                    if let Some((s, pod, c, n)) = started.remove(&ev.firing) {
                        let machine = placed.get(pod).copied().flatten().and_then(node);
                        creations.push(CreationRecord { pod, container: c, attempt: n, machine, start: s, end: t });
                    }
                }
                ("T4" | "T5", Phase::Produce) => {
                    if let Some((s, pod, c, n)) = started.remove(&ev.firing) {
                        pods[pod].restarts += 1;
                        restarts.push(RestartRecord { pod, container: c, attempt: n + 1, start: s, end: t });
                    }
                }
                _ => {}
            }
        }
    }

    // final phases from the marking
    let root = sim.instance(InstanceId(0)).expect("root instance");
    for place in ["Pending", "Running", "RunningFailed", "Terminating", "Success", "Failed"] {
        for tok in root.tokens(place) {
            let Some(i) = pod_of(tok) else { continue };
            pods[i].phase = match place {
                "Pending" => PodPhase::Pending,
                "Running" => PodPhase::Running,
                "RunningFailed" => PodPhase::RunningFailed,
                "Terminating" if tok.int(6).unwrap_or(0) > 0 => PodPhase::RunningFailed,
                "Terminating" => PodPhase::Running,
                "Success" => PodPhase::Success,
                _ => PodPhase::Failed,
            };
        }
    }
    let mut machines: Vec<MachineUsage> = cluster
        .machines
        .iter()
        .map(|m| MachineUsage { node_id: m.node_id.clone(), ram_free_gb: 0.0, cores_free: 0.0, pods: 0 })
        .collect();
    // a machine token is absent only while a schedule firing is in flight
    for tok in root.tokens("Machines") {
        if let (Some(m), Some(ram), Some(cpu)) = (tok.int(0), tok.int(1), tok.int(2)) {
            machines[m as usize].ram_free_gb = ram as f64 / 1024.0;
            machines[m as usize].cores_free = cpu as f64 / 1000.0;
        }
    }
    for m in placed.iter().flatten() {
        machines[*m as usize].pods += 1;
    }
    for (i, rec) in pods.iter_mut().enumerate() {
        if let Some(child) = sim.instance(super::nets::pod_instance(i)) {
            let mut phases = vec![ContainerPhase::Waiting; deployment.pods[i].containers as usize];
            for place in ["Running", "Success", "SuccessWait", "Failure", "Failed", "FailWait", "SuccessExit", "FailedExit"] {
                for tok in child.tokens(place) {
                    if let Some(slot) = tok.int(0).and_then(|c| phases.get_mut(c as usize)) {
                        *slot = container_phase(place);
                    }
                }
            }
            rec.containers = phases;
        }
    }

    let all_running = pods.iter().map(|p| p.running_time).collect::<Option<Vec<f64>>>();
    let total_time_s = all_running.filter(|v| !v.is_empty()).map(|v| v.into_iter().fold(0.0, f64::max));
    let download_time_s = covered(downloads.iter().map(|(_, d)| (d.start, d.end.unwrap_or(end_time))).collect());
    let deploy_time_s = total_time_s.map(|t| (t - download_time_s).max(0.0));

    SimResult {
        seed,
        end_time,
        events: sim.events_processed(),
        settled: reason == StopReason::Quiescent,
        total_time_s,
        download_time_s,
        deploy_time_s,
        pods,
        creations,
        restarts,
        downloads: downloads.into_iter().map(|(_, d)| d).collect(),
        machines,
        trace: sim.take_trace(),
    }
}
