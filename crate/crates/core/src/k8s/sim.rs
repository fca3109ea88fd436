//! Running the system net: placement, image downloads with a shared
//! registry, and replications.

use rand::Rng;
use rayon::prelude::*;

use podnet_petri::{
    Delay, DelayContext, DelayHook, EnabledBinding, InstanceId, Phase, SimRng, SimulationState, Stop, StopReason,
    Value, DEFAULT_MAX_EVENTS,
};

use super::metrics::{self, SimResult};
use super::nets::{build_system_net, SystemNet, SYSTEM};
use super::{ClusterSpec, DeploymentSpec, Image, Machine, Result, SchedulerMode};

/// Seconds to pull `image` onto `machine` while `active` machines share
/// the registry. Zero if the machine already has the image.
pub fn image_download_delay(machine: &Machine, image: &Image, registry_bandwidth_gbps: f64, active: usize) -> f64 {
    if machine.preloaded_images.contains(&image.name) {
        return 0.0;
    }
    transfer_time(machine, image, registry_bandwidth_gbps, active)
}

fn transfer_time(machine: &Machine, image: &Image, registry_bandwidth_gbps: f64, active: usize) -> f64 {
    let rate = registry_bandwidth_gbps / 8.0 / active.max(1) as f64;
    image.size_gb / rate + machine.rtt_ms / 1000.0
}

/// Placement policy for the `schedule` transition. Only the oldest pod
/// that fits somewhere is considered; the mode picks its machine.
pub struct PodScheduler {
    mode: SchedulerMode,
    machines: usize,
    cursor: usize,
}

impl PodScheduler {
    pub fn new(mode: SchedulerMode, machines: usize) -> Self {
        PodScheduler { mode, machines, cursor: 0 }
    }
}

fn machine_of(b: &EnabledBinding) -> usize {
    b.get("m").and_then(Value::as_int).expect("schedule binds m") as usize
}

impl podnet_petri::BindingChooser for PodScheduler {
    fn choose(&mut self, candidates: &[EnabledBinding], rng: &mut SimRng) -> usize {
        let head = candidates[0].get("p");
        let options: Vec<usize> = (0..candidates.len()).filter(|&i| candidates[i].get("p") == head).collect();
        let pick = match self.mode {
            SchedulerMode::FirstFit => *options.iter().min_by_key(|&&i| machine_of(&candidates[i])).expect("non-empty"),
            SchedulerMode::Random => options[rng.random_range(0..options.len())],
            SchedulerMode::Spread => {
                let n = self.machines.max(1);
                let dist = |i: &usize| (machine_of(&candidates[*i]) + n - self.cursor % n) % n;
                *options.iter().min_by_key(|i| dist(i)).expect("non-empty")
            }
        };
        self.cursor = (machine_of(&candidates[pick]) + 1) % self.machines.max(1);
        pick
    }
}

/// Initial estimate of a download's duration: the registry bandwidth is
/// split equally among the machines downloading right now.
pub struct DownloadHook {
    machines: Vec<Machine>,
    image: Image,
    bandwidth_gbps: f64,
}

impl DownloadHook {
    pub fn new(cluster: &ClusterSpec, image: &Image) -> Self {
        DownloadHook { machines: cluster.machines.clone(), image: image.clone(), bandwidth_gbps: cluster.registry_bandwidth_gbps }
    }
}

impl DelayHook for DownloadHook {
    fn delay(&mut self, ctx: &DelayContext<'_>, _rng: &mut SimRng) -> Delay {
        let m = ctx.binding.get("m").and_then(Value::as_int).expect("download binds m") as usize;
        let settled = ctx.instance.count("ImageAbsent") + ctx.instance.count("ImagePresent");
        let active = self.machines.len().saturating_sub(settled);
        Delay::After(transfer_time(&self.machines[m], &self.image, self.bandwidth_gbps, active))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub max_events: u64,
    /// Stop at this simulated time even if the run has not settled.
    pub horizon: Option<f64>,
}

impl RunOptions {
    pub fn new(seed: u64) -> Self {
        RunOptions { seed, max_events: DEFAULT_MAX_EVENTS, horizon: None }
    }

    pub fn max_events(mut self, n: u64) -> Self {
        self.max_events = n;
        self
    }

    pub fn horizon(mut self, t: f64) -> Self {
        self.horizon = Some(t);
        self
    }
}

impl Default for RunOptions {
    fn default() -> Self {
        Self::new(0)
    }
}

impl SystemNet {
    /// Simulation state with the pod scheduler and the download model attached.
    pub fn into_state(self, seed: u64) -> Result<SimulationState> {
        let scheduler = PodScheduler::new(self.cluster.scheduler_mode, self.cluster.n());
        let hook = self.image.as_ref().map(|img| DownloadHook::new(&self.cluster, img));
        let mut sim = self.into_bare_state(seed)?;
        sim.set_chooser(SYSTEM, "schedule", Box::new(scheduler));
        if let Some(h) = hook {
            sim.set_delay_hook(SYSTEM, "download", Box::new(h));
        }
        Ok(sim)
    }
}

#[derive(Clone)]
struct Transfer {
    firing: u64,
    remaining_gb: f64,
    rtt_s: f64,
}

/// Processor sharing at the registry: every transfer in progress gets an
/// equal share of the bandwidth, and shares grow as transfers finish.
struct Registry {
    rate_gbs: f64,
    clock: f64,
    transfers: Vec<Transfer>,
}

const DONE_EPS: f64 = 1e-12;

impl Registry {
    fn new(bandwidth_gbps: f64) -> Self {
        Registry { rate_gbs: bandwidth_gbps / 8.0, clock: 0.0, transfers: Vec::new() }
    }

    /// Completion time of each transfer if no new one arrives, in order of completion.
    fn drain(transfers: &mut Vec<Transfer>, clock: &mut f64, rate: f64, until: f64) -> Vec<(u64, f64, f64)> {
        let mut finished = Vec::new();
        while !transfers.is_empty() {
            let share = rate / transfers.len() as f64;
            let step = transfers.iter().map(|t| t.remaining_gb).fold(f64::INFINITY, f64::min) / share;
            if *clock + step > until {
                for t in transfers.iter_mut() {
                    t.remaining_gb -= share * (until - *clock);
                }
                *clock = until;
                break;
            }
            *clock += step;
            for t in transfers.iter_mut() {
                t.remaining_gb -= share * step;
            }
            let now = *clock;
            transfers.retain(|t| {
                let done = t.remaining_gb <= DONE_EPS;
                if done {
                    finished.push((t.firing, now, t.rtt_s));
                }
                !done
            });
        }
        finished
    }

    fn start(&mut self, sim: &mut SimulationState, firing: u64, size_gb: f64, rtt_s: f64) -> Result<()> {
        let now = sim.clock();
        Self::drain(&mut self.transfers, &mut self.clock, self.rate_gbs, now);
        self.clock = now;
        if size_gb > 0.0 {
            self.transfers.push(Transfer { firing, remaining_gb: size_gb, rtt_s });
        }
        let mut plan = self.transfers.clone();
        let mut clock = now;
        for (f, done, rtt) in Self::drain(&mut plan, &mut clock, self.rate_gbs, f64::INFINITY) {
            sim.reschedule(f, done + rtt)?;
        }
        Ok(())
    }
}

fn download_started(s: &SimulationState) -> bool {
    s.trace().events.last().is_some_and(|e| e.phase == Phase::Consume && e.involves(InstanceId(0), "download"))
}

/// Simulates the deployment until every pod has settled (or the horizon in
/// `opts` is reached) and extracts the metrics.
pub fn simulate_with(cluster: &ClusterSpec, deployment: &DeploymentSpec, opts: &RunOptions) -> Result<SimResult> {
    let net = build_system_net(cluster, deployment)?;
    let pods = net.pod_count();
    let image = net.image.clone();
    let mut sim = net.into_state(opts.seed)?;
    sim.set_max_events(opts.max_events);
    let mut registry = Registry::new(cluster.registry_bandwidth_gbps);

    let reason = loop {
        let mut stop = vec![Stop::When(Box::new(download_started))];
        if let Some(h) = opts.horizon {
            stop.push(Stop::AtTime(h));
        }
        match sim.run(Stop::Any(stop))? {
            StopReason::Predicate => {
                let ev = sim.trace().events.last().expect("download event");
                let firing = ev.firing;
                let m = ev
                    .part(InstanceId(0))
                    .and_then(|p| p.tokens.first())
                    .and_then(|(_, t)| t.int(0))
                    .expect("Downloading token holds the machine") as usize;
                let size = image.as_ref().map_or(0.0, |i| i.size_gb);
                registry.start(&mut sim, firing, size, cluster.machines[m].rtt_ms / 1000.0)?;
            }
            other => break other,
        }
    };
    Ok(metrics::extract(cluster, deployment, pods, opts.seed, sim, reason))
}

pub fn simulate(cluster: &ClusterSpec, deployment: &DeploymentSpec, seed: u64) -> Result<SimResult> {
    simulate_with(cluster, deployment, &RunOptions::new(seed))
}

/// Runs `reps` independent replications in parallel. Replication `i` uses
/// seed `opts.seed + i`; results come back in replication order.
pub fn simulate_replications(
    cluster: &ClusterSpec,
    deployment: &DeploymentSpec,
    opts: &RunOptions,
    reps: usize,
) -> Vec<Result<SimResult>> {
    (0..reps as u64)
        .into_par_iter()
        .map(|i| simulate_with(cluster, deployment, &RunOptions { seed: opts.seed.wrapping_add(i), ..*opts }))
        .collect()
}
