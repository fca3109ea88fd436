//! The container net (one instance per pod, one token per container) and
//! the system net (one token per pod).

use podnet_petri::expr::{and, eq, ge, gt, ne, val, var, Expr};
use podnet_petri::{
    build_net, DelayDistribution, Hierarchy, InstanceId, Marking, Net, NetBuilder, NetDefinition, NetInstance,
    PlaceKind, SimulationState, TransitionBuilder,
};

use super::{cpu_units, ram_units, ClusterSpec, CreationMode, DeploymentSpec, Image, Result, TimingProfile};

pub(crate) const SYSTEM: &str = "system";
pub(crate) const CONTAINER: &str = "container";

fn vars(names: &[&str]) -> Vec<Expr> {
    names.iter().map(|n| var(n)).collect()
}

/// Container lifecycle. Tokens are `(container, restarts)`; the `Policy`
/// place holds the pod's restart policy code.
///
/// With `linked` the creation, start, completion, failure and stop steps
/// synchronize with the owning pod in the system net. Without it the net
/// runs on its own.
pub fn container_net(timing: &TimingProfile, linked: bool) -> NetDefinition {
    let cn = || vars(&["c", "n"]);
    let up = |t: TransitionBuilder, label: &str, args: Vec<Expr>| if linked { t.uplink(label, args) } else { t };
    let mut b = NetBuilder::new(CONTAINER);
    for p in [
        "Waiting",
        "Created",
        "Running",
        "Success",
        "Failure",
        "Failed",
        "SuccessWait",
        "FailWait",
        "SuccessExit",
        "FailedExit",
        "Policy",
    ] {
        b = b.place(p, PlaceKind::Tuple);
    }
    if linked {
        for c in ["create", "runCont", "contDone", "contFailed", "stop"] {
            b = b.channel(c);
        }
    }
    b.transition(up(
        TransitionBuilder::new("T1").input("Waiting", cn()).output("Created", cn()).delay(timing.t1.clone()),
        "create",
        vec![],
    ))
    .transition(up(
        TransitionBuilder::new("runCont").input("Created", cn()).guard(eq(var("n"), 0)).output("Running", cn()),
        "runCont",
        vec![],
    ))
    .transition(TransitionBuilder::new("rerun").input("Created", cn()).guard(gt(var("n"), 0)).output("Running", cn()))
    .transition(
        TransitionBuilder::new("T2").input("Running", cn()).output("Success", cn()).race("exec").delay(timing.t2.clone()),
    )
    .transition(
        TransitionBuilder::new("T3").input("Running", cn()).output("Failure", cn()).race("exec").delay(timing.t3.clone()),
    )
    .transition(
        TransitionBuilder::new("T4")
            .input("Success", cn())
            .read("Policy", vars(&["r"]))
            .guard(eq(var("r"), 0))
            .output("Waiting", vec![var("c"), var("n") + 1])
            .delay(timing.t4_t5.clone()),
    )
    .transition(up(
        TransitionBuilder::new("doneOk")
            .input("Success", cn())
            .read("Policy", vars(&["r"]))
            .guard(ne(var("r"), 0))
            .output("SuccessWait", cn()),
        "contDone",
        vec![val(0)],
    ))
    .transition(up(TransitionBuilder::new("failCont").input("Failure", cn()).output("Failed", cn()), "contFailed", vec![]))
    .transition(
        TransitionBuilder::new("T5")
            .input("Failed", cn())
            .read("Policy", vars(&["r"]))
            .guard(ne(var("r"), 2))
            .output("Waiting", vec![var("c"), var("n") + 1])
            .delay(timing.t4_t5.clone()),
    )
    .transition(up(
        TransitionBuilder::new("doneFail")
            .input("Failed", cn())
            .read("Policy", vars(&["r"]))
            .guard(eq(var("r"), 2))
            .output("FailWait", cn()),
        "contDone",
        vec![val(1)],
    ))
    .transition(up(
        TransitionBuilder::new("T6").input("SuccessWait", cn()).output("SuccessExit", cn()).delay(timing.t6_t7.clone()),
        "stop",
        vec![],
    ))
    .transition(up(
        TransitionBuilder::new("T7").input("FailWait", cn()).output("FailedExit", cn()).delay(timing.t6_t7.clone()),
        "stop",
        vec![],
    ))
    .build()
}

/// Pod lifecycle. Pod tokens carry the pod's container net as their first
/// field; machines are `(index, ram_mb, millicores)`.
pub fn system_net(grace_period_s: f64, creation: CreationMode) -> NetDefinition {
    let pod4 = || vars(&["p", "ram", "cpu", "k"]);
    let pm = || vars(&["p", "m"]);
    let run7 = || vars(&["p", "m", "ram", "cpu", "k", "left", "bad"]);
    let grace = DelayDistribution::constant(grace_period_s);

    let mut b = NetBuilder::new(SYSTEM)
        .place("Arrivals", PlaceKind::NetRef)
        .place("PendingScheduling", PlaceKind::NetRef)
        .place("Scheduler", PlaceKind::Counter)
        .place("Machines", PlaceKind::Tuple)
        .place("Pending", PlaceKind::NetRef)
        .place("Pulling", PlaceKind::NetRef)
        .place("ImageAbsent", PlaceKind::Tuple)
        .place("Downloading", PlaceKind::Tuple)
        .place("ImagePresent", PlaceKind::Tuple)
        .place("Bound", PlaceKind::NetRef)
        .place("Slot", PlaceKind::Tuple)
        .place("Running", PlaceKind::NetRef)
        .place("RunningFailed", PlaceKind::NetRef)
        .place("Terminating", PlaceKind::NetRef)
        .place("Success", PlaceKind::NetRef)
        .place("Failed", PlaceKind::NetRef);
    if creation == CreationMode::PodParallel {
        b = b.place("Ready", PlaceKind::NetRef).place("Creating", PlaceKind::NetRef);
    }
    for c in ["create", "runCont", "contDone", "contFailed", "stop"] {
        b = b.channel(c);
    }

    b = b
        .transition(TransitionBuilder::new("submit").input("Arrivals", pod4()).output("PendingScheduling", pod4()))
        .transition(
            TransitionBuilder::new("schedule")
                .input("PendingScheduling", pod4())
                .input("Scheduler", vec![])
                .input("Machines", vars(&["m", "mram", "mcpu"]))
                .guard(and(ge(var("mram"), var("ram")), ge(var("mcpu"), var("cpu"))))
                .output("Scheduler", vec![])
                .output("Machines", vec![var("m"), var("mram") - var("ram"), var("mcpu") - var("cpu")])
                .output("Pending", vec![var("p"), var("m"), var("ram"), var("cpu"), var("k"), var("k")])
                .output("Pulling", pm()),
        )
        .transition(
            TransitionBuilder::new("startDownload")
                .input("ImageAbsent", vars(&["m"]))
                .read("Pulling", pm())
                .output("Downloading", vars(&["m"])),
        )
        .transition(TransitionBuilder::new("download").input("Downloading", vars(&["m"])).output("ImagePresent", vars(&["m"])));

    let ready_place = match creation {
        CreationMode::MachineSerial => "Bound",
        CreationMode::PodParallel => "Ready",
    };
    b = b.transition(
        TransitionBuilder::new("imageReady").input("Pulling", pm()).read("ImagePresent", vars(&["m"])).output(ready_place, pm()),
    );
    b = match creation {
        CreationMode::MachineSerial => b.transition(
            TransitionBuilder::new("createCont")
                .read("Bound", pm())
                .input("Slot", vars(&["m"]))
                .output("Slot", vars(&["m"]))
                .downlink("p", "create", vec![]),
        ),
        CreationMode::PodParallel => b
            .transition(
                TransitionBuilder::new("claimSlot")
                    .input("Ready", pm())
                    .input("Slot", vars(&["m"]))
                    .output("Bound", pm())
                    .output("Creating", pm()),
            )
            .transition(TransitionBuilder::new("createCont").read("Bound", pm()).downlink("p", "create", vec![])),
    };

    let mut pod_running = TransitionBuilder::new("podRunning")
        .input("Pending", vars(&["p", "m", "ram", "cpu", "k", "pend"]))
        .guard(eq(var("pend"), 0))
        .output("Running", vec![var("p"), var("m"), var("ram"), var("cpu"), var("k"), var("k"), val(0)]);
    if creation == CreationMode::PodParallel {
        pod_running = pod_running.input("Creating", pm()).output("Slot", vars(&["m"]));
    }

    let done = |name: &str, place: &str| {
        TransitionBuilder::new(name)
            .input(place, run7())
            .guard(gt(var("left"), 0))
            .output(place, vec![var("p"), var("m"), var("ram"), var("cpu"), var("k"), var("left") - 1, var("bad") + var("f")])
            .downlink("p", "contDone", vec![var("f")])
    };
    let terminate = |name: &str, place: &str| {
        TransitionBuilder::new(name)
            .input(place, run7())
            .guard(eq(var("left"), 0))
            .output("Terminating", vars(&["p", "m", "ram", "cpu", "k", "k", "bad"]))
            .delay(grace.clone())
    };
    let release = |name: &str, test: Expr, to: &str| {
        TransitionBuilder::new(name)
            .input("Terminating", vars(&["p", "m", "ram", "cpu", "k", "s", "bad"]))
            .guard(and(eq(var("s"), 0), test))
            .input("Bound", pm())
            .input("Machines", vars(&["m", "mram", "mcpu"]))
            .output("Machines", vec![var("m"), var("mram") + var("ram"), var("mcpu") + var("cpu")])
            .output(to, pm())
    };

    b.transition(
        TransitionBuilder::new("runCont")
            .input("Pending", vars(&["p", "m", "ram", "cpu", "k", "pend"]))
            .guard(gt(var("pend"), 0))
            .output("Pending", vec![var("p"), var("m"), var("ram"), var("cpu"), var("k"), var("pend") - 1])
            .downlink("p", "runCont", vec![]),
    )
    .transition(pod_running)
    .transition(
        TransitionBuilder::new("failR").input("Running", run7()).output("RunningFailed", run7()).downlink("p", "contFailed", vec![]),
    )
    .transition(
        TransitionBuilder::new("failRF")
            .input("RunningFailed", run7())
            .output("RunningFailed", run7())
            .downlink("p", "contFailed", vec![]),
    )
    .transition(done("doneR", "Running"))
    .transition(done("doneRF", "RunningFailed"))
    .transition(terminate("terminate", "Running"))
    .transition(terminate("terminateF", "RunningFailed"))
    .transition(
        TransitionBuilder::new("stopCont")
            .input("Terminating", vars(&["p", "m", "ram", "cpu", "k", "s", "bad"]))
            .guard(gt(var("s"), 0))
            .output("Terminating", vec![var("p"), var("m"), var("ram"), var("cpu"), var("k"), var("s") - 1, var("bad")])
            .downlink("p", "stop", vec![]),
    )
    .transition(release("podSuccess", eq(var("bad"), 0), "Success"))
    .transition(release("podFailed", gt(var("bad"), 0), "Failed"))
    .build()
}

/// A system net with its pods' container nets, ready to simulate.
#[derive(Clone)]
pub struct SystemNet {
    pub(crate) hierarchy: Hierarchy,
    pub(crate) pods: usize,
    pub(crate) cluster: ClusterSpec,
    pub(crate) image: Option<Image>,
}

impl SystemNet {
    pub const ROOT: InstanceId = InstanceId(0);

    pub fn root(&self) -> &NetInstance {
        self.hierarchy.get(Self::ROOT).expect("root instance")
    }

    /// Container net of pod `i` (in deployment order).
    pub fn pod(&self, i: usize) -> Option<&NetInstance> {
        (i < self.pods).then(|| self.hierarchy.get(pod_instance(i))).flatten()
    }

    pub fn pod_count(&self) -> usize {
        self.pods
    }

    /// Simulation state without the scheduler and download hooks attached.
    pub fn into_bare_state(self, seed: u64) -> Result<SimulationState> {
        Ok(self.hierarchy.into_state(seed).map_err(podnet_petri::NetError::from)?)
    }
}

pub(crate) fn pod_instance(i: usize) -> InstanceId {
    InstanceId(i + 1)
}

pub(crate) fn pod_index(id: InstanceId) -> Option<usize> {
    id.0.checked_sub(1)
}

/// Builds the system net for `deployment` on `cluster`: one `Machines` token
/// per machine and one pod token per pod, each pod referencing its own
/// container net.
pub fn build_system_net(cluster: &ClusterSpec, deployment: &DeploymentSpec) -> Result<SystemNet> {
    cluster.validate()?;
    deployment.timing.validate()?;
    let system = system_net(deployment.timing.grace_period_s, cluster.creation);
    let containers = Net::new(&container_net(&deployment.timing, true)).map_err(podnet_petri::NetError::from)?;

    let mut m = Marking::new().with("Scheduler", podnet_petri::token![]);
    for (i, mach) in cluster.machines.iter().enumerate() {
        let idx = i as i64;
        m.add("Machines", podnet_petri::token![idx, ram_units(mach.ram_gb), cpu_units(mach.cores)]);
        m.add("Slot", podnet_petri::token![idx]);
    }
    // one image per deployment; a machine either has it or fetches it once
    let image = deployment.pods.first().map(|p| p.image.name.clone());
    for (i, mach) in cluster.machines.iter().enumerate() {
        let place = match &image {
            Some(img) if !mach.preloaded_images.contains(img) => "ImageAbsent",
            _ => "ImagePresent",
        };
        m.add(place, podnet_petri::token![i as i64]);
    }
    for (i, pod) in deployment.pods.iter().enumerate() {
        pod.validate()?;
        m.add(
            "Arrivals",
            podnet_petri::token![
                pod_instance(i),
                ram_units(pod.total_ram_gb()),
                cpu_units(pod.total_cores()),
                pod.containers as i64
            ],
        );
    }
    let root = build_net(&system, &m)?;

    let mut h = Hierarchy::new();
    h.add(root);
    for pod in &deployment.pods {
        let mut cm = Marking::new().with("Policy", podnet_petri::token![pod.restart_policy.code()]);
        for c in 0..pod.containers {
            cm.add("Waiting", podnet_petri::token![c as i64, 0]);
        }
        h.add(containers.instantiate(&cm).map_err(podnet_petri::NetError::from)?);
    }
    Ok(SystemNet {
        hierarchy: h,
        pods: deployment.pods.len(),
        cluster: cluster.clone(),
        image: deployment.pods.first().map(|p| p.image.clone()),
    })
}
