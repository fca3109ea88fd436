use podnet::k8s::*;
use podnet_petri::{DelayDistribution, InstanceId, Phase};

fn image() -> PodSpec {
    PodSpec::new("app", 1.2)
}

fn preloaded(n: usize) -> ClusterSpec {
    ClusterSpec::homogeneous(n, 64.0, 16.0, 1.0).preload_all("app")
}

fn deploy(c: u64, rho: Rho, timing: TimingProfile) -> DeploymentSpec {
    build_deployment(c, rho, &image(), timing).unwrap()
}

#[test]
fn machines_without_pods_are_idle() {
    let cluster = ClusterSpec::new(
        vec![Machine::new("a", 8.0, 1.0), Machine::new("b", 16.0, 2.0), Machine::new("c", 32.0, 4.0)],
        1.0,
    );
    let d = DeploymentSpec { containers: 0, rho: Rho::ONE, pods: vec![], timing: TimingProfile::constant(1.0, 1.0, 0.1, 0.1) };
    let net = build_system_net(&cluster, &d).unwrap();
    assert_eq!(net.root().count("Machines"), 3);
    let tokens: Vec<_> = net.root().tokens("Machines").cloned().collect();
    assert_eq!(tokens[2].int(1), Some(32 * 1024));
    assert_eq!(tokens[2].int(2), Some(4000));
    assert!(net.root().enabled_bindings().is_empty());
    let r = simulate(&cluster, &d, 0).unwrap();
    assert_eq!(r.events, 0);
    assert_eq!(r.total_time_s, None);
}

#[test]
fn pod_runs_only_after_every_container_is_created() {
    let d = deploy(3, Rho::new(1, 3), TimingProfile::constant(1.0, 5.0, 0.1, 0.1));
    let r = simulate(&preloaded(2), &d, 0).unwrap();
    assert_eq!(r.creations.len(), 3);
    let last_created = r.creations.iter().map(|c| c.end).fold(0.0, f64::max);
    assert_eq!(last_created, 3.0);
    assert_eq!(r.pods[0].running_time, Some(3.0));
    assert_eq!(r.pods[0].phase, PodPhase::Success);
    assert!(r.pods[0].containers.iter().all(|c| *c == ContainerPhase::SuccessExit));

    // the Running place is entered after the third runCont synchronization
    let run_conts: Vec<f64> = r.trace.iter().filter(|e| e.phase == Phase::Consume && e.involves(InstanceId(0), "runCont")).map(|e| e.time).collect();
    let running = r.trace.iter().find(|e| e.phase == Phase::Produce && e.involves(InstanceId(0), "podRunning")).unwrap();
    assert_eq!(run_conts.len(), 3);
    assert!(run_conts.iter().all(|t| *t <= running.time));
    let idx_running = r.trace.iter().position(|e| std::ptr::eq(e, running)).unwrap();
    let idx_last = r.trace.iter().rposition(|e| e.phase == Phase::Consume && e.involves(InstanceId(0), "runCont")).unwrap();
    assert!(idx_last < idx_running);
}

#[test]
fn always_never_releases_resources() {
    let cluster = ClusterSpec::homogeneous(1, 8.0, 2.0, 1.0).preload_all("app");
    let pod = image().requests(2.0, 0.5).restart(RestartPolicy::Always);
    let d = build_deployment(2, Rho::new(1, 2), &pod, TimingProfile::constant(1.0, 3.0, 0.2, 0.1)).unwrap();
    let r = simulate_with(&cluster, &d, &RunOptions::new(0).horizon(200.0)).unwrap();
    assert!(!r.settled);
    assert!(r.restart_count() > 10);
    assert_eq!(r.machines[0].ram_free_gb, 4.0);
    assert_eq!(r.machines[0].cores_free, 1.0);
    assert!(r.trace.iter().all(|e| !e.involves(InstanceId(0), "podSuccess")));

    let err = simulate_with(&cluster, &d, &RunOptions::new(0).max_events(500)).unwrap_err();
    assert!(matches!(err, K8sError::Sim(podnet_petri::SimError::BudgetExceeded(500))));
}

#[test]
fn never_and_on_failure_release_resources() {
    let cluster = ClusterSpec::homogeneous(1, 8.0, 2.0, 1.0).preload_all("app");
    for policy in [RestartPolicy::Never, RestartPolicy::OnFailure] {
        let pod = image().requests(2.0, 0.5).restart(policy);
        let d = build_deployment(2, Rho::new(1, 2), &pod, TimingProfile::constant(1.0, 3.0, 0.2, 0.1)).unwrap();
        let r = simulate(&cluster, &d, 0).unwrap();
        assert!(r.settled);
        assert_eq!(r.pods[0].phase, PodPhase::Success);
        assert_eq!((r.machines[0].ram_free_gb, r.machines[0].cores_free), (8.0, 2.0));
    }
}

#[test]
fn first_fit_skips_machines_that_are_too_small() {
    let cluster = ClusterSpec::new(vec![Machine::new("m1", 2.0, 1.0), Machine::new("m2", 8.0, 2.0)], 1.0)
        .scheduler(SchedulerMode::FirstFit)
        .preload_all("app");
    let pod = image().requests(4.0, 1.0).restart(RestartPolicy::Always);
    let d = build_deployment(1, Rho::ONE, &pod, TimingProfile::constant(1.0, 3.0, 0.2, 0.1)).unwrap();
    let r = simulate_with(&cluster, &d, &RunOptions::new(0).horizon(1.0)).unwrap();
    assert_eq!(r.pods[0].machine.as_deref(), Some("m2"));
    assert_eq!((r.machines[1].ram_free_gb, r.machines[1].cores_free), (4.0, 1.0));
    assert_eq!((r.machines[0].ram_free_gb, r.machines[0].cores_free), (2.0, 1.0));
}

#[test]
fn oversized_pod_waits_forever() {
    let cluster = ClusterSpec::new(
        vec![Machine::new("a", 8.0, 1.0), Machine::new("b", 16.0, 2.0), Machine::new("c", 32.0, 4.0)],
        1.0,
    )
    .preload_all("app");
    let pod = image().requests(64.0, 1.0);
    let d = build_deployment(1, Rho::ONE, &pod, TimingProfile::constant(1.0, 3.0, 0.2, 0.1)).unwrap();
    let r = simulate(&cluster, &d, 0).unwrap();
    assert!(r.settled);
    assert_eq!(r.pods[0].phase, PodPhase::PendingScheduling);
    assert_eq!(r.pods[0].schedule_time, None);
    assert_eq!(r.total_time_s, None);
}

#[test]
fn oversized_pod_does_not_block_later_pods() {
    let cluster = ClusterSpec::homogeneous(1, 8.0, 4.0, 1.0).preload_all("app");
    let t = TimingProfile::constant(1.0, 3.0, 0.2, 0.1);
    let big = PodSpec { pod_id: "big".into(), ..image().requests(64.0, 1.0) };
    let small = PodSpec { pod_id: "small".into(), ..image().requests(1.0, 1.0) };
    let d = DeploymentSpec { containers: 2, rho: Rho::ONE, pods: vec![big, small], timing: t };
    let r = simulate(&cluster, &d, 0).unwrap();
    assert_eq!(r.pods[0].phase, PodPhase::PendingScheduling);
    assert_eq!(r.pods[1].phase, PodPhase::Success);
}

fn placements(mode: SchedulerMode) -> Vec<usize> {
    let cluster = preloaded(8).scheduler(mode);
    let d = deploy(16, Rho::ONE, TimingProfile::constant(1.0, 0.0, 0.1, 0.1));
    let r = simulate(&cluster, &d, 3).unwrap();
    r.machines.iter().map(|m| m.pods).collect()
}

#[test]
fn placement_modes() {
    assert_eq!(placements(SchedulerMode::Spread), vec![2; 8]);
    let mut ff = vec![0; 8];
    ff[0] = 16;
    assert_eq!(placements(SchedulerMode::FirstFit), ff);
    let random = placements(SchedulerMode::Random);
    assert_eq!(random.iter().sum::<usize>(), 16);
    assert!(random.iter().filter(|&&k| k > 0).count() > 1);
}

#[test]
fn deployment_time_follows_machine_parallelism() {
    let t1 = 2.048;
    for c in [8u64, 16, 40] {
        let d = deploy(c, Rho::ONE, TimingProfile::constant(t1, 0.0, 0.1, 0.1));
        let r = simulate(&preloaded(8), &d, 0).unwrap();
        let expected = c as f64 * t1 / 8.0;
        assert!((r.deploy_time_s.unwrap() - expected).abs() < 1e-9, "C={c}: {:?}", r.deploy_time_s);
        assert_eq!(r.download_time_s, 0.0);
    }
    let d = deploy(1, Rho::ONE, TimingProfile::constant(1.7, 0.0, 0.1, 0.1));
    let r = simulate(&preloaded(1), &d, 0).unwrap();
    assert_eq!(r.deploy_time_s, Some(1.7));
}

#[test]
fn pod_parallel_creation_overlaps_containers_of_one_pod() {
    let d = deploy(4, Rho::new(1, 4), TimingProfile::constant(2.0, 0.0, 0.1, 0.1));
    let serial = simulate(&preloaded(2), &d, 0).unwrap();
    let parallel = simulate(&preloaded(2).creation(CreationMode::PodParallel), &d, 0).unwrap();
    assert_eq!(serial.deploy_time_s, Some(8.0));
    assert_eq!(parallel.deploy_time_s, Some(2.0));

    // two pods on one machine are still created one after the other
    let d = deploy(4, Rho::new(2, 4), TimingProfile::constant(2.0, 0.0, 0.1, 0.1));
    let parallel = simulate(&preloaded(1).creation(CreationMode::PodParallel), &d, 0).unwrap();
    assert_eq!(parallel.deploy_time_s, Some(4.0));
}

#[test]
fn graceful_termination_takes_grace_plus_serial_stops() {
    for (k, t6, want) in [(10u64, 0.10, 31.0), (60, 0.11, 36.6)] {
        let d = deploy(k, Rho::new(1, k), TimingProfile::constant(1.0, 2.0, 0.1, t6));
        let r = simulate(&preloaded(1), &d, 0).unwrap();
        let got = r.pods[0].termination_s.unwrap();
        assert!((got - want).abs() < 1e-9, "{k} containers: {got}");
    }
    let d = deploy(3, Rho::new(1, 3), TimingProfile::constant(1.0, 2.0, 0.1, 0.5).grace(0.0));
    let r = simulate(&preloaded(1), &d, 0).unwrap();
    assert!((r.termination_times()[0] - 1.5).abs() < 1e-12);
}

#[test]
fn restart_cycle_is_termination_plus_creation() {
    let pod = image().restart(RestartPolicy::Always);
    let d = build_deployment(1, Rho::ONE, &pod, TimingProfile::constant(2.0, 1.0, 0.15, 0.1)).unwrap();
    let r = simulate_with(&preloaded(1), &d, &RunOptions::new(0).horizon(20.0)).unwrap();
    let cycles = restart_cycle_time(&r, 0, 0).unwrap();
    assert!(cycles.len() >= 2);
    for c in cycles {
        assert!((c - 2.15).abs() < 1e-12, "{c}");
    }

    let d = deploy(1, Rho::ONE, TimingProfile::constant(2.0, 1.0, 0.15, 0.1));
    let r = simulate(&preloaded(1), &d, 0).unwrap();
    assert!(matches!(restart_cycle_time(&r, 0, 0), Err(K8sError::NoRestartObserved { .. })));
}

#[test]
fn failures_route_through_running_failed() {
    let pod = image().restart(RestartPolicy::Never);
    let timing = TimingProfile::constant(1.0, 5.0, 0.1, 0.1).failures(DelayDistribution::constant(2.0));
    let d = build_deployment(2, Rho::new(1, 2), &pod, timing.clone()).unwrap();
    let r = simulate(&preloaded(1), &d, 0).unwrap();
    assert_eq!(r.pods[0].phase, PodPhase::Failed);
    assert!(r.pods[0].containers.iter().all(|c| *c == ContainerPhase::FailedExit));
    assert!(r.trace.iter().any(|e| e.involves(InstanceId(0), "failR")));
    assert!(r.trace.iter().any(|e| e.involves(InstanceId(0), "terminateF")));

    // OnFailure restarts failing containers and keeps the pod alive
    let pod = image().restart(RestartPolicy::OnFailure);
    let d = build_deployment(1, Rho::ONE, &pod, timing).unwrap();
    let r = simulate_with(&preloaded(1), &d, &RunOptions::new(0).horizon(30.0)).unwrap();
    assert_eq!(r.pods[0].phase, PodPhase::RunningFailed);
    assert!(r.pods[0].restarts >= 5);
}

#[test]
fn images_are_downloaded_once_per_machine() {
    let cluster = ClusterSpec::homogeneous(4, 64.0, 16.0, 8.0);
    let d = deploy(12, Rho::ONE, TimingProfile::constant(1.0, 0.0, 0.1, 0.1));
    let r = simulate(&cluster, &d, 0).unwrap();
    assert_eq!(r.downloads.len(), 4);
    let mut machines: Vec<_> = r.downloads.iter().map(|d| d.machine.clone()).collect();
    machines.dedup();
    assert_eq!(machines.len(), 4);
    // 4 transfers of 1.2 GB sharing 1 GB/s end together at 4.8 s
    for dl in &r.downloads {
        assert!((dl.end.unwrap() - 4.8).abs() < 1e-9, "{dl:?}");
    }
    assert!((r.download_time_s - 4.8).abs() < 1e-9);
    assert!((r.total_time_s.unwrap() - (4.8 + 3.0)).abs() < 1e-9);
    assert!((r.deploy_time_s.unwrap() - 3.0).abs() < 1e-9);
}

#[test]
fn staggered_downloads_share_the_registry() {
    // one pod per machine, machines m1 and m2 only; m2's pod needs the first
    // pod's machine to be busy, so both start at t=0
    let cluster = ClusterSpec::new(vec![Machine::new("m1", 8.0, 1.0), Machine::new("m2", 8.0, 1.0).rtt(500.0)], 8.0);
    let d = deploy(2, Rho::ONE, TimingProfile::constant(1.0, 0.0, 0.1, 0.1));
    let r = simulate(&cluster, &d, 0).unwrap();
    // 1.2 GB each at 0.5 GB/s: both transfers end at 2.4 s; m2 adds 0.5 s of latency
    let ends: Vec<f64> = r.downloads.iter().map(|d| d.end.unwrap()).collect();
    assert!((ends[0] - 2.4).abs() < 1e-9 && (ends[1] - 2.9).abs() < 1e-9, "{ends:?}");

    // a partially preloaded cluster: only m2 downloads, at full speed
    let cluster = ClusterSpec::new(vec![Machine::new("m1", 8.0, 1.0).preload("app"), Machine::new("m2", 8.0, 1.0)], 8.0);
    let r = simulate(&cluster, &d, 0).unwrap();
    assert_eq!(r.downloads.len(), 1);
    assert!((r.downloads[0].end.unwrap() - 1.2).abs() < 1e-9);
}

#[test]
fn resources_are_conserved_along_the_trace() {
    let cluster = ClusterSpec::homogeneous(3, 8.0, 2.0, 1.0).preload_all("app");
    let pod = image().requests(1.5, 0.5).restart(RestartPolicy::Never);
    let timing = TimingProfile::constant(0.5, 3.0, 0.1, 0.1).failures(DelayDistribution::exponential(0.3));
    let d = build_deployment(12, Rho::new(1, 2), &pod, timing).unwrap();
    let r = simulate(&cluster, &d, 11).unwrap();
    let cap = (8 * 1024, 2000);
    let mut alloc = vec![(0i64, 0i64); 3];
    let mut checks = 0;
    for e in r.trace.iter() {
        for part in e.parts.iter().filter(|p| p.instance == InstanceId(0)) {
            let pod_token = match (part.transition.as_str(), e.phase) {
                ("schedule", Phase::Produce) => part.tokens.iter().find(|(p, _)| p == "Pending").map(|(_, t)| (t, 1)),
                ("podSuccess" | "podFailed", Phase::Consume) => {
                    part.tokens.iter().find(|(p, _)| p == "Terminating").map(|(_, t)| (t, -1))
                }
                _ => None,
            };
            if let Some((t, sign)) = pod_token {
                let m = t.int(1).unwrap() as usize;
                alloc[m].0 += sign * t.int(2).unwrap();
                alloc[m].1 += sign * t.int(3).unwrap();
            }
            if e.phase == Phase::Produce {
                for (_, tok) in part.tokens.iter().filter(|(p, _)| p == "Machines") {
                    let m = tok.int(0).unwrap() as usize;
                    let free = (tok.int(1).unwrap(), tok.int(2).unwrap());
                    assert!(free.0 >= 0 && free.1 >= 0);
                    assert_eq!((free.0 + alloc[m].0, free.1 + alloc[m].1), cap);
                    checks += 1;
                }
            }
        }
    }
    assert_eq!(checks, 2 * d.pods.len());
    assert_eq!(alloc, vec![(0, 0); 3]);
    assert!(r.pods.iter().all(|p| matches!(p.phase, PodPhase::Success | PodPhase::Failed)));
}

#[test]
fn creation_parallelism_is_bounded_by_pods_and_machines() {
    for (c, rho, n) in [(12u64, Rho::new(1, 4), 8usize), (16, Rho::ONE, 4), (6, Rho::new(1, 2), 3)] {
        let d = deploy(c, rho, TimingProfile::constant(1.0, 0.0, 0.1, 0.1));
        let r = simulate(&preloaded(n), &d, 0).unwrap();
        let pods = d.pods.len();
        let mut times: Vec<f64> = r.creations.iter().map(|c| c.start).collect();
        times.sort_by(f64::total_cmp);
        for t in times {
            let mut busy: Vec<&str> = r
                .creations
                .iter()
                .filter(|c| c.start <= t && t < c.end)
                .map(|c| c.machine.as_deref().unwrap())
                .collect();
            busy.sort();
            let total = busy.len();
            busy.dedup();
            assert_eq!(busy.len(), total, "one creation per machine at a time");
            assert!(busy.len() <= pods.min(n));
        }
        // all containers of a pod are created on the pod's machine
        for cr in &r.creations {
            assert_eq!(cr.machine, r.pods[cr.pod].machine);
        }
    }
}

#[test]
fn replications_are_reproducible_and_ordered() {
    let timing = TimingProfile {
        t1: DelayDistribution::normal(2.0, 0.3),
        ..TimingProfile::constant(2.0, 1.0, 0.1, 0.1)
    };
    let d = deploy(16, Rho::ONE, timing);
    let opts = RunOptions::new(40);
    let a = simulate_replications(&preloaded(8), &d, &opts, 6);
    let b = simulate_replications(&preloaded(8), &d, &opts, 6);
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
        assert_eq!(x.seed, 40 + i as u64);
        assert_eq!(x.trace.to_ndjson(), y.trace.to_ndjson());
    }
    let single = simulate(&preloaded(8), &d, 42).unwrap();
    assert_eq!(single.deploy_time_s, a[2].as_ref().unwrap().deploy_time_s);
    assert_ne!(a[0].as_ref().unwrap().deploy_time_s, a[1].as_ref().unwrap().deploy_time_s);
}
