//! Graceful termination of multi-container pods and the restart cycle of a
//! failing container.

use podnet::k8s::*;
use podnet_petri::DelayDistribution;

fn main() -> Result<(), K8sError> {
    let cluster = ClusterSpec::homogeneous(1, 32.0, 4.0, 1.0).preload_all("app");

    println!("containers,termination_s");
    for k in [1u64, 10, 20, 40, 60] {
        let d = build_deployment(k, Rho::new(1, k), &PodSpec::new("app", 1.225), TimingProfile::constant(0.5, 5.0, 0.15, 0.11))?;
        let r = simulate(&cluster, &d, 0)?;
        println!("{k},{:.3}", r.pods[0].termination_s.unwrap_or(f64::NAN));
    }

    // a container that fails every 4 s and is always restarted
    let pod = PodSpec::new("app", 1.225).restart(RestartPolicy::Always);
    let timing = TimingProfile::constant(2.0, 100.0, 0.15, 0.1).failures(DelayDistribution::constant(4.0));
    let d = build_deployment(1, Rho::ONE, &pod, timing)?;
    let r = simulate_with(&cluster, &d, &RunOptions::new(0).horizon(60.0))?;
    let cycles = restart_cycle_time(&r, 0, 0)?;
    println!("\n{} restarts in 60 s, cycle {:.3} s (stop 0.15 + create 2.0)", r.restart_count(), cycles[0]);
    println!("pod phase at the horizon: {:?}", r.pods[0].phase);
    Ok(())
}
