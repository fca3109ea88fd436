//! Deployment time against the number of containers, with the image
//! preloaded and without it.

use podnet::calibration::predict_deploy_time;
use podnet::k8s::*;

fn main() -> Result<(), K8sError> {
    let image = PodSpec::new("app", 1.225);
    let timing = TimingProfile::constant(2.048, 60.0, 0.15, 0.1);
    let n = 8;

    println!("C,rho,preloaded_Td,predicted_Td,download_Tt,download_time");
    for c in [1u64, 5, 10, 20, 40] {
        for rho in [Rho::ONE, Rho::new(1, 4)] {
            if c % rho.containers != 0 || (c < 4 && rho != Rho::ONE) {
                continue;
            }
            let d = build_deployment(c, rho, &image, timing.clone())?;
            let warm = simulate(&ClusterSpec::homogeneous(n, 32.0, 4.0, 1.0).preload_all("app"), &d, 1)?;
            let cold = simulate(&ClusterSpec::homogeneous(n, 32.0, 4.0, 1.0), &d, 1)?;
            let predicted = predict_deploy_time(c, d.pods.len() as u64, n as u64, 2.048);
            println!(
                "{c},{rho},{:.3},{predicted:.3},{:.3},{:.3}",
                warm.deploy_time_s.unwrap_or(f64::NAN),
                cold.total_time_s.unwrap_or(f64::NAN),
                cold.download_time_s
            );
        }
    }

    // stochastic creation times, 30 replications run in parallel
    let d = build_deployment(40, Rho::ONE, &image, TimingProfile { t1: podnet_petri::DelayDistribution::normal(2.048, 0.2), ..timing })?;
    let cluster = ClusterSpec::homogeneous(n, 32.0, 4.0, 1.0).preload_all("app");
    let runs = simulate_replications(&cluster, &d, &RunOptions::new(7), 30);
    let times: Vec<f64> = runs.into_iter().filter_map(|r| r.ok()?.deploy_time_s).collect();
    let s = podnet::calibration::summarize(&times, 0.05).expect("30 runs");
    println!("\nC=40 with noisy creation: T_d = {:.3} s, 95% CI [{:.3}, {:.3}]", s.mean, s.ci_low, s.ci_high);
    Ok(())
}
