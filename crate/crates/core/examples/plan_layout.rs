//! Choosing containers per pod for different workloads.

use podnet::calibration::{CalibrationTable, OverheadFactor, TcEntry};
use podnet::planner::*;

fn main() -> Result<(), PlanError> {
    for (kind, c) in [(WorkloadKind::CpuIntensive, 40), (WorkloadKind::IoIntensive, 5)] {
        let p = recommend(&PlanInput::new(c, 8, AppProfile::new(kind), 600.0))?;
        print!("{kind:?}, C={c}:\n{}\n", p.explain());
    }

    let table = CalibrationTable::new(vec![
        TcEntry { rho: 1.0, n: 8, containers: 40, creation_s: 2.048 },
        TcEntry { rho: 0.2, n: 8, containers: 40, creation_s: 1.3 },
    ])
    .expect("non-empty table");
    for te in [100.0, 1000.0] {
        let input = PlanInput::new(40, 8, AppProfile::new(WorkloadKind::NetworkIntensive).negligible(false), te)
            .calibration(table.clone())
            .overhead(OverheadFactor::constant(1.01).expect("valid overhead"));
        let p = recommend(&input)?;
        print!("network, C=40, exec {te} s:\n{}\n", p.explain());
    }
    Ok(())
}
