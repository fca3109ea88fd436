//! A bare timed Petri net: three jobs share two workers.

use podnet_petri::expr::var;
use podnet_petri::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let def = NetBuilder::new("shop")
        .place("Jobs", PlaceKind::Tuple)
        .place("Workers", PlaceKind::Counter)
        .place("Busy", PlaceKind::Tuple)
        .place("Done", PlaceKind::Tuple)
        .transition(
            TransitionBuilder::new("start")
                .input("Jobs", vec![var("j")])
                .input("Workers", vec![])
                .output("Busy", vec![var("j")]),
        )
        .transition(
            TransitionBuilder::new("finish")
                .input("Busy", vec![var("j")])
                .output("Done", vec![var("j")])
                .output("Workers", vec![])
                .delay(DelayDistribution::exponential(0.5)),
        )
        .build();

    let initial = Marking::new()
        .with("Jobs", token![1])
        .with("Jobs", token![2])
        .with("Jobs", token![3])
        .with_n("Workers", 2, token![]);
    let mut sim = SimulationState::single(build_net(&def, &initial)?, 42)?;
    let reason = sim.run(Stop::Quiescence)?;

    println!("stopped: {reason:?} at t = {:.3}", sim.clock());
    for e in sim.trace().iter() {
        let part = &e.parts[0];
        println!("{:8.3}  {:?}  {}  {:?}", e.time, e.phase, part.transition, part.tokens);
    }
    Ok(())
}
